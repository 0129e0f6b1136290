"""Search orchestration, surrogate rewards and the random-search baseline."""

from .orchestrator import (ChildJob, ChildResult, Comparison, RealEvaluator, Search, SearchConfig,
                           SearchResult, StageStart, SurrogateEvaluator, compare_rl_vs_random,
                           derive_seed, load_search_data, make_evaluator, prepare_start, run_child,
                           search_step, two_stage_search)
from .random_search import random_rollout, random_trajectory
from .surrogate import ConstantSurrogate, DepthSurrogate, make_surrogate

__all__ = [
    "ChildJob", "ChildResult", "Comparison", "ConstantSurrogate", "DepthSurrogate",
    "RealEvaluator", "Search", "SearchConfig", "SearchResult", "StageStart", "SurrogateEvaluator",
    "compare_rl_vs_random", "derive_seed", "load_search_data", "make_evaluator", "make_surrogate",
    "prepare_start", "random_rollout", "random_trajectory", "run_child", "search_step",
    "two_stage_search",
]
