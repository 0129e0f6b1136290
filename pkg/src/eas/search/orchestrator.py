"""The search loop: sample children, transform, fine-tune, score, update the controller."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..arch import ArchitectureSpec, count_params, serialize, start_network
from ..controller import (AdamState, BaselineState, ControllerConfig, ControllerParams,
                          Trajectory, baseline_update, init_controller, parse_schedule,
                          reinforce_update, reward_transform, rollout)
from ..data import LabeledImageSet, normalize, parse_dataset_ref, split_validation
from ..experiments import ExperimentRecord, append_record
from ..runtime import NetworkParams, init_params
from ..runtime.training import TrainConfig, evaluate, train
from ..runtime.weights import save_params
from ..transform import apply_actions
from .random_search import random_trajectory
from .surrogate import make_surrogate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    samples_per_step: int = 10
    finetune_epochs: int = 20
    schedule: str = "deeper*5,wider*4"
    stage_budgets: tuple[int, ...] = (300, 150)
    long_train_epochs: int = 100
    workers: int = 1
    seed: int = 0
    reward_mode: str = "real"  # "real" or "surrogate"
    surrogate: str = "depth"  # "depth" or "constant"
    controller: str = "rl"  # "rl" or "random"
    dataset: str = "synthetic:classes=10,n=2000,size=16,seed=0"
    val_size: int = 5000
    start_epochs: int = 20
    batch_size: int = 64
    lr0: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 1e-4
    augment: bool = False
    controller_lr: float = 1e-3
    baseline_decay: float = 0.95
    embed_dim: int = 16
    hidden: int = 50
    init_scale: float = 0.3
    dtype: str = "float32"
    calibration_size: int = 256
    save_weights: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stage_budgets", tuple(int(b) for b in self.stage_budgets))
        positive = ("samples_per_step", "workers", "batch_size", "embed_dim", "hidden")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("finetune_epochs", "long_train_epochs", "start_epochs", "calibration_size"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.stage_budgets or min(self.stage_budgets) <= 0:
            raise ValueError("stage budgets must be positive")
        if self.reward_mode not in ("real", "surrogate"):
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.controller not in ("rl", "random"):
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        parse_schedule(self.schedule)

    @classmethod
    def from_mapping(cls, data: dict) -> "SearchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_mapping(self) -> dict:
        out = asdict(self)
        out["stage_budgets"] = list(self.stage_budgets)
        return out

    def train_config(self, epochs: int, seed: int) -> TrainConfig:
        return TrainConfig(epochs=epochs, batch_size=self.batch_size, lr0=self.lr0,
                           momentum=self.momentum, weight_decay=self.weight_decay,
                           seed=seed, augment=self.augment)

    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(embed_dim=self.embed_dim, hidden=self.hidden,
                                init_scale=self.init_scale)


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# child jobs


@dataclass
class ChildJob:
    spec: ArchitectureSpec
    params: NetworkParams
    actions: list
    transform_seed: int
    train_config: TrainConfig
    calibration_size: int
    result_spec: ArchitectureSpec | None = None


@dataclass
class ChildResult:
    val_accuracy: float | None
    pre_accuracy: float | None
    params: NetworkParams | None
    error: str = ""
    wall_time: float = 0.0


def run_child(job: ChildJob, train_set: LabeledImageSet, val_set: LabeledImageSet) -> ChildResult:
    """Transform the parent copy, fine-tune it and score it; failures are returned, not raised."""
    t0 = time.perf_counter()
    try:
        calibration = train_set.images[:job.calibration_size] if job.calibration_size else None
        spec, params = apply_actions(job.spec, job.params, job.actions,
                                     np.random.default_rng(job.transform_seed),
                                     calibration=calibration)
        pre = evaluate(spec, params, val_set)
        params, _ = train(spec, params, train_set, job.train_config, track_train_acc=False)
        acc = evaluate(spec, params, val_set)
        return ChildResult(acc, pre, params, "", time.perf_counter() - t0)
    except Exception as exc:  # a failed child must not stop the search
        log.warning("child failed: %r", exc)
        return ChildResult(None, None, None, repr(exc), time.perf_counter() - t0)


_WORKER_DATA: dict = {}


def _init_worker(train_set, val_set):
    _WORKER_DATA["train"], _WORKER_DATA["val"] = train_set, val_set


def _pool_child(job: ChildJob) -> ChildResult:
    return run_child(job, _WORKER_DATA["train"], _WORKER_DATA["val"])


class RealEvaluator:
    """Fine-tunes children on real data, optionally across a process pool."""

    def __init__(self, config: SearchConfig, train_set: LabeledImageSet, val_set: LabeledImageSet):
        self.config = config
        self.train_set, self.val_set = train_set, val_set
        self._pool = None
        if config.workers > 1:
            self._pool = ProcessPoolExecutor(config.workers, initializer=_init_worker,
                                             initargs=(train_set, val_set))

    def accuracy(self, spec, params) -> float:
        return evaluate(spec, params, self.val_set)

    def run(self, jobs: list[ChildJob]) -> list[ChildResult]:
        if self._pool is None:
            return [run_child(job, self.train_set, self.val_set) for job in jobs]
        return list(self._pool.map(_pool_child, jobs))

    def long_train(self, spec, params, seed: int):
        params, _ = train(spec, params, self.train_set,
                          self.config.train_config(self.config.long_train_epochs, seed),
                          track_train_acc=False)
        return params, self.accuracy(spec, params)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()


class SurrogateEvaluator:
    """Scores architectures with a surrogate; weights are never transformed."""

    def __init__(self, config: SearchConfig, surrogate=None):
        self.surrogate = surrogate or make_surrogate(config.surrogate, config.seed)

    def accuracy(self, spec, params) -> float:
        return self.surrogate(spec)

    def run(self, jobs: list[ChildJob]) -> list[ChildResult]:
        out = []
        for job in jobs:
            t0 = time.perf_counter()
            acc = self.surrogate(job.result_spec)
            out.append(ChildResult(acc, None, None, "", time.perf_counter() - t0))
        return out

    def long_train(self, spec, params, seed: int):
        return params, self.surrogate(spec)

    def close(self):
        pass


# ---------------------------------------------------------------------------
# search


@dataclass
class StageStart:
    id: str
    spec: ArchitectureSpec
    params: NetworkParams | None
    accuracy: float


@dataclass
class SearchResult:
    best_id: str
    best_spec: ArchitectureSpec
    best_params: NetworkParams | None
    best_accuracy: float
    records: list[ExperimentRecord]
    stage_starts: list[StageStart] = field(default_factory=list)
    controller: ControllerParams | None = None


class Search:
    """Owns the controller, its optimizer and baseline, and the experiment log.

    Children of one step are independent copies of the stage start; the
    controller is updated once per step after all children are scored.
    """

    def __init__(self, config: SearchConfig, evaluator, log_path=None, weights_dir=None,
                 controller: ControllerParams | None = None):
        self.config = config
        self.evaluator = evaluator
        self.log_path = log_path
        self.weights_dir = Path(weights_dir) if weights_dir else None
        self.schedule = parse_schedule(config.schedule)
        ccfg = config.controller_config()
        self.controller = controller or init_controller(ccfg, np.random.default_rng([config.seed, 17]))
        self.adam = AdamState(lr=config.controller_lr)
        self.baseline = BaselineState(decay=config.baseline_decay)
        self.records: list[ExperimentRecord] = []
        self.step_rewards: list[float] = []

    # one step -------------------------------------------------------------

    def _sample(self, start: StageStart, rng) -> Trajectory:
        if self.config.controller == "rl":
            return rollout(start.spec, self.controller, self.schedule, rng)
        return random_trajectory(start.spec, self.schedule, rng, self.controller.config)

    def search_step(self, stage: int, step: int, start: StageStart, n: int):
        cfg = self.config
        rng = np.random.default_rng([cfg.seed, stage, step])
        trajs = [self._sample(start, rng) for _ in range(n)]
        jobs = []
        for k, traj in enumerate(trajs):
            jobs.append(ChildJob(
                start.spec, start.params, traj.actions, derive_seed(cfg.seed, stage, step, k, 1),
                cfg.train_config(cfg.finetune_epochs, derive_seed(cfg.seed, stage, step, k, 2)),
                cfg.calibration_size, traj.result))
        results = self.evaluator.run(jobs)
        clamped = []
        for traj, res in zip(trajs, results):
            if res.val_accuracy is None:
                traj.reward = None
                clamped.append(False)
            else:
                traj.reward, flag = reward_transform(res.val_accuracy, return_flag=True)
                clamped.append(flag)
        scored = [t for t in trajs if t.reward is not None]
        baseline_used = self.baseline.value if self.baseline.initialized else None
        if scored:
            if cfg.controller == "rl":
                upd = reinforce_update(scored, self.baseline, self.controller, self.adam)
                self.controller, self.adam, self.baseline = upd.params, upd.adam, upd.baseline
                baseline_used = upd.baseline_used
            else:
                mean_r = float(np.mean([t.reward for t in scored]))
                if baseline_used is None:
                    self.baseline = baseline_update(self.baseline, mean_r)
                    baseline_used = self.baseline.value
                else:
                    self.baseline = baseline_update(self.baseline, mean_r)
            self.step_rewards.append(float(np.mean([t.reward for t in scored])))
        else:
            log.warning("stage %d step %d: every child failed; controller not updated", stage, step)
            self.step_rewards.append(float("nan"))
        out = []
        for k, (traj, res, flag) in enumerate(zip(trajs, results, clamped)):
            rid = f"s{stage}-{step:04d}-{k:02d}"
            params_path = ""
            if res.params is not None and self.weights_dir is not None and cfg.save_weights:
                self.weights_dir.mkdir(parents=True, exist_ok=True)
                params_path = f"{rid}.easw"
                save_params(self.weights_dir / params_path, res.params)
            rec = ExperimentRecord(
                id=rid, stage=stage, step=step, parent_id=start.id,
                actions=[str(a) for a in traj.actions], architecture=serialize(traj.result),
                params_path=params_path, val_accuracy=res.val_accuracy, reward=traj.reward,
                baseline=baseline_used, finetune_epochs=cfg.finetune_epochs,
                wall_time=res.wall_time, status="ok" if res.val_accuracy is not None else "failed",
                pre_finetune_accuracy=res.pre_accuracy, n_params=count_params(traj.result),
                controller=cfg.controller, log_prob=traj.log_prob, reward_clamped=flag,
                error=res.error, extra={"parent_accuracy": start.accuracy})
            out.append((rec, traj.result, res.params))
            self.records.append(rec)
            if self.log_path is not None:
                append_record(self.log_path, rec)
        return out

    # stages ---------------------------------------------------------------

    def run_stage(self, stage: int, start: StageStart, budget: int):
        """Sample exactly ``budget`` children; returns the best ``(record, spec, params)``."""
        best = None
        step, sampled = 0, 0
        while sampled < budget:
            n = min(self.config.samples_per_step, budget - sampled)
            for rec, spec, params in self.search_step(stage, step, start, n):
                if rec.status == "ok" and (best is None or _better(rec, best[0])):
                    best = (rec, spec, params)
            sampled += n
            step += 1
        return best

    def run(self, start: StageStart) -> SearchResult:
        starts = [start]
        overall = None
        for stage, budget in enumerate(self.config.stage_budgets, start=1):
            best = self.run_stage(stage, starts[-1], budget)
            if best is None:
                log.warning("stage %d produced no successful child", stage)
                break
            rec, spec, params = best
            candidate = (rec.id, spec, params, rec.val_accuracy, rec.n_params)
            if overall is None or _better_tuple(candidate, overall):
                overall = candidate
            if stage < len(self.config.stage_budgets):
                params, acc = self.evaluator.long_train(spec, params,
                                                        derive_seed(self.config.seed, stage, 99))
                starts.append(StageStart(rec.id, spec, params, acc))
                candidate = (rec.id, spec, params, acc, rec.n_params)
                if _better_tuple(candidate, overall):
                    overall = candidate
        if overall is None:
            overall = (start.id, start.spec, start.params, start.accuracy, count_params(start.spec))
        return SearchResult(overall[0], overall[1], overall[2], overall[3], self.records,
                            starts, self.controller)


def _better(rec: ExperimentRecord, other: ExperimentRecord) -> bool:
    if rec.val_accuracy != other.val_accuracy:
        return rec.val_accuracy > other.val_accuracy
    return rec.n_params < other.n_params


def _better_tuple(a, b) -> bool:
    if a[3] != b[3]:
        return a[3] > b[3]
    return a[4] < b[4]


# ---------------------------------------------------------------------------
# entry points


def load_search_data(config: SearchConfig):
    """Load, normalize and split the configured dataset into ``(train, val)``."""
    data = parse_dataset_ref(config.dataset).astype(np.dtype(config.dtype))
    data, _ = normalize(data)
    n_val = config.val_size
    if n_val >= len(data):
        n_val = max(1, len(data) // 5)
        log.warning("val_size %d too large for %d images; using %d", config.val_size, len(data), n_val)
    return split_validation(data, n_val, config.seed)


def make_evaluator(config: SearchConfig, data=None, surrogate=None):
    if config.reward_mode == "surrogate":
        return SurrogateEvaluator(config, surrogate)
    train_set, val_set = data if data is not None else load_search_data(config)
    return RealEvaluator(config, train_set, val_set)


def prepare_start(config: SearchConfig, evaluator, spec: ArchitectureSpec | None = None,
                  params: NetworkParams | None = None) -> StageStart:
    """The stage-1 start point; trains freshly initialized weights in real mode."""
    if spec is None:
        if isinstance(evaluator, RealEvaluator):
            ds = evaluator.train_set
            spec = start_network(ds.class_count, ds.images.shape[1:])
        else:
            spec = start_network()
    if isinstance(evaluator, RealEvaluator):
        dtype = np.dtype(config.dtype)
        if params is None:
            params = init_params(spec, np.random.default_rng([config.seed, 3]), dtype)
            params, _ = train(spec, params, evaluator.train_set,
                              config.train_config(config.start_epochs, derive_seed(config.seed, 0, 3)),
                              track_train_acc=False)
        params = params.astype(dtype)
    else:
        params = None
    return StageStart("start", spec, params, evaluator.accuracy(spec, params))


def two_stage_search(config: SearchConfig, spec: ArchitectureSpec | None = None,
                     params: NetworkParams | None = None, data=None, log_path=None,
                     weights_dir=None, surrogate=None) -> SearchResult:
    """Run every configured stage from the given (or default) start network."""
    evaluator = make_evaluator(config, data, surrogate)
    try:
        start = prepare_start(config, evaluator, spec, params)
        return Search(config, evaluator, log_path, weights_dir).run(start)
    finally:
        evaluator.close()


def search_step(search: Search, start: StageStart, stage: int = 1, step: int = 0, n=None):
    """One sampling/scoring/update step; returns the step's records."""
    n = search.config.samples_per_step if n is None else n
    return [rec for rec, _, _ in search.search_step(stage, step, start, n)]


@dataclass
class Comparison:
    rl: list[float]
    random: list[float]

    def final_mean(self, which: str, samples: int, samples_per_step: int) -> float:
        series = getattr(self, which)
        k = max(1, math.ceil(samples / samples_per_step))
        return float(np.mean(series[-k:]))


def compare_rl_vs_random(config: SearchConfig, spec: ArchitectureSpec | None = None,
                         params: NetworkParams | None = None, data=None, surrogate=None,
                         log_dir=None) -> Comparison:
    """Run the RL controller and random search on the first stage's budget.

    Both runs share the environment seed and start point. Returns the mean
    reward per step for each.
    """
    series = {}
    evaluator = make_evaluator(config, data, surrogate)
    try:
        start = prepare_start(config, evaluator, spec, params)
        for mode in ("rl", "random"):
            cfg = SearchConfig.from_mapping({**config.to_mapping(), "controller": mode})
            log_path = None if log_dir is None else Path(log_dir) / f"{mode}.jsonl"
            search = Search(cfg, evaluator, log_path)
            search.run_stage(1, start, cfg.stage_budgets[0])
            series[mode] = search.step_rewards
    finally:
        evaluator.close()
    return Comparison(series["rl"], series["random"])
