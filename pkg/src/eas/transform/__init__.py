"""Function-preserving network transformations."""

from .actions import (Deepen, InvalidActionError, TransformAction, Widen, apply_to_spec,
                      format_action, parse_action, replay)
from .morph import (SaturatedError, apply_action, apply_actions, consumer_remaps, deepen,
                    deepen_dense, deepen_plain, widen, widen_dense, widen_plain)
from .remap import (RemapFunction, compensate_inputs, equivalent_remap, insertion_remap,
                    replicate_outputs, sample_remap)
from .verify import PreservationReport, verify_preservation

__all__ = [
    "Deepen", "InvalidActionError", "TransformAction", "Widen", "apply_to_spec",
    "format_action", "parse_action", "replay", "SaturatedError", "apply_action",
    "apply_actions", "consumer_remaps", "deepen", "deepen_dense", "deepen_plain", "widen",
    "widen_dense", "widen_plain", "RemapFunction", "compensate_inputs", "equivalent_remap",
    "insertion_remap", "replicate_outputs", "sample_remap", "PreservationReport",
    "verify_preservation",
]
