"""Experiment records: the append-only JSONL log and the per-step report."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .controller.reinforce import tan_half_pi

log = logging.getLogger(__name__)

VOLATILE_FIELDS = ("wall_time", "timestamp")
CSV_COLUMNS = ("stage", "step", "n_sampled", "mean_acc", "max_acc", "best_so_far", "failures",
               "mean_params")


@dataclass
class ExperimentRecord:
    id: str
    stage: int
    step: int
    parent_id: str
    actions: list[str]
    architecture: str  # eas-arch v1 document
    params_path: str = ""
    val_accuracy: float | None = None
    reward: float | None = None
    baseline: float | None = None
    finetune_epochs: int = 0
    wall_time: float = 0.0
    status: str = "ok"
    pre_finetune_accuracy: float | None = None
    n_params: int = 0
    controller: str = "rl"
    log_prob: float = 0.0
    reward_clamped: bool = False
    error: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ValueError(f"status must be 'ok' or 'failed', got {self.status!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentRecord":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def check_reward(self, tol: float = 1e-9) -> bool:
        """Whether ``reward`` equals the transformed accuracy (always true for failures)."""
        if self.status != "ok":
            return True
        acc = min(self.val_accuracy, 1.0 - 1e-6)
        return abs(self.reward - tan_half_pi(acc)) <= tol * max(1.0, abs(self.reward))


def append_record(path, record) -> None:
    """Append one JSON line and flush it to disk."""
    data = record.to_dict() if isinstance(record, ExperimentRecord) else dict(record)
    line = json.dumps(data, sort_keys=True, allow_nan=False) + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()
        os.fsync(fh.fileno())


def read_records(path, raw: bool = False) -> list:
    """Read every complete record; a malformed final line is skipped with a warning."""
    path = Path(path)
    if not path.exists():
        return []
    lines = path.read_text(encoding="utf-8").splitlines()
    out = []
    for n, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError:
            if n == len(lines) - 1:
                log.warning("skipping truncated final line %d of %s", n + 1, path)
                break
            raise ValueError(f"{path}:{n + 1}: malformed record")
        out.append(data if raw else ExperimentRecord.from_dict(data))
    return out


def stable_lines(path) -> list[str]:
    """Log lines with volatile fields removed, for run-to-run comparison."""
    out = []
    for data in read_records(path, raw=True):
        for key in VOLATILE_FIELDS:
            data.pop(key, None)
        out.append(json.dumps(data, sort_keys=True))
    return out


def report_rows(records) -> list[dict]:
    """One row per (stage, step), in log order.

    Means exclude failed records, which are counted in ``failures``;
    ``best_so_far`` runs over the whole stage.
    """
    groups: dict[tuple[int, int], list] = {}
    for r in records:
        groups.setdefault((r.stage, r.step), []).append(r)
    rows, best = [], {}
    for (stage, step), recs in groups.items():
        ok = [r for r in recs if r.status == "ok" and r.val_accuracy is not None]
        accs = [r.val_accuracy for r in ok]
        if accs:
            best[stage] = max(best.get(stage, -math.inf), max(accs))
        rows.append({
            "stage": stage,
            "step": step,
            "n_sampled": len(recs),
            "mean_acc": sum(accs) / len(accs) if accs else None,
            "max_acc": max(accs) if accs else None,
            "best_so_far": best.get(stage),
            "failures": len(recs) - len(ok),
            "mean_params": sum(r.n_params for r in ok) / len(ok) if ok else None,
        })
    return rows


def write_csv(rows, out) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if row[k] is None else row[k] for k in CSV_COLUMNS})
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text


def summary_table(rows) -> str:
    """Per-stage text summary."""
    lines = []
    for stage in sorted({r["stage"] for r in rows}):
        stage_rows = [r for r in rows if r["stage"] == stage]
        n = sum(r["n_sampled"] for r in stage_rows)
        fails = sum(r["failures"] for r in stage_rows)
        best = stage_rows[-1]["best_so_far"]
        best_text = "n/a" if best is None else f"{best:.4f}"
        lines.append(f"stage {stage}: {len(stage_rows)} steps, {n} networks, "
                     f"{fails} failed, best val acc {best_text}")
    return "\n".join(lines) if lines else "empty log"


def report(log_path, csv_path=None) -> tuple[str, str]:
    """Summary text and CSV text for a log; an empty log gives only the header."""
    rows = report_rows(read_records(log_path))
    return summary_table(rows), write_csv(rows, csv_path)
