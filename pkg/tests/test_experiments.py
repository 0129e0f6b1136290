import json

import pytest

from eas.experiments import (CSV_COLUMNS, ExperimentRecord, append_record, read_records, report,
                             report_rows, stable_lines)


def _rec(i, acc=0.5, stage=1, step=0, status="ok"):
    reward = None if status == "failed" else acc / (1 - acc)
    return ExperimentRecord(id=f"n{i}", stage=stage, step=step, parent_id="start",
                            actions=["widen layer=0"], architecture="eas-arch v1\n",
                            val_accuracy=None if status == "failed" else acc, reward=reward,
                            n_params=100 * (i + 1), status=status, wall_time=float(i))


def test_append_then_read_identical(tmp_path):
    path = tmp_path / "log.jsonl"
    rec = _rec(0, 0.625)
    rec.extra = {"parent_accuracy": 0.5}
    append_record(path, rec)
    assert read_records(path) == [rec]


def test_truncated_final_line_recovered(tmp_path):
    path = tmp_path / "log.jsonl"
    for i in range(3):
        append_record(path, _rec(i))
    with open(path, "a", encoding="utf-8") as fh:
        fh.write('{"id": "n3", "stage": 1, "st')
    assert [r.id for r in read_records(path)] == ["n0", "n1", "n2"]


def test_malformed_middle_line_raises(tmp_path):
    path = tmp_path / "log.jsonl"
    append_record(path, _rec(0))
    with open(path, "a", encoding="utf-8") as fh:
        fh.write("not json\n")
    append_record(path, _rec(1))
    with pytest.raises(ValueError, match=":2:"):
        read_records(path)


def test_many_appends(tmp_path):
    path = tmp_path / "log.jsonl"
    for i in range(10_000):
        append_record(path, {"id": i})
    assert len(path.read_text().splitlines()) == 10_000


def test_stable_lines_drop_wall_time(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    append_record(a, _rec(0))
    other = _rec(0)
    other.wall_time = 99.0
    append_record(b, other)
    assert stable_lines(a) == stable_lines(b)
    assert "wall_time" not in json.loads(stable_lines(a)[0])


def test_best_so_far():
    records = [_rec(i, acc, step=i) for i, acc in enumerate((0.5, 0.6, 0.7))]
    rows = report_rows(records)
    assert [r["best_so_far"] for r in rows] == [0.5, 0.6, 0.7]
    assert [r["n_sampled"] for r in rows] == [1, 1, 1]


def test_best_so_far_holds_after_worse_step():
    records = [_rec(0, 0.7, step=0), _rec(1, 0.4, step=1)]
    assert [r["best_so_far"] for r in report_rows(records)] == [0.7, 0.7]


def test_stages_grouped_separately():
    records = [_rec(0, 0.8, stage=1, step=0), _rec(1, 0.3, stage=2, step=0),
               _rec(2, 0.4, stage=2, step=0)]
    rows = report_rows(records)
    assert [(r["stage"], r["step"], r["n_sampled"]) for r in rows] == [(1, 0, 1), (2, 0, 2)]
    assert rows[1]["best_so_far"] == 0.4
    assert rows[1]["mean_acc"] == pytest.approx(0.35)


def test_failures_excluded_from_means_but_counted():
    records = [_rec(0, 0.6), _rec(1, status="failed"), _rec(2, 0.8)]
    (row,) = report_rows(records)
    assert row["failures"] == 1 and row["n_sampled"] == 3
    assert row["mean_acc"] == pytest.approx(0.7)
    assert row["mean_params"] == pytest.approx(200.0)
    all_failed = report_rows([_rec(0, status="failed")])[0]
    assert all_failed["mean_acc"] is None and all_failed["best_so_far"] is None


def test_empty_log_gives_header(tmp_path):
    summary, text = report(tmp_path / "missing.jsonl", tmp_path / "out.csv")
    assert summary == "empty log"
    assert text == ",".join(CSV_COLUMNS) + "\n"
    assert (tmp_path / "out.csv").read_text() == text


def test_check_reward():
    rec = _rec(0, 0.5)
    rec.reward = 1.0
    assert rec.check_reward()
    rec.reward = 1.1
    assert not rec.check_reward()
    assert _rec(1, status="failed").check_reward()
    with pytest.raises(ValueError):
        _rec(2, status="pending")
