"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criterion 11 (a full-scale CIFAR-10 run) is marked ``extended`` and is
excluded from the default run; it also needs ``EAS_CIFAR_DIR``.
"""

from __future__ import annotations

import itertools
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from eas.arch import (ArchitectureSpec, conv, fc, pool, resolve_insertion, serialize, softmax,
                      start_network)
from eas.cli import main as eas_main
from eas.controller import (ControllerConfig, init_controller, reinforce_loss_and_grads,
                            reward_transform, rollout)
from eas.data import normalize, synthesize_dataset, split_validation
from eas.experiments import stable_lines
from eas.runtime import init_params, loss_and_grads
from eas.runtime import ops
from eas.runtime.training import TrainConfig, evaluate, train
from eas.runtime.weights import save_params
from eas.search import SearchConfig, compare_rl_vs_random, random_trajectory, two_stage_search
from eas.transform import (RemapFunction, apply_actions, compensate_inputs, deepen,
                           deepen_dense, equivalent_remap, replicate_outputs, verify_preservation,
                           widen, widen_dense)

from helpers import (activation_pattern, all_insertions, central_differences, random_dense_spec,
                     random_params, random_plain_spec, rel_error, smooth_central_differences,
                     widenable_layers)

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


TOLERANCES = ((np.float32, 1e-4), (np.float64, 1e-10))


def _cli_verify(tmp_path, tag, spec, params, new_spec, new_params, tol) -> int:
    old, new = tmp_path / f"{tag}-old", tmp_path / f"{tag}-new"
    for d, s, p in ((old, spec, params), (new, new_spec, new_params)):
        d.mkdir(exist_ok=True)
        (d / "net.arch").write_text(serialize(s))
        save_params(d / "weights.easw", p)
    return eas_main(["verify", "--old", str(old), "--new", str(new), "--tol", str(tol),
                     "--inputs", "16"])


def _preservation_protocol(tmp_path, gen, ops_for, n_cases, seed):
    worst = {}
    failures = []
    for case in range(n_cases):
        rng = np.random.default_rng([seed, case])
        spec = gen(rng)
        base = random_params(spec, rng)
        calib = rng.standard_normal((8, *spec.input_shape))
        for name, fn in ops_for(spec, rng, calib):
            for dtype, tol in TOLERANCES:
                params = base.astype(dtype)
                new_spec, new_params = fn(params)
                rep = verify_preservation(spec, params, new_spec, new_params, n_inputs=16,
                                          tolerance=tol, seed=case)
                key = (name, np.dtype(dtype).name)
                worst[key] = max(worst.get(key, 0.0), rep.max_abs_diff)
                if not rep.passed:
                    failures.append((case, key, rep.max_abs_diff))
                # the CLI path on a sample of cases
                if case % 10 == 0:
                    rc = _cli_verify(tmp_path, f"{case}-{name}-{key[1]}", spec, params,
                                     new_spec, new_params, tol)
                    if rc != 0:
                        failures.append((case, key, "cli"))
    return worst, failures


def _fmt(worst):
    return ", ".join(f"{k[0]}/{k[1]} {v:.1e}" for k, v in sorted(worst.items()))


def test_criterion_01_plain_preservation(tmp_path):
    def ops_for(spec, rng, calib):
        layer = int(rng.choice(widenable_layers(spec)))
        wseed = int(rng.integers(1 << 30))
        actions = all_insertions(spec)
        action = actions[int(rng.integers(len(actions)))]
        return [
            ("widen", lambda p: widen(spec, p, layer, rng=np.random.default_rng(wseed))),
            ("deepen", lambda p: deepen(spec, p, action, calibration=calib.astype(p.dtype))),
        ]

    t0 = time.perf_counter()
    worst, failures = _preservation_protocol(tmp_path, random_plain_spec, ops_for, 100, 101)
    elapsed = time.perf_counter() - t0
    record(1, not failures and elapsed <= 120,
           f"100 plain nets x {{widen, deepen}}, worst |dlogit| {_fmt(worst)}, {elapsed:.0f}s")


def test_criterion_02_dense_preservation(tmp_path):
    def ops_for(spec, rng, calib):
        layer = int(rng.choice(widenable_layers(spec)))
        wseed, dseed = (int(v) for v in rng.integers(1 << 30, size=2))
        actions = all_insertions(spec, dense=True)
        action = actions[int(rng.integers(len(actions)))]
        position = resolve_insertion(spec, action.block, action.index, action.filter_size).index
        return [
            ("widen_dense", lambda p: widen_dense(spec, p, layer,
                                                  rng=np.random.default_rng(wseed))),
            ("deepen_dense", lambda p: deepen_dense(spec, p, position, action.filter_size,
                                                    np.random.default_rng(dseed),
                                                    calibration=calib.astype(p.dtype))),
        ]

    t0 = time.perf_counter()
    worst, failures = _preservation_protocol(tmp_path, random_dense_spec, ops_for, 100, 202)
    elapsed = time.perf_counter() - t0
    record(2, not failures and elapsed <= 180,
           f"100 dense nets x {{widen_dense, deepen_dense}}, worst |dlogit| {_fmt(worst)}, "
           f"{elapsed:.0f}s")


def test_criterion_03_composition():
    worst = {}
    failures = []
    n_actions = []
    for case in range(50):
        rng = np.random.default_rng([303, case])
        spec = (random_plain_spec if case % 2 == 0 else random_dense_spec)(rng, image=8)
        base = random_params(spec, rng)
        traj = random_trajectory(spec, "deeper*5,wider*4", rng)
        assert sum(s.kind == "deeper" and not s.noop for s in traj.steps) == 5
        n_actions.append(len(traj.actions))
        calib = rng.standard_normal((8, *spec.input_shape))
        for dtype, tol in TOLERANCES:
            params = base.astype(dtype)
            new_spec, new_params = apply_actions(spec, params, traj.actions,
                                                 np.random.default_rng(case),
                                                 calibration=calib.astype(dtype))
            assert new_spec == traj.result
            rep = verify_preservation(spec, params, new_spec, new_params, tolerance=tol)
            key = np.dtype(dtype).name
            worst[key] = max(worst.get(key, 0.0), rep.max_abs_diff)
            if not rep.passed:
                failures.append((case, key, rep.max_abs_diff))
    record(3, not failures,
           f"50 chains of 5 deepen + 4 wider steps ({min(n_actions)}-{max(n_actions)} actions), "
           + ", ".join(f"{k} worst {v:.1e}" for k, v in worst.items()))


def test_criterion_04_exhaustive_compensation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    x = rng.standard_normal((4, 2, 3, 3))
    worst, count = 0.0, 0
    for f in range(1, 4):
        w1 = rng.standard_normal((1, 1, 2, f))
        b1 = rng.standard_normal(f)
        w2 = rng.standard_normal((1, 1, f, 3))
        b2 = rng.standard_normal(3)
        ref = ops.conv2d(np.maximum(ops.conv2d(x, w1, b1), 0), w2, b2)
        for f_hat in range(f, 6):
            for tail in itertools.product(range(f), repeat=f_hat - f):
                g = RemapFunction(f, tuple(range(f)) + tail)
                w1n, b1n = replicate_outputs(w1, g), replicate_outputs(b1, g)
                w2n = compensate_inputs(w2, g, axis=2)
                out = ops.conv2d(np.maximum(ops.conv2d(x, w1n, b1n), 0), w2n, b2)
                worst = max(worst, float(np.max(np.abs(out - ref))))
                count += 1
    elapsed = time.perf_counter() - t0
    record(4, worst <= 1e-12 and elapsed <= 10,
           f"{count} remaps (f<=3, f_hat<=5), worst |diff| {worst:.1e}, {elapsed:.2f}s")


def test_criterion_05_dense_remap_example():
    g = RemapFunction(2, (0, 1, 0, 0))  # G_l = [1, 2, 1, 1] in one-based form
    got = equivalent_remap(g, f_prefix=5, f_suffix_total=2).one_based()
    expected = [1, 2, 3, 4, 5, 6, 7, 6, 6, 8, 9]
    record(5, got == expected, f"{{1..11}} -> {got}")


def test_criterion_06_reward_transform():
    exact = reward_transform(0.0) == 0.0 and reward_transform(0.5) == 1.0
    rng = np.random.default_rng(606)
    pairs = rng.random((1000, 2)) * 0.999
    monotone = all((reward_transform(a) < reward_transform(b)) == (a < b)
                   for a, b in pairs if a != b)
    record(6, exact and monotone,
           f"r(0)={reward_transform(0.0)}, r(0.5)={reward_transform(0.5)}, "
           f"monotone over 1000 pairs: {monotone}")


def _runtime_instance(rng):
    """A tiny random network (widths outside the search table are fine for the runtime)."""
    dense = rng.random() < 0.4
    hw = int(rng.choice([4, 5]))

    def bn():
        return bool(rng.random() < 0.5)
    layers = [conv(int(rng.integers(2, 4)), int(rng.choice([1, 3])), batchnorm=bn(),
                   dropout=float(rng.choice([0.0, 0.3]))),
              conv(int(rng.integers(2, 4)), int(rng.choice([1, 3, 5])), batchnorm=bn()),
              conv(int(rng.integers(2, 4)), 3, batchnorm=bn(), activation=str(rng.choice(["relu", "none"])))]
    layers.append(pool(2, 2 if rng.random() < 0.7 else 1, str(rng.choice(["max", "avg"]))))
    if rng.random() < 0.5:
        layers.append(fc(int(rng.integers(2, 5)), batchnorm=bn(), dropout=float(rng.choice([0.0, 0.3]))))
    layers.append(softmax(3))
    spec = ArchitectureSpec(tuple(layers), input_shape=(2, hw, hw),
                            connectivity="dense" if dense else "plain",
                            dense_blocks=((0, 2),) if dense else ())
    params = random_params(spec, rng)
    x = rng.standard_normal((3, 2, hw, hw))
    y = rng.integers(0, 3, size=3)
    return spec, params, x, y


def _runtime_gradcheck(seed):
    """Worst relative error over smooth coordinates, and the kink-straddling count."""
    rng = np.random.default_rng([707, seed])
    spec, params, x, y = _runtime_instance(rng)
    wd = float(rng.choice([0.0, 1e-2]))
    _, grads = loss_and_grads(spec, params, x, y, weight_decay=wd, seed=seed)

    def f():
        return loss_and_grads(spec, params, x, y, weight_decay=wd, seed=seed)[0]

    def pattern():
        return activation_pattern(spec, params, x, seed)

    worst, kinks, total = 0.0, 0, 0
    for (_, _, arr), (_, _, g) in zip(params.trainable(), grads.trainable()):
        num, smooth = smooth_central_differences(f, pattern, arr, 1e-4)
        err = rel_error(g.ravel(), num)[smooth]
        worst = max(worst, float(err.max(initial=0.0)))
        kinks += int((~smooth).sum())
        total += smooth.size
    return worst, kinks, total


def _controller_gradcheck(seed):
    rng = np.random.default_rng([708, seed])
    cfg = ControllerConfig(embed_dim=1, hidden=2, max_blocks=6, max_positions=8, init_scale=0.8)
    params = init_controller(cfg, rng)
    spec = start_network() if seed % 2 == 0 else random_plain_spec(rng)
    schedule = [str(s) for s in rng.choice(["wider", "deeper"], size=int(rng.integers(1, 4)))]
    trajs = [rollout(spec, params, schedule, rng) for _ in range(int(rng.integers(1, 4)))]
    for t in trajs:
        t.reward = float(rng.normal())
    b = float(rng.normal())
    _, grads = reinforce_loss_and_grads(trajs, b, params)
    vec = params.flat()

    def f():
        return reinforce_loss_and_grads(trajs, b, params.with_flat(vec))[0]
    num = central_differences(f, vec, 1e-4)
    return float(rel_error(grads.flat(), num).max()), params.n_params


def test_criterion_07_gradients():
    t0 = time.perf_counter()
    runtime = [_runtime_gradcheck(s) for s in range(50)]
    controller = [_controller_gradcheck(s) for s in range(50)]
    elapsed = time.perf_counter() - t0
    r_worst = max(w for w, _, _ in runtime)
    kinks = sum(k for _, k, _ in runtime)
    coords = sum(n for _, _, n in runtime)
    c_worst = max(c for c, _ in controller)
    n_max = max(n for _, n in controller)
    # a handful of kink-straddling coordinates is expected; many would hide a bug
    record(7, r_worst <= 1e-3 and kinks <= 0.01 * coords and c_worst <= 1e-3 and n_max <= 500
           and elapsed <= 300,
           f"runtime 50 nets max rel err {r_worst:.1e} ({kinks}/{coords} coordinates skipped "
           f"as straddling a ReLU/max-pool kink); controller 50 cases (<= {n_max} params) "
           f"max rel err {c_worst:.1e}; {elapsed:.0f}s")


def test_criterion_08_weight_reuse():
    t0 = time.perf_counter()
    parent = ArchitectureSpec((conv(16), pool(2, 2), conv(32), pool(2, 2), conv(32),
                               pool(3, 3, "avg"), fc(64), softmax(10)), input_shape=(3, 12, 12))
    wins, rows = 0, []
    for seed in range(10):
        data, _ = normalize(synthesize_dataset(10, 1200, 12, seed))
        train_set, val_set = split_validation(data, 300, seed)
        parent_params, _ = train(parent, init_params(parent, np.random.default_rng([seed, 1])),
                                 train_set, TrainConfig(epochs=15, seed=seed), track_train_acc=False)
        spec, params = parent, parent_params
        rng = np.random.default_rng([seed, 2])
        for layer in (0, 2, 4, 6):
            spec, params = widen(spec, params, layer, rng=rng)
        budget = TrainConfig(epochs=5, seed=seed)
        reused, _ = train(spec, params, train_set, budget, track_train_acc=False)
        scratch, _ = train(spec, init_params(spec, np.random.default_rng([seed, 3])), train_set,
                           budget, track_train_acc=False)
        a, b = evaluate(spec, reused, val_set), evaluate(spec, scratch, val_set)
        wins += a >= b
        rows.append(f"{a:.3f}/{b:.3f}")
    elapsed = time.perf_counter() - t0
    record(8, wins >= 8 and elapsed <= 1200,
           f"reused >= scratch in {wins}/10 seeds (reused/scratch: {' '.join(rows)}), {elapsed:.0f}s")


def test_criterion_09_prefinetune_accuracy():
    parent = ArchitectureSpec((conv(16), pool(2, 2), conv(32), pool(2, 2), conv(32),
                               pool(3, 3, "avg"), fc(64), softmax(10)), input_shape=(3, 12, 12))
    config = SearchConfig(reward_mode="real", stage_budgets=(30, 20), samples_per_step=10,
                          finetune_epochs=1, long_train_epochs=2, start_epochs=5,
                          dataset="synthetic:classes=10,n=800,size=12,seed=9", val_size=200,
                          seed=9)
    result = two_stage_search(config, spec=parent)
    recs = result.records
    gaps = [abs(r.pre_finetune_accuracy - r.extra["parent_accuracy"]) for r in recs
            if r.status == "ok"]
    ok = len(recs) == 50 and len(gaps) == 50 and max(gaps) <= 0.001
    record(9, ok, f"{len(gaps)}/{len(recs)} children scored, max |pre-finetune - parent| "
                  f"{max(gaps) * 100:.3f} pp")


def test_criterion_10_rl_beats_random():
    t0 = time.perf_counter()
    wins, rows = 0, []
    for seed in range(5):
        config = SearchConfig(reward_mode="surrogate", surrogate="depth", stage_budgets=(300,),
                              finetune_epochs=0, seed=seed)
        comp = compare_rl_vs_random(config)
        assert len(comp.rl) == len(comp.random) == 30
        rl = comp.final_mean("rl", 50, config.samples_per_step)
        rnd = comp.final_mean("random", 50, config.samples_per_step)
        wins += rl > rnd
        rows.append(f"{rl:.3f}/{rnd:.3f}")
    elapsed = time.perf_counter() - t0
    record(10, wins >= 4 and elapsed <= 7200,
           f"RL > random on final 50 samples in {wins}/5 seeds (rl/random: {' '.join(rows)}), "
           f"{elapsed:.0f}s")


@pytest.mark.extended
def test_criterion_11_start_point_cifar():
    root = os.environ.get("EAS_CIFAR_DIR")
    if not root:
        pytest.skip("set EAS_CIFAR_DIR to the CIFAR-10 binary directory")
    from eas.data import load_cifar_binary
    data, _ = normalize(load_cifar_binary(root))
    train_set, val_set = split_validation(data, 5000, 0)
    spec = start_network()
    params, _ = train(spec, init_params(spec, np.random.default_rng(0)), train_set,
                      TrainConfig(epochs=100, augment=True), track_train_acc=False)
    acc = evaluate(spec, params, val_set)
    record(11, 0.84 <= acc <= 0.90, f"start network validation accuracy {acc:.4f}")


def test_criterion_12_determinism(tmp_path):
    cfg = tmp_path / "search.yaml"
    cfg.write_text("reward_mode: surrogate\nstage_budgets: [30, 20]\nfinetune_epochs: 0\n"
                   "samples_per_step: 10\n")
    logs = []
    for run in ("a", "b"):
        out = tmp_path / run
        proc = subprocess.run([sys.executable, "-m", "eas.cli", "search", "--config", str(cfg),
                               "--out", str(out), "--seed", "12"],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        logs.append(stable_lines(out / "log.jsonl"))
    same = logs[0] == logs[1] and len(logs[0]) == 50
    record(12, same, f"two seeded surrogate searches: {len(logs[0])} records each, "
                     f"identical without wall_time: {same}")
