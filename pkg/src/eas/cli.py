"""The ``eas`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .arch import ArchitectureSpec, deserialize, serialize
from .config import dump_config, load_config
from .data import normalize, parse_dataset_ref, split_validation
from .experiments import report
from .runtime import NetworkParams, init_params
from .runtime.training import TrainConfig, evaluate, train
from .runtime.weights import load_params, save_params
from .search import (Search, compare_rl_vs_random, make_evaluator, prepare_start,
                     two_stage_search)
from .transform import apply_action, parse_action, verify_preservation

log = logging.getLogger("eas")

ARCH_FILE = "net.arch"
WEIGHTS_FILE = "weights.easw"


def _read_net(path) -> ArchitectureSpec:
    path = Path(path)
    if path.is_dir():
        path = path / ARCH_FILE
    return deserialize(path.read_text(encoding="utf-8"))


def _read_weights(path, spec: ArchitectureSpec) -> NetworkParams:
    path = Path(path)
    if path.is_dir():
        path = path / WEIGHTS_FILE
    return load_params(path, len(spec.layers))


def _write_net(out, spec: ArchitectureSpec, params: NetworkParams | None) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / ARCH_FILE).write_text(serialize(spec), encoding="utf-8")
    if params is not None:
        save_params(out / WEIGHTS_FILE, params)


def cmd_search(args) -> int:
    config, start = load_config(args.config, {"seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "log.jsonl"
    if log_path.exists():
        log.error("%s already exists; refusing to append to an old search", log_path)
        return 2
    dump_config(config, out / "config.yaml", start)
    spec = _read_net(start["start_arch"]) if start["start_arch"] else None
    params = (_read_weights(start["start_weights"], spec)
              if spec is not None and start["start_weights"] else None)
    result = two_stage_search(config, spec, params, log_path=log_path,
                              weights_dir=out / "weights")
    _write_net(out / "best", result.best_spec, result.best_params)
    print(json.dumps({"best_id": result.best_id, "best_accuracy": result.best_accuracy,
                      "records": len(result.records)}))
    return 0


def cmd_transform(args) -> int:
    spec = _read_net(args.net)
    params = _read_weights(args.weights, spec)
    calibration = None
    if args.data:
        data = parse_dataset_ref(args.data)
        calibration = data.images[:args.calibration_size].astype(params.dtype)
    new_spec, new_params = apply_action(spec, params, parse_action(args.action),
                                        np.random.default_rng(args.seed), calibration=calibration)
    _write_net(args.out, new_spec, new_params)
    print(serialize(new_spec), end="")
    return 0


def cmd_verify(args) -> int:
    old_spec, new_spec = _read_net(args.old), _read_net(args.new)
    rep = verify_preservation(old_spec, _read_weights(args.old, old_spec),
                              new_spec, _read_weights(args.new, new_spec),
                              n_inputs=args.inputs, tolerance=args.tol, seed=args.seed)
    print(f"max_abs_diff={rep.max_abs_diff:.3e} tolerance={rep.tolerance:.1e} "
          f"inputs={rep.n_inputs} {'PASS' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else 1


def cmd_train(args) -> int:
    spec = _read_net(args.net)
    dtype = np.dtype(args.dtype)
    if args.weights:
        params = _read_weights(args.weights, spec).astype(dtype)
    else:
        params = init_params(spec, np.random.default_rng([args.seed, 3]), dtype)
    data, _ = normalize(parse_dataset_ref(args.data).astype(dtype))
    train_set, val_set = split_validation(data, min(args.val_size, len(data) // 5), args.seed)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr0=args.lr,
                         momentum=args.momentum, weight_decay=args.weight_decay,
                         seed=args.seed, augment=args.augment)
    params, curve = train(spec, params, train_set, config, val=val_set)
    for entry in curve:
        print(json.dumps(entry))
    print(json.dumps({"val_accuracy": evaluate(spec, params, val_set)}))
    if args.out:
        _write_net(args.out, spec, params)
    return 0


def cmd_compare(args) -> int:
    config, start = load_config(args.config, {"seed": args.seed})
    spec = _read_net(start["start_arch"]) if start["start_arch"] else None
    params = (_read_weights(start["start_weights"], spec)
              if spec is not None and start["start_weights"] else None)
    if args.mode == "both":
        comp = compare_rl_vs_random(config, spec, params)
        series = {"rl": comp.rl, "random": comp.random}
    else:
        config = type(config).from_mapping({**config.to_mapping(), "controller": args.mode})
        evaluator = make_evaluator(config)
        try:
            search = Search(config, evaluator)
            search.run_stage(1, prepare_start(config, evaluator, spec, params),
                             config.stage_budgets[0])
        finally:
            evaluator.close()
        series = {args.mode: search.step_rewards}
    lines = ["step," + ",".join(series)]
    for step, values in enumerate(zip(*series.values())):
        lines.append(f"{step}," + ",".join(f"{v:.6f}" for v in values))
    text = "\n".join(lines) + "\n"
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_report(args) -> int:
    summary, csv_text = report(args.log, args.csv)
    print(summary)
    if args.csv is None:
        print(csv_text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eas", description="Architecture search by "
                                     "function-preserving network transformations.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run the two-stage search")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("transform", help="apply one action to a network")
    p.add_argument("--net", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--action", required=True, help='e.g. "widen layer=0" or '
                   '"deepen block=1 index=0 k=3"')
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", default=None, help="images used to calibrate inserted batch norm")
    p.add_argument("--calibration-size", type=int, default=256)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("verify", help="check that two networks compute the same function")
    p.add_argument("--old", required=True)
    p.add_argument("--new", required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--inputs", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train", help="train a network")
    p.add_argument("--net", required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--data", required=True, help="CIFAR-10 path or synthetic:...")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--val-size", type=int, default=5000)
    p.add_argument("--augment", action="store_true")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="RL controller versus random search")
    p.add_argument("--mode", choices=("rl", "random", "both"), default="both")
    p.add_argument("--config", required=True)
    p.add_argument("--csv", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="summarize a search log")
    p.add_argument("--log", required=True)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
