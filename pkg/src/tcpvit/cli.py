"""``tcpvit`` command line: selfcheck, gradcheck, params, flops, train, eval."""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from . import checkpoint
from .analysis import compare_params, emit_report, flops_model
from .config import DATASETS, PRESETS, RunConfig, get_preset
from .errors import TCPViTError
from .grad import gradcheck
from .model import init_params
from .selfcheck import faulty_plan, run_checks
from .train import EpochMetrics, evaluate, load_datasets, metrics_csv, single_threaded, train

GRADCHECK_TOL = 1e-6

DEFAULT_PRESET = {
    "selfcheck": "synthetic",
    "gradcheck": "gradcheck",
    "params": "cls-paper",
    "flops": "cls-paper",
    "train": "synthetic",
    "eval": "synthetic",
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Preset, then config file, then individual flags; later wins."""
    base = get_preset(args.preset or DEFAULT_PRESET[args.command])
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise TCPViTError(f"cannot read config {path}: {exc.strerror}") from None
        merged = {**_as_dict(base), **_json_dict(text)}
        base = RunConfig.from_dict(merged)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.deterministic:
        changes["deterministic"] = True
    if args.dataset:
        changes["dataset"] = args.dataset
    if args.data_dir:
        changes["dataset_path"] = args.data_dir
    if args.limit is not None:
        changes["train_limit"] = args.limit
        changes["test_limit"] = min(base.test_limit, args.limit)
    if getattr(args, "epochs", None) is not None:
        changes["epochs"] = args.epochs
    if getattr(args, "variant", None):
        changes["variant"] = args.variant
    return RunConfig.from_dict({**_as_dict(base), **changes}) if changes else base


def _as_dict(run: RunConfig) -> dict:
    import dataclasses

    return dataclasses.asdict(run)


def _json_dict(text: str) -> dict:
    import json

    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TCPViTError(f"invalid JSON config: {exc}") from None
    if not isinstance(data, dict):
        raise TCPViTError("config must be a flat JSON object")
    return data


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- commands ------------------------------------------------------------


def cmd_selfcheck(args) -> int:
    results = run_checks(faulty_plan if args.inject_fault else _default_plan(), seed=args.seed or 0)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def _default_plan():
    from .transform import get_plan

    return get_plan


def _group(name: str) -> str:
    return re.sub(r"\.(wq|wk|wv)\.\d+\.", r".\1.", name)


def cmd_gradcheck(args) -> int:
    run = resolve_config(args)
    seeds = args.seeds if args.seeds else [run.seed]
    worst = 0.0
    for seed in seeds:
        report = gradcheck(run.model, seed)
        groups: dict[str, float] = {}
        for name, (rel, _) in report.items():
            g = _group(name)
            groups[g] = max(groups.get(g, 0.0), rel)
        print(f"seed {seed}")
        for g, rel in groups.items():
            print(f"  {'FAIL' if rel > GRADCHECK_TOL else 'ok  '}  {g:<28} {rel:.3e}")
        worst = max(worst, max(groups.values()))
    ok = worst <= GRADCHECK_TOL
    print(f"max relative error {worst:.3e} ({'PASS' if ok else 'FAIL'}, tol {GRADCHECK_TOL:.0e})")
    return 0 if ok else 1


def cmd_params(args) -> int:
    run = resolve_config(args)
    _emit(emit_report(compare_params(run.model), args.format), args.out)
    return 0


def cmd_flops(args) -> int:
    run = resolve_config(args)
    _emit(emit_report(flops_model(run.model, args.tokens), args.format), args.out)
    return 0


def cmd_train(args) -> int:
    run = resolve_config(args)
    train_set, test_set = load_datasets(run)
    print(metrics_csv([]), end="", flush=True)

    def on_epoch(row: EpochMetrics) -> None:
        print(row.csv(), flush=True)

    params, log = train(run, train_set, test_set, on_epoch=on_epoch)
    if args.metrics:
        Path(args.metrics).write_text(metrics_csv(log))
    if args.out:
        checkpoint.save(args.out, params.named_arrays())
    return 0


def cmd_eval(args) -> int:
    run = resolve_config(args)
    if not args.checkpoint:
        raise TCPViTError("eval needs --checkpoint FILE")
    params = init_params(run.model)
    params.load_arrays(checkpoint.load(args.checkpoint))
    _, test_set = load_datasets(run)
    ctx = single_threaded() if run.deterministic else _null()
    with ctx:
        loss, acc = evaluate(params, run, test_set)
    _emit(f"split,loss,accuracy\ntest,{loss:.10f},{acc:.6f}\n", args.out)
    return 0


def _null():
    import contextlib

    return contextlib.nullcontext()


COMMANDS = {
    "selfcheck": cmd_selfcheck,
    "gradcheck": cmd_gradcheck,
    "params": cmd_params,
    "flops": cmd_flops,
    "train": cmd_train,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="flat JSON RunConfig (overrides the preset)")
    common.add_argument("--preset", metavar="NAME", choices=sorted(PRESETS), help="named configuration")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--deterministic", action="store_true", help="single-threaded BLAS, fixed reductions")
    common.add_argument("--out", metavar="FILE", help="output file (checkpoint for train, report otherwise)")
    common.add_argument("--format", choices=("table", "csv", "json"), default="table")
    common.add_argument("--dataset", choices=DATASETS)
    common.add_argument("--data-dir", metavar="PATH", help="CIFAR-10 directory or file (else $TCPVIT_DATA_DIR)")
    common.add_argument("--limit", type=int, metavar="N", help="cap on training (and test) samples")
    common.add_argument("--variant", choices=("tcp", "std"))

    parser = argparse.ArgumentParser(prog="tcpvit", description="Cosine-product tensor ViT toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("selfcheck", parents=[common], help="run the algebra invariant suite")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p = sub.add_parser("gradcheck", parents=[common], help="analytic vs finite-difference gradients")
    p.add_argument("--seeds", type=int, nargs="+", metavar="N")
    sub.add_parser("params", parents=[common], help="parameter breakdown, tensor vs flattened")
    p = sub.add_parser("flops", parents=[common], help="per-layer FLOPs model")
    p.add_argument("--tokens", type=int, metavar="N", help="sequence length (default N+1)")
    p = sub.add_parser("train", parents=[common], help="train and print the metrics CSV")
    p.add_argument("--epochs", type=int, metavar="N")
    p.add_argument("--metrics", metavar="FILE", help="also write the metrics CSV here")
    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on the test split")
    p.add_argument("--checkpoint", metavar="FILE")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except TCPViTError as exc:
        print(f"tcpvit {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
