"""Command-line surface: train runs, kappa sweeps, curve export, self-check.

Exit codes: 0 success, 1 runtime or verification failure, 2 bad usage or
unparseable/invalid config. Every artifact lands under the configured
output directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import continual, data, selfcheck, similarity
from . import buffer as replay
from . import encoder as enc
from .config import ConfigError, ExperimentConfig


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _build_stream(cfg: ExperimentConfig) -> data.TaskStream:
    if cfg.data.kind == "synthetic":
        return data.synthetic_stream(
            seed=cfg.data.seed,
            n_classes=cfg.data.n_classes,
            dim=cfg.data.dim,
            per_class=cfg.data.per_class,
            spread=cfg.data.spread,
        )
    return data.load_cifar10_binary(data.resolve_data_dir(cfg.data.path))


def _write_run_outputs(out_dir: Path, cfg: ExperimentConfig, state, metrics) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.json").write_text(
        json.dumps(metrics.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )

    kind = cfg.run.loss.kind
    header = (
        "similarity,kappa,temperature,buffer_capacity,n_seeds,"
        "class_il_mean,class_il_std,task_il_mean,task_il_std"
    )
    row = ",".join(
        [
            kind.kind,
            _fmt(kind.kappa),
            _fmt(cfg.run.loss.temperature),
            str(cfg.run.buffer_capacity),
            str(len(cfg.run.seeds)),
            _fmt(metrics.class_il_mean),
            _fmt(metrics.class_il_std),
            _fmt(metrics.task_il_mean),
            _fmt(metrics.task_il_std),
        ]
    )
    (out_dir / "metrics.csv").write_text(header + "\n" + row + "\n")

    for result in metrics.per_seed:
        lines = ["task,epoch,loss"]
        lines += [f"{t},{e},{_fmt(v)}" for t, e, v in result.loss_log]
        (out_dir / f"loss_seed{result.seed}.csv").write_text("\n".join(lines) + "\n")

    enc.save(state.net, out_dir / "checkpoint.ckpt")
    replay.save(state.buffer, out_dir / "buffer.ckpt")


def _override_seeds(cfg: ExperimentConfig, text: str | None) -> None:
    if text is None:
        return
    seeds = _parse_int_list(text, "--seeds")
    if not seeds:
        raise ConfigError("--seeds produced an empty seed list")
    cfg.run.seeds = seeds


def cmd_train(args) -> int:
    cfg = config_mod.parse_file(args.config)
    _override_seeds(cfg, args.seeds)
    out_dir = Path(args.out or cfg.out_dir)
    stream = _build_stream(cfg)
    state, metrics = continual.run_experiment(stream, cfg.run)
    _write_run_outputs(out_dir, cfg, state, metrics)
    print(
        f"class-IL {metrics.class_il_mean:.4f} +/- {metrics.class_il_std:.4f}  "
        f"task-IL {metrics.task_il_mean:.4f} +/- {metrics.task_il_std:.4f}  "
        f"({len(cfg.run.seeds)} seed(s)) -> {out_dir}"
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = config_mod.parse_file(args.config)
    kappas = _parse_float_list(args.kappa, "--kappa")
    if not kappas:
        raise ConfigError("empty kappa list")
    if any(k < 0 for k in kappas):
        raise ConfigError("kappa values must be >= 0")
    _override_seeds(cfg, args.seeds)
    out_dir = Path(args.out or cfg.out_dir)
    stream = _build_stream(cfg)

    rows = []
    for kappa in kappas:
        run_cfg = replace(
            cfg.run,
            loss=replace(cfg.run.loss, kind=similarity.SimilarityKind.tvmf(kappa)),
        )
        sub_cfg = ExperimentConfig(data=cfg.data, run=run_cfg, out_dir=cfg.out_dir)
        state, metrics = continual.run_experiment(stream, run_cfg)
        sub_dir = out_dir / f"kappa_{kappa:g}"
        _write_run_outputs(sub_dir, sub_cfg, state, metrics)
        rows.append(
            ",".join(
                [
                    _fmt(kappa),
                    _fmt(metrics.class_il_mean),
                    _fmt(metrics.class_il_std),
                    _fmt(metrics.task_il_mean),
                    _fmt(metrics.task_il_std),
                ]
            )
        )
        print(f"kappa {kappa:g}: class-IL {metrics.class_il_mean:.4f} task-IL {metrics.task_il_mean:.4f}")

    header = "kappa,class_il_mean,class_il_std,task_il_mean,task_il_std"
    (out_dir / "sweep.csv").write_text(header + "\n" + "\n".join(rows) + "\n")
    return 0


def cmd_curve(args) -> int:
    if args.grid < 2:
        raise ConfigError(f"grid size must be >= 2, got {args.grid}")
    try:
        if args.kind == "cosine":
            kind = similarity.SimilarityKind.cosine()
        elif args.kind == "vmf":
            kind = similarity.SimilarityKind.vmf(args.kappa)
        else:
            kind = similarity.SimilarityKind.tvmf(args.kappa)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    grid = np.linspace(-1.0, 1.0, args.grid)
    rows = similarity.similarity_curve(kind, grid)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["cos,value"] + [f"{_fmt(c)},{_fmt(v)}" for c, v in rows]
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_check(args) -> int:
    report = selfcheck.run_all()
    print(json.dumps(report, indent=2, sort_keys=True))
    if report["all_passed"]:
        return 0
    failed = [name for name, r in report["checks"].items() if not r["passed"]]
    print(f"FAILED: {', '.join(sorted(failed))}", file=sys.stderr)
    return 1


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as e:
        raise ConfigError(f"{flag} expects comma-separated integers: {e}") from e


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as e:
        raise ConfigError(f"{flag} expects comma-separated numbers: {e}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvmf-cl",
        description="Continual contrastive learning with t-vMF similarity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a config-driven experiment")
    p_train.add_argument("--config", required=True, help="TOML config file")
    p_train.add_argument("--out", default=None, help="output directory (overrides config)")
    p_train.add_argument("--seeds", default=None, help="comma-separated seed list override")
    p_train.set_defaults(fn=cmd_train)

    p_sweep = sub.add_parser("sweep", help="run the experiment once per kappa (t-vMF)")
    p_sweep.add_argument("--config", required=True, help="TOML config file")
    p_sweep.add_argument("--kappa", required=True, help="comma-separated kappa values")
    p_sweep.add_argument("--out", default=None, help="output directory (overrides config)")
    p_sweep.add_argument("--seeds", default=None, help="comma-separated seed list override")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_curve = sub.add_parser("curve", help="export a similarity curve as CSV")
    p_curve.add_argument("--kind", choices=["cosine", "vmf", "tvmf"], default="tvmf")
    p_curve.add_argument("--kappa", type=float, default=16.0)
    p_curve.add_argument("--grid", type=int, default=201, help="number of cos grid points")
    p_curve.add_argument("--out", required=True, help="output CSV path")
    p_curve.set_defaults(fn=cmd_curve)

    p_check = sub.add_parser("check", help="run the built-in verification battery")
    p_check.set_defaults(fn=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
