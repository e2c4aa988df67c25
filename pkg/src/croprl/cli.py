"""Command-line surface: train / eval / sweep / noise / ablate / report.

Exit codes: 0 success, 1 usage error, 2 runtime error. The default output
directory comes from --out, else $CROPRL_OUT, else ./runs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .config import RunConfig, parse_config, parse_config_text, render_config
from .encoding import Mask
from .errors import CropRlError
from .evaluate import NOISE_PRESETS, evaluate_policy, load_schedule_csv, noise_eval, \
    partial_obs_sweep, run_fixed_schedule, write_noise_csv, write_sweep_csv
from .report import summarize_eval_dir, write_noise_svg, write_sweep_svg
from .train import train


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the CLI contract wants 1.
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="croprl", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("train", parents=[], help="run DQN training")
    p.add_argument("--config", help="INI run configuration (defaults if omitted)")
    p.add_argument("--seed", type=int, help="override train.seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="inline config override (repeatable)")

    p = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--episodes", type=int, default=100)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--alpha", type=float, help="random mask ratio, one mask per episode")
    group.add_argument("--mask-file", help="file with indices of masked features")
    p.add_argument("--noise", choices=sorted(NOISE_PRESETS), help="noise preset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--traj-dir", help="also dump per-episode trajectory CSVs here")

    p = sub.add_parser("sweep", help="partial-observation sweep over alpha")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--alphas", default="0:1:0.1", metavar="LO:HI:STEP")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("noise", help="measurement-noise decrease rate")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--spec", required=True,
                   help="preset name (%s) or 'all'" % ", ".join(sorted(NOISE_PRESETS)))
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("ablate", help="train/evaluate over a hyperparameter grid")
    p.add_argument("--param", required=True, choices=("lambda", "mask-range"))
    p.add_argument("--values", required=True,
                   help="comma list, e.g. 0,0.01,0.02,0.05 or 0-10,0-12,0-18,0-23")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int, help="eval episodes per trained point")
    p.add_argument("--out")

    p = sub.add_parser("baseline", help="run a fixed (day, N, water) schedule")
    p.add_argument("--schedule", required=True, help="CSV with day,n_dose,water_dose")
    p.add_argument("--config")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("report", help="summarize a results directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--svg", action="store_true", help="also render charts")
    return parser


def _parse_alphas(expr: str) -> list[float]:
    try:
        lo, hi, step = (float(x) for x in expr.split(":"))
    except ValueError:
        raise _UsageError(f"--alphas expects LO:HI:STEP, got '{expr}'") from None
    if step <= 0 or hi < lo:
        raise _UsageError(f"--alphas expects LO <= HI and STEP > 0, got '{expr}'")
    count = int(round((hi - lo) / step)) + 1
    return [round(lo + k * step, 10) for k in range(count) if lo + k * step <= hi + 1e-9]


def _out_dir(args, cfg: RunConfig | None = None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if cfg is not None:
        return cfg.resolved_out_dir()
    return RunConfig().resolved_out_dir()


def _load_run_config(args) -> RunConfig:
    overrides = tuple(getattr(args, "set", []) or [])
    if getattr(args, "config", None):
        cfg = parse_config(args.config, overrides)
    else:
        cfg = parse_config_text("", overrides)
    if getattr(args, "seed", None) is not None:
        cfg.train.seed = args.seed
        cfg.eval.seed = args.seed
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    return cfg


def _cmd_train(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    train(cfg, out)
    print(f"wrote {out / 'train_log.csv'} and {out / 'checkpoint.ckpt'}")
    return 0


def _read_mask_file(path) -> Mask:
    text = Path(path).read_text()
    indices = [int(tok) for tok in text.replace(",", " ").split()]
    return Mask.from_masked_indices(indices)


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    mask = _read_mask_file(args.mask_file) if args.mask_file else None
    noise = NOISE_PRESETS[args.noise] if args.noise else None
    traj_dir = Path(args.traj_dir) if args.traj_dir else None
    if traj_dir:
        traj_dir.mkdir(parents=True, exist_ok=True)
    report = evaluate_policy(ckpt, n_episodes=args.episodes, alpha=args.alpha,
                             mask=mask, noise=noise, seed=args.seed, traj_dir=traj_dir)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "eval.csv"
    report.to_csv(csv_path)
    print(f"episodes {report.n}  mean RF1 {report.mean('rf1'):.1f}  "
          f"mean yield {report.mean('yield_kg_ha'):.1f}  -> {csv_path}")
    return 0


def _cmd_sweep(args) -> int:
    alphas = _parse_alphas(args.alphas)
    out = _out_dir(args)
    rows = partial_obs_sweep(args.ckpt, alphas, trials_per_alpha=args.trials,
                             seed=args.seed, out_dir=out)
    for r in rows:
        print(f"alpha {r.alpha:4.2f}  mean RF1 {r.mean_rf1:9.1f}  std {r.std_rf1:8.1f}")
    print(f"-> {out / 'sweep.csv'}")
    return 0


def _cmd_noise(args) -> int:
    names = sorted(NOISE_PRESETS) if args.spec == "all" else [args.spec]
    for name in names:
        if name not in NOISE_PRESETS:
            raise _UsageError(f"unknown noise preset '{name}'; "
                              f"choose from {', '.join(sorted(NOISE_PRESETS))}")
    ckpt = load_checkpoint(args.ckpt)
    results = []
    for name in names:
        res = noise_eval(ckpt, NOISE_PRESETS[name], n=args.n, seed=args.seed)
        results.append((name, res))
        print(f"{name:<10} clean {res.mean_clean:9.1f}  noisy {res.mean_noisy:9.1f}  "
              f"decrease {res.decrease_rate_pct:6.2f}%")
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    write_noise_csv(results, out / "noise.csv")
    write_noise_svg(results, out / "noise.svg")
    print(f"-> {out / 'noise.csv'}")
    return 0


def _parse_mask_range(token: str) -> tuple[float, float]:
    try:
        lo_count, hi_count = (int(x) for x in token.split("-"))
    except ValueError:
        raise _UsageError(f"mask-range value '{token}' is not of the form LO-HI") from None
    if not 0 <= lo_count <= hi_count <= 25:
        raise _UsageError(f"mask-range '{token}' outside 0..25")
    return lo_count / 25.0, hi_count / 25.0


def _cmd_ablate(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for token in args.values.split(","):
        token = token.strip()
        sub_cfg = parse_config_text(render_config(cfg))
        if args.param == "lambda":
            sub_cfg.train.lam = float(token)
            run_name = f"lambda_{token}"
        else:
            lo, hi = _parse_mask_range(token)
            sub_cfg.train.alpha_lo = lo
            sub_cfg.train.alpha_hi = hi
            run_name = f"mask_{token}"
        run_dir = out / run_name
        ckpt = train(sub_cfg, run_dir)
        episodes = args.episodes or cfg.eval.episodes
        report = evaluate_policy(ckpt, n_episodes=episodes, seed=cfg.eval.seed)
        report.to_csv(run_dir / "eval.csv")
        rows.append((run_name, token, report.mean("rf1"), report.mean("yield_kg_ha")))
        print(f"{run_name:<16} mean RF1 {rows[-1][2]:9.1f}  "
              f"mean yield {rows[-1][3]:9.1f}")
    with (out / "ablation.csv").open("w") as fh:
        fh.write("run,value,mean_rf1,mean_yield\n")
        for name, token, rf1, y in rows:
            fh.write(f"{name},{token},{rf1!r},{y!r}\n")
    print(f"-> {out / 'ablation.csv'}")
    return 0


def _cmd_baseline(args) -> int:
    cfg = _load_run_config(args)
    schedule = load_schedule_csv(args.schedule, cfg.env.season_max_days)
    report = run_fixed_schedule(schedule, cfg.env, seed=args.seed,
                                n_episodes=args.episodes)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "baseline_eval.csv")
    print(f"schedule totals N {schedule.totals()[0]:.0f} kg/ha, "
          f"water {schedule.totals()[1]:.0f} L/m2; mean RF1 {report.mean('rf1'):.1f} "
          f"-> {out / 'baseline_eval.csv'}")
    return 0


def _cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise _UsageError(f"--in directory not found: {in_dir}")
    text = summarize_eval_dir(in_dir, in_dir / "summary.txt")
    print(text, end="")
    if args.svg:
        sweep_csv = in_dir / "sweep.csv"
        if sweep_csv.exists():
            import csv as _csv
            from .evaluate import SweepRow
            with sweep_csv.open() as fh:
                rows = [SweepRow(float(r["alpha"]), float(r["mean_rf1"]),
                                 float(r["std_rf1"]), int(r["trials"]))
                        for r in _csv.DictReader(fh)]
            if rows:
                write_sweep_svg(rows, in_dir / "sweep.svg")
                print(f"-> {in_dir / 'sweep.svg'}")
    print(f"-> {in_dir / 'summary.txt'}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "noise": _cmd_noise,
    "ablate": _cmd_ablate,
    "baseline": _cmd_baseline,
    "report": _cmd_report,
}


def cli_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise _UsageError(parser.format_usage())
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (CropRlError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
