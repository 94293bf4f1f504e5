"""Command-line front end.

    istc run (--preset NAME | --config FILE) [--out trace.csv] [--seed N] [--horizon N]
    istc analyze (--preset NAME | --config FILE)
    istc preset list
    istc preset show NAME

Exit codes: 0 success, 2 invalid input, 3 simulation aborted.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .config import PRESET_ALIASES, PRESETS, ConfigError, dumps, loads, preset
from .model import ModelOrders, armax_to_edlm, min_orders
from .sim import ExperimentConfig, compute_metrics, run_experiment
from .synth import SynthesisError, closed_loop_report

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 2, 3


@dataclass(frozen=True)
class RunManifest:
    config_path: Path | None = None
    preset: str | None = None
    out: Path | None = None
    seed: int | None = None
    horizon: int | None = None

    def __post_init__(self):
        if (self.config_path is None) == (self.preset is None):
            raise ConfigError("", "give exactly one of --config and --preset")


def load_config(m: RunManifest) -> ExperimentConfig:
    if m.preset is not None:
        cfg = preset(m.preset)
    else:
        try:
            text = Path(m.config_path).read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {m.config_path}: {exc.strerror}") from None
        cfg = loads(text)
    overrides = {}
    if m.seed is not None:
        overrides["seed"] = m.seed
    if m.horizon is not None:
        if m.horizon < 1:
            raise ConfigError("horizon", "must be >= 1")
        overrides["horizon"] = m.horizon
    return replace(cfg, **overrides) if overrides else cfg


def cmd_run(m: RunManifest, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg = load_config(m)
    except ConfigError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    tr = run_experiment(cfg)
    # polynomial references blow up absolute errors; report them relative to |y*|
    metrics = compute_metrics(tr, relative=cfg.trajectory.kind == "power")
    summary = [f"config: {cfg.name or '(unnamed)'}  hash: {tr.config_hash}  seed: {tr.seed}",
               f"steps: {len(tr)} of {cfg.horizon}", metrics.format()]
    summary += [f"event at k={k}: {msg}" for k, msg in tr.events]
    if tr.aborted:
        summary.append(f"ABORTED at k={tr.abort_step}: {tr.abort_reason}")
    text = "\n".join(summary) + "\n"
    if m.out is not None:
        out = Path(m.out)
        with open(out, "w", newline="") as f:
            tr.to_csv(f)
        out.with_suffix(".metrics.txt").write_text(text)
    else:
        tr.to_csv(stdout)
    stderr.write(text)
    return EXIT_ABORT if tr.aborted else EXIT_OK


def cmd_analyze(m: RunManifest, stdout=None, stderr=None) -> int:
    """Closed-loop report for the controller designed on the true plant model."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg = load_config(m)
        if isinstance(cfg.plant, str):
            raise ConfigError("plant", "analysis needs an ARMAX plant, not a function reference")
        lo = min_orders(cfg.plant)
        o = cfg.orders
        orders = ModelOrders(max(o.L_y, lo.L_y), max(o.L_u, lo.L_u), max(o.L_w, lo.L_w), cfg.plant.d)
        pg = armax_to_edlm(cfg.plant, orders)
        c = cfg.controller.synthesize(pg)
    except (ConfigError, SynthesisError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    t = cfg.trajectory
    n = t.n if t.kind == "power" else 2
    rep = closed_loop_report(pg, c, powers=(n,), T_s=t.T_s if t.kind == "ramp" else 1.0)
    print(f"plant PG: phi_y={pg.phi_y.tolist()} phi_u={pg.phi_u.tolist()} "
          f"phi_w={pg.phi_w.tolist()} d={orders.d}", file=stdout)
    print(f"controller: H={c.H.tolist()} E={c.E.tolist()} G={c.G.tolist()}", file=stdout)
    print(rep.format(), file=stdout)
    if not rep.verdict.stable:
        print("UNSTABLE: closed loop has roots on or outside the unit circle", file=stdout)
    return EXIT_OK


def cmd_preset(args, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if args.action == "list":
        for name in PRESETS:
            print(name, file=stdout)
        for alias, target in PRESET_ALIASES.items():
            print(f"{alias} -> {target}", file=stdout)
        return EXIT_OK
    if not args.name:
        print("error: preset show needs a NAME", file=stderr)
        return EXIT_INVALID
    try:
        print(dumps(preset(args.name)), file=stdout)
    except ConfigError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="istc", description="Incremental self-tuning control experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def source(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--config", type=Path, help="JSON experiment configuration")
        g.add_argument("--preset", help="built-in experiment (see 'preset list')")

    run = sub.add_parser("run", help="simulate and write a CSV trace")
    source(run)
    run.add_argument("--out", type=Path, help="CSV path; metrics go next to it as .metrics.txt")
    run.add_argument("--seed", type=int)
    run.add_argument("--horizon", type=int)

    an = sub.add_parser("analyze", help="characteristic polynomial, roots and static errors")
    source(an)

    pr = sub.add_parser("preset", help="list or print built-in configurations")
    pr.add_argument("action", choices=["list", "show"])
    pr.add_argument("name", nargs="?")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; keep --help at 0
        return int(exc.code or 0)
    if args.command == "preset":
        return cmd_preset(args)
    try:
        manifest = RunManifest(args.config, args.preset, getattr(args, "out", None),
                               getattr(args, "seed", None), getattr(args, "horizon", None))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.command == "run":
        return cmd_run(manifest)
    return cmd_analyze(manifest)


if __name__ == "__main__":
    sys.exit(main())
