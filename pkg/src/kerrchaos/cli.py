"""Command-line entry points: simulate, analyze, table1, classical, fixtures.

Exit code is 0 only when every requested verdict was computed.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classical import ClassicalParams, PhasePoint, classical_lyapunov, integrate
from .config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    config_from_manifest,
    load_config,
    load_manifest,
)
from .fixtures import FIXTURES
from .io import read_series, write_series, write_series_csv, write_table_csv
from .pipeline import analyze_series, cmd_simulate, cmd_table1
from .config import write_manifest


def _config_from_args(args) -> RunConfig:
    if getattr(args, "from_manifest", None):
        return config_from_manifest(load_manifest(args.from_manifest))
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = config_from_dict(
            {
                "model": {
                    "omega": args.omega,
                    "omega0": args.omega0,
                    "gamma": args.gamma,
                    "g": args.g,
                },
                "state": {"kind": args.kind, "nu": args.nu, "m": args.m},
            }
        )
    overrides = {}
    for name in ("dt", "steps", "discard_prefix", "paper_scale"):
        value = getattr(args, name, None)
        if value is not None and value is not False:
            overrides[name] = value
    if getattr(args, "entropy", False):
        from dataclasses import replace

        cfg = replace(cfg, analyses=replace(cfg.analyses, entropy=True))
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    if getattr(args, "out", None):
        from dataclasses import replace

        cfg = replace(cfg, output_dir=str(args.out))
    return cfg.validate()


def _add_model_state_flags(p):
    p.add_argument("--config", help="YAML run config")
    p.add_argument("--from-manifest", help="re-run with every parameter pinned by a manifest")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--omega0", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--g", type=float, default=100.0)
    p.add_argument("--kind", choices=["cs", "pacs"], default="cs")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--discard-prefix", dest="discard_prefix", type=int, default=None)
    p.add_argument("--paper-scale", dest="paper_scale", action="store_true",
                   help="paper-faithful 1e6 steps (multi-minute runs)")
    p.add_argument("--out", help="output directory")


def _cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    manifest = cmd_simulate(cfg, args.out or cfg.output_dir, csv=args.csv)
    residual = manifest["verdicts"]["conservation_residual"]
    print(f"simulated {cfg.resolved_steps()} steps at dt={cfg.resolved_dt()}")
    print(f"conservation residual max|<N>+<b'b> - const| = {residual:.3e}")
    return 0


def _cmd_analyze(args) -> int:
    if getattr(args, "from_manifest", None):
        cfg = config_from_manifest(load_manifest(args.from_manifest))
    elif args.config:
        cfg = load_config(args.config)
    else:
        # inherit the generating run's config when the series file sits
        # next to its manifest; otherwise fall back to analysis defaults
        sibling = Path(args.series).parent / "manifest.json"
        if sibling.exists():
            cfg = config_from_manifest(load_manifest(sibling))
        else:
            cfg = config_from_dict({"state": {"kind": "cs", "nu": 1.0}})
    if args.out:
        from dataclasses import replace

        cfg = replace(cfg, output_dir=str(args.out))
    ts = read_series(args.series)
    manifest = analyze_series(ts, cfg, args.out or cfg.output_dir)
    v = manifest["verdicts"]
    for key in ("lambda_max", "lambda_stderr", "regime", "kac_ratio",
                "return_verdict", "erlang2_accepted", "peak_count"):
        if key in v and v[key] is not None:
            print(f"{key} = {v[key]}")
    failed = [k for k in v if k.endswith("_error")]
    for k in failed:
        print(f"{k}: {v[k]}", file=sys.stderr)
    return 1 if failed else 0


def _cmd_table1(args) -> int:
    if args.config:
        base = load_config(args.config)
    else:
        base = config_from_dict({"state": {"kind": "cs", "nu": 1.0}})
    if args.steps:
        from dataclasses import replace

        base = replace(base, steps=args.steps)
    if args.paper_scale:
        from dataclasses import replace

        base = replace(base, steps=10**6, paper_scale=True)
    out = args.out or base.output_dir
    rows = cmd_table1(base, out, jobs=args.jobs)
    header = f"{'g/g':>8}  {'state':>6}  {'m':>2}  {'nu':>5}  {'lambda_max':>11}  {'verdict'}"
    print(header.replace("g/g", "γ/g") if sys.stdout.encoding == "utf-8" else header)
    ok = True
    for r in rows:
        lam = "" if r["lambda_max"] is None else f"{r['lambda_max']:11.4f}"
        print(f"{r['gamma_over_g']:8.3g}  {r['state']:>6}  {r['m']:2d}  {r['nu']:5.1f}  {lam:>11}  {r['verdict']}")
        if str(r["verdict"]).startswith("failed") or r["verdict"] == "no-embedding":
            ok = False
    print(f"table written to {Path(out) / 'table1.csv'}")
    return 0 if ok else 1


def _cmd_classical(args) -> int:
    params = ClassicalParams(
        m=args.mass, M=args.mass2, omega=args.omega, omega0=args.omega0,
        lambda_cl=args.lambda_cl, g=args.g,
    )
    point = PhasePoint(x=args.x, p_x=args.px, y=args.y, p_y=args.py)
    out = Path(args.out)
    traj = integrate(point, params, dt=args.dt, steps=args.steps)
    h = traj.h_values()
    n = traj.n_tot_values()
    h_drift = float(np.abs(h - h[0]).max() / max(abs(h[0]), 1.0))
    n_drift = float(np.abs(n - n[0]).max() / max(abs(n[0]), 1.0))
    print(f"H_cl drift (relative): {h_drift:.3e}")
    print(f"N_cl drift (relative): {n_drift:.3e}")
    verdicts = {"h_drift_rel": h_drift, "n_drift_rel": n_drift}
    if args.lyapunov:
        lam = classical_lyapunov(point, params, dt=args.dt, steps=args.steps)
        print("Lyapunov exponents:", " ".join(f"{x: .3e}" for x in lam))
        verdicts["lyapunov"] = [float(x) for x in lam]
    h1 = traj.h1_series()
    write_series(out / "h1.ts", h1)
    if args.csv:
        write_series_csv(out / "h1.csv", h1)
    write_table_csv(
        out / "invariants.csv",
        ["t", "h_cl", "n_tot"],
        list(zip((args.dt * np.arange(len(h))).tolist(), h.tolist(), n.tolist())),
    )
    write_manifest(
        out / "manifest.json",
        {
            "kind": "classical",
            "code_version": __version__,
            "config": {
                "params": {
                    "m": params.m, "M": params.M, "omega": params.omega,
                    "omega0": params.omega0, "lambda_cl": params.lambda_cl, "g": params.g,
                },
                "point": {"x": point.x, "p_x": point.p_x, "y": point.y, "p_y": point.p_y},
                "dt": args.dt, "steps": args.steps,
            },
            "verdicts": verdicts,
        },
    )
    return 0


def _cmd_fixtures(args) -> int:
    out = Path(args.out)
    maker = FIXTURES[args.fixture]
    kwargs = {"n": args.n}
    if args.fixture != "logistic":
        kwargs["dt"] = args.dt
    ts = maker(**kwargs)
    path = out / f"{args.fixture}.ts"
    write_series(path, ts)
    if args.csv:
        write_series_csv(out / f"{args.fixture}.csv", ts)
    print(f"wrote {path} ({len(ts)} samples, dt={ts.dt})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrchaos",
        description="Kerr-coupled field-mode dynamics and ergodicity analysis",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve <N(t)>, <b'b(t)> and write series files")
    _add_model_state_flags(p)
    p.add_argument("--entropy", action="store_true", help="also record the entanglement entropy")
    p.add_argument("--csv", action="store_true", help="also write lossless CSV exports")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="run the analysis chain on a series file")
    p.add_argument("series", help="input .ts file")
    p.add_argument("--config", help="YAML run config")
    p.add_argument("--from-manifest", help="re-run pinned by a manifest")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("table1", help="regime classification over the reference parameter grid")
    p.add_argument("--config", help="base YAML config")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--paper-scale", dest="paper_scale", action="store_true")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="concurrent cases")
    p.set_defaults(func=_cmd_table1)

    p = sub.add_parser("classical", help="integrate the classical limit and check invariants")
    p.add_argument("--mass", type=float, default=1.0, help="field-oscillator mass")
    p.add_argument("--mass2", type=float, default=1.0, help="atom-oscillator mass")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--omega0", type=float, default=1.0)
    p.add_argument("--lambda-cl", dest="lambda_cl", type=float, default=1.0)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--px", type=float, default=0.0)
    p.add_argument("--y", type=float, default=1.0)
    p.add_argument("--py", type=float, default=0.5)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--lyapunov", action="store_true", help="also compute the 4 exponents")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out", default="runs/classical")
    p.set_defaults(func=_cmd_classical)

    p = sub.add_parser("fixtures", help="emit sine / two-tone / logistic / iid test signals")
    p.add_argument("fixture", choices=sorted(FIXTURES))
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out", default="runs/fixtures")
    p.set_defaults(func=_cmd_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
