"""Run orchestration: simulate, analyze, classify, persist, reproduce.

Every run writes a manifest that echoes the resolved configuration and
records each auto-selected analysis parameter next to the verdicts it
produced; re-running from that manifest pins the whole chain.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_to_dict, write_manifest
from .errors import DegenerateSeriesError, InsufficientDataError
from .evolve import TimeSeries, conservation_residual, evolve_series
from .io import write_series, write_series_csv, write_table_csv
from .model import ModelParams
from .recurrence import (
    fit_return_distribution,
    invariant_density,
    recurrence_times,
    select_cell,
    successive_return_test,
    tau_histogram,
)
from .states import build_state, mean_photon_initial
from .tsa import (
    Embedding,
    acf_efold_lag,
    ami_delay,
    classify_regime,
    count_peaks,
    curve_for_plot,
    fnn_embedding_dim,
    mean_period_samples,
    power_spectrum,
    rosenstein_lambda,
)


def simulate(cfg: RunConfig):
    """Evolve the configured initial state; return the observable set."""
    cfg.validate()
    state = build_state(cfg.state, eps_trunc=cfg.eps_trunc)
    return evolve_series(
        state,
        cfg.model,
        cfg.resolved_dt(),
        cfg.resolved_steps(),
        want_entropy=cfg.analyses.entropy,
        entropy_stride=cfg.analysis.entropy_stride,
        eps_trunc=cfg.eps_trunc,
        spec=cfg.state,
    )


def discarded(series: TimeSeries, prefix: int) -> TimeSeries:
    if prefix <= 0:
        return series
    return TimeSeries(
        dt=series.dt,
        values=series.values[prefix:].copy(),
        label=series.label,
        params_hash=series.params_hash,
    )


def cmd_simulate(cfg: RunConfig, out_dir=None, csv: bool = False) -> dict:
    """Run the simulation and persist series + manifest.

    Writes mean_N.ts, mean_b.ts and (if enabled) entropy.ts, prints
    nothing; the returned manifest includes the conservation residual.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    t0 = time.perf_counter()
    obs = simulate(cfg)
    elapsed = time.perf_counter() - t0
    residual = conservation_residual(obs)

    write_series(out / "mean_N.ts", obs.mean_N)
    write_series(out / "mean_b.ts", obs.mean_b)
    if csv:
        write_series_csv(out / "mean_N.csv", obs.mean_N)
        write_series_csv(out / "mean_b.csv", obs.mean_b)
    if obs.entropy is not None:
        write_series(out / "entropy.ts", obs.entropy)

    manifest = {
        "kind": "simulate",
        "code_version": __version__,
        "config": config_to_dict(cfg),
        "verdicts": {
            "conservation_residual": residual,
            "mean_photon_initial": mean_photon_initial(cfg.state),
        },
        "timings": {"simulate_s": elapsed},
        "outputs": ["mean_N.ts", "mean_b.ts"] + (["entropy.ts"] if obs.entropy else []),
    }
    write_manifest(out / "manifest.json", manifest)
    return manifest


def _analyze_spectrum(ts, cfg, out, results, selected):
    max_lag = cfg.analysis.spectrum_max_lag or min(len(ts) // 2 - 1, 4096)
    spec = power_spectrum(ts, max_lag=max_lag)
    selected["spectrum_max_lag"] = max_lag
    results["peak_count"] = count_peaks(spec, db_drop=60.0)
    if out is not None:
        scaled = spec.freqs * 2.0 * np.pi / cfg.model.g if cfg.model.g > 0 else spec.freqs
        write_table_csv(
            out / "spectrum.csv",
            ["freq", "freq_over_g", "power"],
            list(zip(spec.freqs.tolist(), scaled.tolist(), spec.power.tolist())),
        )
    return spec


def _analyze_lyapunov(ts, cfg, out, results, selected):
    an = cfg.analysis
    # delay: first MI minimum, capped by the signal's autocorrelation time
    # (map-like signals decorrelate immediately; their MI floor is noise)
    delay = an.delay or max(
        1, min(ami_delay(ts, max_lag=an.ami_max_lag), acf_efold_lag(ts))
    )
    selected["delay"] = delay
    emb_dim = an.emb_dim or fnn_embedding_dim(ts, delay=delay, max_dim=an.max_dim)
    if emb_dim is None:
        results["regime"] = "no-embedding"
        return
    selected["emb_dim"] = emb_dim
    theiler = an.theiler if an.theiler is not None else max(
        mean_period_samples(ts), delay
    )
    selected["theiler"] = theiler

    emb = Embedding(series=ts, delay=delay, dim=emb_dim)
    kmax = an.kmax or min((emb.count - 100) // 2, max(1000, round(200.0 / ts.dt)))
    selected["kmax"] = kmax

    curve = rosenstein_lambda(
        ts, emb, theiler=theiler, kmax=kmax, n_refs=an.n_refs,
        fit_range=an.fit_range,
    )
    selected["fit_range"] = [int(curve.fit_range[0]), int(curve.fit_range[1])]
    results["lambda_max"] = curve.lambda_max
    results["lambda_stderr"] = curve.lambda_stderr
    results["lambda_per_step"] = curve.slope_per_step
    results["lambda_reliable"] = curve.reliable
    results["fit_r2"] = curve.fit_r2
    results["regime"] = classify_regime(curve.lambda_max, curve.lambda_stderr)

    curves = [curve]
    if an.stability_dims > 0:
        lams = [curve.lambda_max]
        for d in range(emb_dim + 1, emb_dim + 1 + an.stability_dims):
            extra = rosenstein_lambda(
                ts,
                Embedding(series=ts, delay=delay, dim=d),
                theiler=theiler,
                kmax=kmax,
                n_refs=an.n_refs,
                fit_range=an.fit_range,
            )
            curves.append(extra)
            lams.append(extra.lambda_max)
        base = lams[0]
        results["lambda_by_dim"] = lams
        if base != 0.0:
            results["lambda_stability_dev"] = float(
                max(abs(l - base) for l in lams) / abs(base)
            )
    if out is not None:
        table = curve_for_plot(curves)
        write_table_csv(out / "lyapunov_curve.csv", table["columns"], table["rows"])


def _analyze_recurrence(ts, cfg, out, results, selected):
    an = cfg.analysis
    density = invariant_density(ts, bin_width=an.bin_width)
    selected["bin_width"] = an.bin_width
    cell = select_cell(density, an.cell_policy)
    selected["cell"] = [cell.lo, cell.hi]
    report = recurrence_times(ts, cell)
    results["mu"] = report.mu
    results["mean_tau"] = report.mean_tau
    results["kac_ratio"] = report.kac_ratio
    results["n_visits"] = report.n_visits
    try:
        fit = fit_return_distribution(report)
        report = report.with_fit(fit)
        results["return_verdict"] = fit.verdict
        results["return_ks_pvalue"] = fit.ks_pvalue
        results["return_top10_mass"] = fit.top10_mass
    except InsufficientDataError as exc:
        results["return_verdict"] = f"skipped ({exc})"
    try:
        succ = successive_return_test(ts, cell)
        results["erlang2_accepted"] = succ.accepted
        results["erlang2_ks_pvalue"] = succ.ks_pvalue
        results["serial_correlation"] = succ.serial_correlation
    except InsufficientDataError as exc:
        results["erlang2_accepted"] = None
        results["erlang2_note"] = str(exc)
    if out is not None:
        write_table_csv(
            out / "density.csv",
            ["bin_lo", "bin_hi", "count", "rho"],
            list(
                zip(
                    density.bin_edges[:-1].tolist(),
                    density.bin_edges[1:].tolist(),
                    density.counts.tolist(),
                    density.rho.tolist(),
                )
            ),
        )
        values, probs = tau_histogram(report)
        write_table_csv(
            out / "tau_hist.csv",
            ["tau_samples", "tau_time", "probability"],
            list(zip(values.tolist(), (values * ts.dt).tolist(), probs.tolist())),
        )
    return report


def analyze_series(ts: TimeSeries, cfg: RunConfig, out_dir=None) -> dict:
    """Run the enabled analyses on a series; returns the analyze manifest."""
    cfg.validate()
    out = Path(out_dir) if out_dir is not None else None
    ts = discarded(ts, cfg.discard_prefix)
    results = {}
    selected = {}
    timings = {}

    stages = []
    if cfg.analyses.spectrum:
        stages.append(("spectrum", _analyze_spectrum))
    if cfg.analyses.embed and cfg.analyses.lyapunov:
        stages.append(("lyapunov", _analyze_lyapunov))
    if cfg.analyses.recurrence:
        stages.append(("recurrence", _analyze_recurrence))

    for name, stage in stages:
        t0 = time.perf_counter()
        try:
            stage(ts, cfg, out, results, selected)
        except (DegenerateSeriesError, InsufficientDataError) as exc:
            results[f"{name}_error"] = str(exc)
        timings[f"{name}_s"] = time.perf_counter() - t0

    manifest = {
        "kind": "analyze",
        "code_version": __version__,
        "config": config_to_dict(cfg),
        "selected": selected,
        "verdicts": results,
        "timings": timings,
    }
    if out is not None:
        write_manifest(out / "manifest.json", manifest)
    return manifest


def run_case(cfg: RunConfig, out_dir=None, csv: bool = False) -> dict:
    """simulate + analyze <N(t)>; one manifest covering both."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    sim = cmd_simulate(cfg, out, csv=csv)
    obs_series = out / "mean_N.ts"
    from .io import read_series

    manifest = analyze_series(read_series(obs_series), cfg, out)
    manifest["kind"] = "run"
    manifest["verdicts"]["conservation_residual"] = sim["verdicts"]["conservation_residual"]
    manifest["timings"]["simulate_s"] = sim["timings"]["simulate_s"]
    write_manifest(out / "manifest.json", manifest)
    return manifest


TABLE1_GRID = (
    # (gamma, g, kind, nu, m)
    (1.0, 100.0, "cs", 1.0, 0),
    (1.0, 100.0, "pacs", 1.0, 1),
    (1.0, 100.0, "pacs", 1.0, 5),
    (5.0, 1.0, "cs", 1.0, 0),
    (5.0, 1.0, "pacs", 1.0, 5),
    (5.0, 1.0, "cs", 10.0, 0),
    (5.0, 1.0, "pacs", 10.0, 1),
    (5.0, 1.0, "pacs", 10.0, 5),
)


def table1_configs(base: RunConfig, grid=TABLE1_GRID):
    """One run config per regime-table case, derived from a base config."""
    from .states import StateSpec

    cfgs = []
    for gamma, g, kind, nu, m in grid:
        cfgs.append(
            replace(
                base,
                model=ModelParams(
                    omega=base.model.omega,
                    omega0=base.model.omega0,
                    gamma=gamma,
                    g=g,
                ),
                state=StateSpec.from_nu(kind, nu, m=m),
                dt=base.dt,  # None -> keyed off gamma/g per case
            )
        )
    return cfgs


def cmd_table1(base: RunConfig, out_dir=None, grid=TABLE1_GRID, jobs: int = 1) -> list:
    """Reproduce the qualitative regime table over the parameter grid.

    Each case runs independently (concurrently when jobs > 1); a failed
    case marks its row 'failed' without aborting the sweep.
    """
    out = Path(out_dir if out_dir is not None else base.output_dir)
    cfgs = table1_configs(base, grid)

    def one(idx_cfg):
        idx, cfg = idx_cfg
        case_dir = out / f"case_{idx:02d}"
        try:
            manifest = run_case(cfg, case_dir)
            v = manifest["verdicts"]
            return {
                "gamma_over_g": cfg.model.gamma_over_g,
                "state": cfg.state.kind,
                "m": cfg.state.m,
                "nu": cfg.state.nu,
                "lambda_max": v.get("lambda_max"),
                "lambda_stderr": v.get("lambda_stderr"),
                "verdict": v.get("regime", "failed"),
            }
        except Exception as exc:  # noqa: BLE001 - a row must never abort the table
            return {
                "gamma_over_g": cfg.model.gamma_over_g,
                "state": cfg.state.kind,
                "m": cfg.state.m,
                "nu": cfg.state.nu,
                "lambda_max": None,
                "lambda_stderr": None,
                "verdict": f"failed ({exc})",
            }

    items = list(enumerate(cfgs))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, items))
    else:
        rows = [one(item) for item in items]

    write_table_csv(
        out / "table1.csv",
        ["gamma_over_g", "state", "m", "nu", "lambda_max", "lambda_stderr", "verdict"],
        [
            [
                r["gamma_over_g"],
                r["state"],
                r["m"],
                r["nu"],
                "" if r["lambda_max"] is None else r["lambda_max"],
                "" if r["lambda_stderr"] is None else r["lambda_stderr"],
                r["verdict"],
            ]
            for r in rows
        ],
    )
    write_manifest(
        out / "table1_manifest.json",
        {
            "kind": "table1",
            "code_version": __version__,
            "config": config_to_dict(base),
            "grid": [list(g) for g in grid],
            "rows": rows,
        },
    )
    return rows
