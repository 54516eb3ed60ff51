"""Experiment orchestration: single runs, epsilon sweeps, audits, self-test."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as dg
from .config import RunConfig, SweepConfig, dump
from .core import BCMode, KineticState, Params, make_grid, well_prepared_init
from .io import load_kinetic_snapshot, write_csv, write_snapshot
from .kinetic import (FourierProjector, KineticSolverConfig, StepReport, advance, galerkin_advance,
                      stable_dt, step_relaxation, time_levels)
from .limit import LimitState, limit_advance
from .quadrature import build_quadrature

log = logging.getLogger(__name__)

STEP_COLUMNS = ("time", "dt_used", "newton_iters_max", "clamped_cells")
RATE_COLUMNS = ("epsilon", "error", "error_L4_4", "error_L2_2", "error_interior", "H_final")


def expected_rate(params: Params) -> float:
    if params.bc_mode is BCMode.TORUS:
        return 2.0
    if params.bc_mode is BCMode.DIRICHLET:
        return 1.0
    return min(1.0, params.robin_r)


# --------------------------------------------------------------------------
# kinetic runs

@dataclass
class KineticResult:
    state: KineticState
    energy: list
    steps: list
    audit: dg.AuditResult
    snapshots: list = field(default_factory=list)


def simulate_kinetic(cfg: RunConfig, base_dir: Optional[Path] = None, dt: Optional[float] = None,
                     on_record=None, snapshot_dir: Optional[Path] = None) -> KineticResult:
    """Run the kinetic solver described by ``cfg``, keeping energy records.

    ``on_record(state)`` is called on every recorded state (initial included).
    """
    grid = cfg.build_grid()
    quad = cfg.build_quadrature()
    params = cfg.build_params()
    scfg = cfg.build_solver_config()
    if dt is not None:
        scfg = KineticSolverConfig(scfg.cfl, scfg.newton_tol, scfg.newton_max_iter, dt,
                                   scfg.galerkin_modes)
    bdata = cfg.build_boundary()
    state = well_prepared_init(cfg.build_initial(grid, base_dir), grid, quad.size)
    proj = None
    if scfg.galerkin_modes is not None:
        proj = FourierProjector(grid, scfg.galerkin_modes)
        state = KineticState(0.0, proj(state.temperature), proj(state.intensity), grid)

    energy, steps, snaps = [], [], []
    meta = {"config_sha256": cfg.hash(), "params": cfg.params}
    counter = {"n": 0}
    n_total = len(_levels(cfg, grid, quad, params, scfg))

    def record(st):
        energy.append(dg.energy_record(st, quad, params, bdata, proj))
        if on_record is not None:
            on_record(st)

    def snapshot(st, k):
        if snapshot_dir is not None:
            snaps.append(write_snapshot(snapshot_dir / f"snap_{k:06d}", st.time, st.temperature,
                                        grid, st.intensity, meta))

    def observer(st, report: StepReport):
        counter["n"] += 1
        k = counter["n"]
        steps.append(report)
        if k % cfg.record_every == 0 or k == n_total:
            record(st)
        if k == n_total or (cfg.snapshot_every and k % cfg.snapshot_every == 0):
            snapshot(st, k)

    record(state)
    snapshot(state, 0)
    if proj is not None:
        final = galerkin_advance(state, cfg.t_end, params, scfg, quad, observer)
    else:
        final = advance(state, cfg.t_end, params, scfg, quad, bdata, observer)
    audit = dg.energy_audit(energy, params)
    return KineticResult(final, energy, steps, audit, snaps)


def _levels(cfg, grid, quad, params, scfg):
    return time_levels(0.0, cfg.t_end, stable_dt(grid, quad, params, scfg))


def energy_rows(records, audit):
    for r, res in zip(records, audit.residual):
        yield (r.time, r.energy_T5, r.energy_psi2, r.dissipation_grad, r.dissipation_relax,
               r.boundary_psi, r.boundary_T5, res)


def run_kinetic(cfg: RunConfig, out: Path, base_dir: Optional[Path] = None) -> KineticResult:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump(cfg))
    res = simulate_kinetic(cfg, base_dir, snapshot_dir=out / "snapshots")
    sha = cfg.hash()
    write_csv(out / "energy.csv", dg.ENERGY_COLUMNS, energy_rows(res.energy, res.audit), sha)
    write_csv(out / "steps.csv", STEP_COLUMNS,
              ((s.time, s.dt_used, s.newton_iters_max, s.clamped_cells) for s in res.steps), sha)
    return res


# --------------------------------------------------------------------------
# limit runs

def limit_dt(cfg: RunConfig, eps: Optional[float] = None) -> float:
    """Time step shared by the limit run and the kinetic runs it is compared with."""
    params = cfg.build_params()
    if eps is not None:
        params = params.replace(epsilon=eps)
    return stable_dt(cfg.build_grid(), cfg.build_quadrature(), params, cfg.build_solver_config())


def simulate_limit(cfg: RunConfig, dt: float, base_dir: Optional[Path] = None) -> dg.LimitHistory:
    grid = cfg.build_grid()
    params = cfg.build_params()
    state = LimitState(0.0, cfg.build_initial(grid, base_dir), grid)
    states = [state]
    limit_advance(state, cfg.t_end, dt, params, cfg.build_boundary(), states.append)
    return dg.LimitHistory.from_states(states)


def run_limit(cfg: RunConfig, out: Path, base_dir: Optional[Path] = None,
              dt: Optional[float] = None) -> dg.LimitHistory:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump(cfg))
    dt = limit_dt(cfg) if dt is None else dt
    hist = simulate_limit(cfg, dt, base_dir)
    grid = hist.grid
    vol = grid.cell_volume
    sha = cfg.hash()
    meta = {"config_sha256": sha}
    K = len(hist)
    rows = []
    for k in range(K):
        T = hist.temperatures[k]
        if k % cfg.record_every == 0 or k == K - 1:
            rows.append((hist.times[k], vol * float(np.sum(T + 4 * np.pi * T ** 4)),
                         float(T.min()), float(T.max())))
        if k in (0, K - 1) or (cfg.snapshot_every and k % cfg.snapshot_every == 0):
            write_snapshot(out / "snapshots" / f"limit_{k:06d}", hist.times[k], T, grid, None, meta)
    write_csv(out / "limit.csv", ("time", "total_u", "T_min", "T_max"), rows, sha)
    return hist


# --------------------------------------------------------------------------
# rate study

def _member(cfg_dict: dict, eps: float, dt: float, hist_times, hist_T, base_dir):
    """One sweep member: kinetic run compared against the shared limit history."""
    cfg = RunConfig.from_dict(cfg_dict).with_epsilon(eps)
    grid = cfg.build_grid()
    quad = cfg.build_quadrature()
    hist = dg.LimitHistory(np.asarray(hist_times), np.asarray(hist_T), grid)
    entropy = []

    def on_record(st):
        k = hist.index_of(st.time)
        Tbar = hist.temperatures[k]
        if np.any(Tbar <= 0):
            raise ValueError("relative entropy needs a positive limit temperature")
        psibar = dg.corrected_psibar(hist, eps, quad, k)
        entropy.append(dg.relative_entropy(st, Tbar, psibar, quad))

    simulate_kinetic(cfg, base_dir, dt=dt, on_record=on_record)
    return entropy


def rate_study(sweep: SweepConfig, out: Optional[Path] = None, base_dir: Optional[Path] = None,
               threads: int = 1) -> dict:
    """Fit the observed order of ``error(eps)`` over the sweep.

    All members share one time step, slaved to the smallest epsilon, and
    one limit run on the same time levels. Errors are taken at ``t_end``
    over the whole domain; wall regimes also report the fit over cells off
    the one-cell wall ring.
    """
    base = sweep.base
    params = base.build_params()
    s = expected_rate(params)
    report = {"scenario": base.scenario, "regime": params.bc_mode.value,
              "robin_r": params.robin_r if params.bc_mode is BCMode.ROBIN else None,
              "expected_rate": s, "epsilons": list(sweep.epsilon_list),
              "config_sha256": sweep.hash()}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.yaml").write_text(dump(sweep))

    if sweep.synthetic is not None:
        s_syn, scale = sweep.synthetic["s"], sweep.synthetic["scale"]
        errors = [scale * e ** s_syn for e in sweep.epsilon_list]
        slope, icpt, r2 = dg.fit_rate(zip(sweep.epsilon_list, errors))
        report.update(mode="synthetic", errors=errors, slope=slope, intercept=icpt, r2=r2)
        _write_report(out, report, [(e, err, 0.0, 0.0, err, 0.0)
                                    for e, err in zip(sweep.epsilon_list, errors)])
        return report

    eps_min = min(sweep.epsilon_list)
    dt = sweep.limit["dt"] if sweep.limit["dt"] is not None else limit_dt(base, eps_min)
    hist = simulate_limit(base, dt, base_dir)
    report.update(mode="pipeline", dt=dt, limit_T_min=float(hist.temperatures.min()))

    results, rows = {}, []
    jobs = [(base.to_dict(), e, dt, hist.times, hist.temperatures, base_dir)
            for e in sweep.epsilon_list]
    try:
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(_member, *j) for j in jobs]
                for e, fut in zip(sweep.epsilon_list, futures):
                    results[e] = fut.result()
        else:
            for j in jobs:
                results[j[1]] = _member(*j)
    except Exception as exc:
        report["failed"] = f"{type(exc).__name__}: {exc}"
        _finish(report, results, rows, out, s)
        raise
    _finish(report, results, rows, out, s)
    return report


def _finish(report, results, rows, out, s):
    eps_done = [e for e in report["epsilons"] if e in results]
    errors, interior = [], []
    for e in eps_done:
        recs = results[e]
        last = recs[-1]
        err_int = last.interior.get("error_L4_4", last.error_L4_4) \
            + last.interior.get("error_L2_2", last.error_L2_2)
        errors.append(last.error)
        interior.append(err_int)
        rows.append((e, last.error, last.error_L4_4, last.error_L2_2, err_int, last.H))
        if out is not None:
            write_csv(out / f"entropy_eps{e:g}.csv", dg.ENTROPY_COLUMNS,
                      ((r.time, r.H, r.H_T_part, r.H_psi_part, r.error_L4_4, r.error_L2_2)
                       for r in recs), report["config_sha256"])
    report["errors"] = errors
    report["errors_interior"] = interior
    if eps_done:
        report["min_H"] = min(r.H for e in eps_done for r in results[e])
        series = {e: ([r.time for r in results[e]], [r.H for r in results[e]]) for e in eps_done}
        report["gronwall_C_fit"] = dg.gronwall_constant(series, s)
    if len(eps_done) >= 3:
        report["slope"], report["intercept"], report["r2"] = dg.fit_rate(zip(eps_done, errors))
        if all(v > 0 for v in interior):
            report["slope_interior"] = dg.fit_rate(zip(eps_done, interior))[0]
    _write_report(out, report, rows)


def _write_report(out, report, rows):
    if out is None:
        return
    with open(out / "rate_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    write_csv(out / "rate.csv", RATE_COLUMNS, rows, report["config_sha256"])


# --------------------------------------------------------------------------
# audit from snapshots

def audit_snapshots(run_dir: Path, cfg: RunConfig, out: Optional[Path] = None) -> dg.AuditResult:
    """Recompute energy records from stored snapshots and audit them."""
    run_dir = Path(run_dir)
    files = sorted((run_dir / "snapshots").glob("snap_*.bin"))
    if not files:
        raise FileNotFoundError(f"no kinetic snapshots under {run_dir / 'snapshots'}")
    quad = cfg.build_quadrature()
    params = cfg.build_params()
    bdata = cfg.build_boundary()
    proj = None
    if cfg.solver["galerkin_modes"] is not None:
        proj = FourierProjector(cfg.build_grid(), cfg.solver["galerkin_modes"])
    records = [dg.energy_record(load_kinetic_snapshot(f), quad, params, bdata, proj)
               for f in files]
    audit = dg.energy_audit(records, params)
    out = run_dir if out is None else Path(out)
    write_csv(out / "audit.csv", dg.ENERGY_COLUMNS, energy_rows(records, audit), cfg.hash())
    return audit


# --------------------------------------------------------------------------
# self-test

def selftest(seed: int = 0) -> list:
    """Fast invariant checks; returns ``[(name, passed, detail)]``."""
    rng = np.random.default_rng(seed)
    out = []

    worst = 0.0
    for npol, naz in ((2, 4), (4, 8), (8, 8)):
        m = build_quadrature(npol, naz).moment_errors()
        worst = max(worst, m["zeroth"], float(np.max(m["first"])), float(np.max(m["second"])))
    out.append(("quadrature moments", worst <= 1e-12, f"max error {worst:.2e}"))

    grid = make_grid(1, [32], [1.0], [True])
    quad = build_quadrature(4, 8)
    params = Params(0.1)
    st = well_prepared_init(np.full(grid.shape, 1.3), grid, quad.size)
    end = advance(st, 50 * stable_dt(grid, quad, params, KineticSolverConfig()), params,
                  KineticSolverConfig(), quad)
    drift = max(float(np.max(np.abs(end.temperature - 1.3))),
                float(np.max(np.abs(end.intensity - 1.3 ** 4))))
    out.append(("equilibrium preservation", drift <= 1e-11, f"drift {drift:.2e}"))

    grid = make_grid(1, [1000], [1.0], [True])
    T = rng.uniform(0.1, 3.0, grid.shape)
    psi = rng.uniform(0.0, 50.0, grid.shape + (quad.size,))
    before = T + psi @ quad.weights
    T2, psi2, _ = step_relaxation(KineticState(0.0, T, psi, grid), 1e-3, Params(0.05), quad)
    cons = float(np.max(np.abs(T2 + psi2 @ quad.weights - before)))
    out.append(("relaxation conservation", cons <= 1e-10, f"max change {cons:.2e}"))

    c = rng.uniform(1e-3, 2.0, 10000)
    A = c + rng.uniform(0.0, 5.0, c.size)
    g = rng.uniform(-A, 5.0)
    ok, margin = dg.lmtg_check(A, g, c)
    out.append(("relative entropy lower bound", bool(np.all(ok)),
                f"min margin {float(np.min(margin)):.2e}"))

    eps = [0.4, 0.2, 0.1, 0.05]
    slope, _, r2 = dg.fit_rate([(e, 3.0 * e ** 1.5) for e in eps])
    out.append(("rate fit", abs(slope - 1.5) <= 1e-12 and abs(r2 - 1) <= 1e-12,
                f"slope {slope:.15f}"))
    return out
