"""Scenario runs, parameter sweeps and refinement studies."""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import linear
from .errors import FitWindowEmpty, Q1DError
from .fitting import loglinear_fit
from .steady import build_steady_shock
from .unsteady import FVScheme, Grid, cfl_dt, simulate, steady_state, transit_time

STABLE, UNSTABLE, INCONCLUSIVE = "Stable", "Unstable", "Inconclusive"
GROWTH_FACTOR = 2.0


class StageError(Q1DError):
    """A module error tagged with the pipeline stage that raised it."""

    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


@dataclass
class RunReport:
    scenario: dict
    steady: dict = field(default_factory=dict)
    verdict: str = INCONCLUSIVE
    reason: str = ""
    transit: float = math.nan
    lambda_fit: float = math.nan
    C_fit: float = math.nan
    fit: dict = field(default_factory=dict)
    lambda_loglinear: float = math.nan
    lambda0: float = math.nan
    spectral_radius: float = math.nan
    spectrum: dict = field(default_factory=dict)
    linearized_shock_rate: float = math.nan
    identity_residual: float = math.nan
    coefficient_residual: float = math.nan
    displacement_initial: float = math.nan
    displacement_final: float = math.nan
    displacement_max: float = math.nan
    t_final: float = math.nan
    lax_all: bool = False
    stop_reason: str = ""
    reference_error: str = ""
    wall_clock: dict = field(default_factory=dict)
    trace: dict = field(default_factory=dict, repr=False)

    def to_dict(self, with_trace=False):
        d = asdict(self)
        if not with_trace:
            d.pop("trace")
        return _jsonable(d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def build_shock(config):
    gas = config.gas_law()
    nozzle = config.build_nozzle()
    bc = config.boundary_data(gas, nozzle)
    return gas, nozzle, build_steady_shock(gas, nozzle, bc)


def _stage(name, report, fn):
    t0 = time.perf_counter()
    try:
        return fn()
    except Q1DError as exc:
        raise StageError(name, exc) from exc
    finally:
        report.wall_clock[name] = time.perf_counter() - t0


def linear_suite(config, gas, shock, report):
    lc = config.linear
    coeffs = linear.assemble_coefficients(gas, shock, lc.n_nodes)
    report.coefficient_residual = float(np.max(np.abs(coeffs.identity_residual())))
    h1 = linear.compatible_bump(coeffs, lc.bump_center, lc.bump_width)
    report.identity_residual = linear.check_dissipation_identity(
        coeffs, h1, lambda x: 0.0 * x, lc.identity_transits * coeffs.slow_transit())
    return coeffs


def spectrum_suite(config, coeffs, report):
    lc = config.linear
    T = lc.T if lc.T_mode == "fixed" else None
    ST, gram, info = linear.assemble_ST(coeffs, T)
    spec = linear.spectral_radius(ST, gram, info["T"])
    report.spectral_radius = spec.radius
    report.lambda0 = spec.lambda0
    report.spectrum = spec.to_dict()
    return spec


def nonlinear_suite(config, gas, nozzle, shock, report):
    tau = transit_time(shock)
    opts = config.simulation_options(tau)
    t_end = config.t_end(tau)
    spec = config.perturbation_spec()
    trace, snapshots, psi = simulate(gas, nozzle, shock, spec, t_end, opts.cfl, opts)
    t, s, sdot = trace.arrays()
    y = s - shock.x0
    report.displacement_initial = float(abs(y[0]))
    report.displacement_final = float(abs(y[-1]))
    report.displacement_max = float(np.max(np.abs(y)))
    report.t_final = float(t[-1])
    report.lax_all = bool(all(trace.lax_ok))
    report.stop_reason = trace.stop_reason
    report.lambda_fit = trace.lambda_fit
    report.C_fit = trace.C_fit
    report.fit = trace.fit.to_dict() if trace.fit is not None else {}
    report.lambda_loglinear = loglinear_window_rate(trace, shock, Grid(nozzle.l, nozzle.L, opts.n_cells),
                                                    opts.transient * tau)
    report.reference_error = trace.reference_error or ""
    report.trace = {"t": t.tolist(), "s": s.tolist(), "sdot": sdot.tolist(),
                    "lax_ok": list(trace.lax_ok), "E0": list(trace.E0), "error": trace.error}
    return trace, snapshots, psi


def loglinear_window_rate(trace, shock, grid, t_transient, floor_cells=5.0):
    """Rate from a straight-line fit of log|s - x0| where it lies in [floor, initial/2].

    Kept alongside the damped-oscillation fit for comparison; returns nan
    when the window holds fewer than ten samples.
    """
    t = np.asarray(trace.t)
    y = np.abs(trace.displacement())
    sel = (t >= t_transient) & (y >= floor_cells * grid.dx) & (y <= 0.5 * y[0])
    try:
        return loglinear_fit(t[sel], y[sel]).lam
    except FitWindowEmpty:
        return math.nan


def decide(config, report, sim_error=None):
    """Apply the verdict rule; the report's reason explains anything not Stable/Unstable."""
    v = config.verdict
    if sim_error is None and math.isnan(report.spectral_radius):
        return INCONCLUSIVE, "spectral radius not computed"
    radius_ok = report.spectral_radius < v.radius_max
    if sim_error is not None:
        grew = report.displacement_max > GROWTH_FACTOR * report.displacement_initial
        if report.spectral_radius >= v.radius_max and grew:
            return UNSTABLE, f"displacement grew before run ended ({sim_error})"
        return INCONCLUSIVE, sim_error
    shrunk = report.displacement_final < v.shrink_factor * report.displacement_initial
    if radius_ok and report.lambda_fit > v.lambda_min and shrunk:
        return STABLE, ""
    grew = report.displacement_max > GROWTH_FACTOR * report.displacement_initial
    if not radius_ok and grew:
        return UNSTABLE, ""
    parts = []
    if not radius_ok:
        parts.append(f"spectral radius {report.spectral_radius:.4g} >= {v.radius_max}")
    if not report.lambda_fit > v.lambda_min:
        parts.append(f"lambda_fit {report.lambda_fit:.4g} not above {v.lambda_min}")
    if not shrunk:
        parts.append("displacement did not shrink")
    if not grew and not radius_ok:
        parts.append("displacement did not grow")
    return INCONCLUSIVE, "; ".join(parts) or "mixed evidence"


def run_scenario(config, stages=("linear", "spectrum", "simulate")):
    """Steady shock, linear identity and spectrum, nonlinear run, verdict."""
    report = RunReport(scenario=config.to_dict())
    gas, nozzle, shock = _stage("steady", report, lambda: build_shock(config))
    report.steady = shock.summary()
    report.linearized_shock_rate = linear.linearized_shock_rate(shock)
    report.transit = transit_time(shock)
    if "linear" in stages or "spectrum" in stages:
        coeffs = _stage("linear", report, lambda: linear_suite(config, gas, shock, report))
        if "spectrum" in stages:
            _stage("spectrum", report, lambda: spectrum_suite(config, coeffs, report))
    if "simulate" not in stages:
        report.verdict, report.reason = INCONCLUSIVE, "nonlinear run skipped"
        return report
    sim_error = None
    try:
        trace, _, _ = _stage("simulate", report,
                             lambda: nonlinear_suite(config, gas, nozzle, shock, report))
        if trace.error:
            sim_error = trace.error
    except StageError as exc:
        sim_error = type(exc.cause).__name__
        report.stop_reason = str(exc)
    report.verdict, report.reason = decide(config, report, sim_error)
    return report


def _safe_run(config):
    try:
        return run_scenario(config)
    except StageError as exc:
        rep = RunReport(scenario=config.to_dict())
        rep.verdict, rep.reason = INCONCLUSIVE, str(exc)
        return rep


def sweep(configs, parallelism=1):
    """Run independent scenarios; failures become Inconclusive reports."""
    configs = list(configs)
    if not configs:
        return []
    if parallelism <= 1 or len(configs) == 1:
        return [_safe_run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_safe_run, configs))


def steady_drift(gas, nozzle, shock, n_cells, t_end=1.0, cfl=0.45):
    """Max-norm density change after evolving exact steady data, and L1 change away from the shock."""
    grid = Grid(nozzle.l, nozzle.L, n_cells)
    state0 = steady_state(shock, grid)
    scheme = FVScheme(gas, nozzle, shock, grid)
    state = state0
    while state.t < t_end - 1e-12:
        state = scheme.step(state, min(cfl_dt(gas, state, cfl), t_end - state.t))
    diff = np.abs(state.rho - state0.rho)
    far = np.abs(grid.centers - shock.x0) > 0.1 * (nozzle.L - nozzle.l)
    return float(diff.max()), float(np.sum(diff[far]) * grid.dx)


def _orders(values):
    v = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return [float(x) for x in np.log2(v[:-1] / v[1:])]


def refinement_study(config, levels=3, drift_time=1.0, with_simulation=True):
    """Repeat the scenario at n, 2n, 4n, ... cells and nodes; return a convergence table."""
    if levels < 3:
        raise ValueError("refinement_study needs at least 3 levels")
    gas, nozzle, shock = build_shock(config)
    rows = []
    for k in range(levels):
        n_cells = config.n_cells * 2**k
        n_nodes = config.linear.n_nodes * 2**k
        cfg = config.with_overrides(n_cells=n_cells, linear={**asdict(config.linear), "n_nodes": n_nodes})
        rep = RunReport(scenario=cfg.to_dict())
        linear_suite(cfg, gas, shock, rep)
        drift_max, drift_l1 = steady_drift(gas, nozzle, shock, n_cells, drift_time, cfg.run.cfl)
        row = {"level": k, "n_cells": n_cells, "n_nodes": n_nodes,
               "identity_residual": rep.identity_residual,
               "coefficient_residual": rep.coefficient_residual,
               "steady_drift_max": drift_max, "steady_drift_l1": drift_l1,
               "lambda_fit": math.nan}
        if with_simulation:
            try:
                nonlinear_suite(cfg, gas, nozzle, shock, rep)
                row["lambda_fit"] = rep.lambda_fit
            except Q1DError as exc:
                row["error"] = type(exc).__name__
        rows.append(row)
    table = {"rows": rows}
    for key in ("identity_residual", "steady_drift_max", "steady_drift_l1"):
        table[f"order_{key}"] = _orders([r[key] for r in rows])
    lam = [r["lambda_fit"] for r in rows]
    table["lambda_fit_cauchy"] = [abs(lam[i] - lam[i + 1]) for i in range(len(lam) - 1)]
    return table
