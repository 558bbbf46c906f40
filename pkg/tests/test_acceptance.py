"""Acceptance criteria 1-10.

Each test records a PASS/FAIL line in RESULTS (printed by the terminal
summary hook in conftest.py) and then asserts.  Run directly with
``python tests/test_acceptance.py`` to get the lines without pytest.
"""

import math
import time

import numpy as np
import pytest

from q1dshock import linear
from q1dshock.config import load_config
from q1dshock.experiments import build_shock, run_scenario
from q1dshock.gas import GasLaw
from q1dshock.nozzle import Nozzle
from q1dshock.steady import BoundaryData, build_steady_shock, forward_outflow_density, rh_jump
from q1dshock.unsteady import FlowState, FVScheme, Grid, cfl_dt

RESULTS = {}


def record(k, ok, detail):
    RESULTS[k] = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[k])
    assert ok, RESULTS[k]


@pytest.fixture(scope="module")
def spectra():
    """Spectral reports for the bundled scenarios at the node counts used below."""
    out = {}
    for name, n in (("stable_iso", 400), ("stable_iso", 800), ("unstable_iso", 400)):
        cfg = load_config(name)
        gas, _, shock = build_shock(cfg)
        coeffs = linear.assemble_coefficients(gas, shock, n)
        t0 = time.perf_counter()
        ST, gram, info = linear.assemble_ST(coeffs)
        rep = linear.spectral_radius(ST, gram, info["T"])
        out[name, n] = (rep, coeffs, time.perf_counter() - t0)
    return out


def stable_run(shift):
    cfg = load_config("stable_iso").with_overrides(perturbation={"x0_shift": shift, "bump": "none",
                                                                 "epsilon": 0.0})
    t0 = time.perf_counter()
    rep = run_scenario(cfg, stages=("simulate",))
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def stable_runs():
    return {eps: stable_run(eps) for eps in (0.05, 1e-2, 1e-3)}


# ---------------------------------------------------------------------------

def test_criterion_01_steady_construction():
    cfg = load_config("stable_iso")
    gas, nozzle = cfg.gas_law(), cfg.build_nozzle()
    bc = cfg.boundary_data(gas, nozzle)
    t0 = time.perf_counter()
    shock = build_steady_shock(gas, nozzle, bc)
    elapsed = time.perf_counter() - t0
    rho_m = float(shock.minus.rho(shock.x0))
    rho_p = float(shock.plus.rho(shock.x0))
    # u = M / (a rho) must carry a constant isothermal Bernoulli sum u^2/2 + ln rho on each
    # branch and the branches must meet the boundary densities
    mass_res = abs(float(shock.minus.rho(nozzle.l)) - bc.rho_l)
    mass_res = max(mass_res, abs(float(shock.plus.rho(nozzle.L)) - bc.rho_r) / bc.rho_r)
    for branch, (xa, xb) in ((shock.minus, (nozzle.l, shock.x0)), (shock.plus, (shock.x0, nozzle.L))):
        x = np.linspace(xa, xb, 401)
        rho = branch.rho(x)
        u = shock.M / (nozzle.a(x) * rho)
        mass_res = max(mass_res, float(np.ptp(0.5 * u**2 + np.log(rho))))
    ok = (abs(shock.x0 - 2.0) < 1e-8 and shock.rh_residual < 1e-10 and rho_m < rho_p
          and mass_res < 1e-10 and elapsed < 1.0)
    record(1, ok, f"|x0-2|={abs(shock.x0 - 2):.2e} rh={shock.rh_residual:.1e} "
                  f"rho-={rho_m:.4f}<rho+={rho_p:.4f} mass={mass_res:.1e} t={elapsed:.2f}s")


def test_criterion_02_isothermal_jump():
    rng = np.random.default_rng(2)
    gas = GasLaw(1.0, 1.0)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        rho_m, u_m, a = rng.uniform(0.1, 5.0), rng.uniform(1.05, 6.0), rng.uniform(0.2, 5.0)
        M = rho_m * u_m * a
        rho_p = rh_jump(gas, M, a, rho_m)
        worst = max(worst, abs(rho_p * rho_m / (M / a) ** 2 - 1.0))
    elapsed = time.perf_counter() - t0
    record(2, worst < 1e-12 and elapsed < 1.0, f"max rel |rho+ rho- a^2 c^2/M^2 - 1|={worst:.1e} "
                                                f"t={elapsed:.2f}s")


def test_criterion_03_dissipation_identity():
    cfg = load_config("stable_iso")
    gas, _, shock = build_shock(cfg)
    res, times = [], []
    for n in (400, 800):
        t0 = time.perf_counter()
        coeffs = linear.assemble_coefficients(gas, shock, n)
        h1 = linear.compatible_bump(coeffs, cfg.linear.bump_center, cfg.linear.bump_width)
        res.append(linear.check_dissipation_identity(coeffs, h1, lambda x: 0.0 * x,
                                                     10.0 * coeffs.slow_transit()))
        times.append(time.perf_counter() - t0)
    ratio = res[0] / res[1]
    record(3, ratio >= 3.5 and max(times) < 30, f"residual {res[0]:.2e} -> {res[1]:.2e} "
                                                 f"ratio={ratio:.2f} t={max(times):.1f}s/level")


def test_criterion_04_coefficient_identity():
    gas, nozzle = GasLaw(1.0, 1.0), Nozzle.polynomial([1.0, 1.0], 1.0, 3.0)
    bc = BoundaryData(1.0, 2.0, forward_outflow_density(gas, nozzle, 1.0, 2.0, 2.0))
    res = []
    for spacing in (0.1, 0.05, 0.025, 0.0125):
        shock = build_steady_shock(gas, nozzle, bc, spacing=spacing)
        res.append(float(np.max(np.abs(linear.assemble_coefficients(gas, shock, 400)
                                        .identity_residual()))))
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    # cubic Hermite interpolant: its derivative converges at third order
    record(4, min(orders) > 2.5, "residual " + " -> ".join(f"{r:.2e}" for r in res)
                                 + " orders " + ", ".join(f"{o:.2f}" for o in orders))


def test_criterion_05_spectral_dichotomy(spectra):
    st, _, t_st = spectra["stable_iso", 400]
    st2, _, t_st2 = spectra["stable_iso", 800]
    un, coeffs_un, t_un = spectra["unstable_iso", 400]
    change = abs(st2.radius - st.radius) / st.radius
    ok = st.radius < 0.999 and un.radius > 1.0 - 2 * coeffs_un.h and change < 0.02
    record(5, ok and max(t_st, t_un) < 120,
           f"stable r={st.radius:.4f} unstable r={un.radius:.4f} "
           f"n400->800 change={change:.2%} t={max(t_st, t_un, t_st2):.1f}s")


def test_criterion_06_exponential_relaxation(stable_runs, spectra):
    rep, elapsed = stable_runs[0.05]
    lam0 = spectra["stable_iso", 400][0].lambda0
    rate = rep.linearized_shock_rate
    r2 = rep.fit.get("r2", math.nan)
    d_rate = abs(rep.lambda_fit - rate) / rate
    d_lam0 = abs(rep.lambda_fit - lam0) / lam0
    ok = rep.lambda_fit > 0 and r2 > 0.98 and d_rate < 0.25 and d_lam0 < 0.25 and elapsed < 120
    record(6, ok, f"lambda_fit={rep.lambda_fit:.4f} R2={r2:.4f} shock rate={rate:.4f} "
                  f"({d_rate:.1%}) lambda0={lam0:.4f} ({d_lam0:.1%}) t={elapsed:.0f}s")


def test_criterion_07_instability():
    cfg = load_config("unstable_iso")
    t0 = time.perf_counter()
    rep = run_scenario(cfg, stages=("simulate",))
    elapsed = time.perf_counter() - t0
    t = np.asarray(rep.trace["t"])
    y = np.abs(np.asarray(rep.trace["s"]) - rep.steady["x0"])
    # an early stop means the displacement limit was reached before five transits
    t_check = min(5.0 * rep.transit, t[-1])
    y_check = float(np.interp(t_check, t, y))
    ok = y_check > 2.0 * y[0] and elapsed < 120
    record(7, ok, f"|s-x0| {y[0]:.4f} -> {y_check:.4f} at t={t_check:.2f} "
                  f"(5 transits={5 * rep.transit:.2f}, {rep.stop_reason or 'ran to end'}) "
                  f"t={elapsed:.0f}s")


def test_criterion_08_lax_conditions(stable_runs):
    flags = {eps: rep.lax_all for eps, (rep, _) in stable_runs.items()}
    counts = {eps: len(rep.trace["lax_ok"]) for eps, (rep, _) in stable_runs.items()}
    record(8, all(flags.values()), "all samples hold: " + ", ".join(
        f"shift {eps:g}: {flags[eps]} ({counts[eps]} samples)" for eps in flags))


def test_criterion_09_amplitude_independence(stable_runs):
    lo, hi = stable_runs[1e-3][0], stable_runs[1e-2][0]
    diff = abs(lo.lambda_fit - hi.lambda_fit) / abs(hi.lambda_fit)
    record(9, diff < 0.10, f"lambda_fit(1e-3)={lo.lambda_fit:.4f} R2={lo.fit.get('r2', math.nan):.3f} "
                           f"lambda_fit(1e-2)={hi.lambda_fit:.4f} R2={hi.fit.get('r2', math.nan):.3f} "
                           f"diff={diff:.1%}")


def test_criterion_10_periodic_conservation():
    gas = GasLaw(1.0, 1.0)
    grid = Grid(0.0, 1.0, 200)
    x = grid.centers
    rho = 1.0 + 0.3 * np.exp(-100 * (x - 0.5) ** 2)
    m = 0.5 * rho + 0.1 * np.sin(2 * np.pi * x)
    scheme = FVScheme(gas, Nozzle.constant(0.0, 1.0), None, grid, boundary="periodic")
    state = FlowState(grid, 0.0, rho, m)
    mass0, mom0 = rho.sum(), m.sum()
    for _ in range(1000):
        state = scheme.step(state, cfl_dt(gas, state))
    d_mass = abs(state.rho.sum() - mass0) / mass0
    d_mom = abs(state.m.sum() - mom0) / abs(mom0)
    record(10, d_mass < 1e-12 and d_mom < 1e-12, f"mass {d_mass:.1e} momentum {d_mom:.1e} "
                                                 f"after 1000 steps")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
