"""Steady transonic shock solutions of the quasi-1D nozzle equations.

A steady flow has constant mass flux ``M = a rho u``; eliminating ``u`` from the
momentum balance leaves a scalar ODE for the density,

    rho' = (a'/a) * rho u^2 / (c^2(rho) - u^2),

which is singular on the sonic line.  A transonic shock solution is a
supersonic branch from the inflow, a stationary Rankine-Hugoniot jump at
``x0``, and a subsonic branch to the outflow.  ``build_steady_shock`` shoots on
``x0`` until the subsonic branch meets the prescribed outflow density.
"""

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import (BracketFailure, NoShockPosition, NonPositiveDensity,
                     NoSubsonicRoot, OutOfDomain, SonicSingularity)
from .gas import Regime, regime

SONIC_GUARD = 1e-6
ODE_RTOL = 1e-12


class Side(Enum):
    MINUS = "minus"
    PLUS = "plus"


class MultipleRoots(UserWarning):
    pass


@dataclass(frozen=True)
class BoundaryData:
    rho_l: float
    u_l: float
    rho_r: float

    def __post_init__(self):
        if not (self.rho_l > 0 and self.rho_r > 0):
            raise NonPositiveDensity("boundary densities must be positive")


def steady_rhs(gas, nozzle, M, x, rho, guard=SONIC_GUARD):
    """d(rho)/dx of the steady momentum balance at fixed mass flux M."""
    if not rho > 0:
        raise NonPositiveDensity(f"rho={rho} at x={x}")
    a = float(nozzle.a(x))
    u = M / (a * rho)
    c2 = float(gas.dp(rho))
    den = c2 - u * u
    if abs(den) < guard * c2:
        raise SonicSingularity(f"sonic point reached at x={x}")
    return float(nozzle.da(x)) / a * rho * u * u / den


def momentum_residual(gas, nozzle, M, x, rho, drho):
    """Residual of (M^2/(a rho))' + a p(rho)' = 0 given rho and rho' at x."""
    a = nozzle.a(x)
    da = nozzle.da(x)
    flux_term = -M * M * (da * rho + a * drho) / (a * rho) ** 2
    return flux_term + a * gas.dp(rho) * drho


@dataclass
class Branch:
    """Smooth density profile on [x_lo, x_hi] with a cubic Hermite interpolant."""

    gas: object
    nozzle: object
    M: float
    x: np.ndarray
    rho_samples: np.ndarray
    drho_samples: np.ndarray
    spline: object = field(default=None, repr=False)

    def __post_init__(self):
        order = np.argsort(self.x)
        self.x = np.asarray(self.x)[order]
        self.rho_samples = np.asarray(self.rho_samples)[order]
        self.drho_samples = np.asarray(self.drho_samples)[order]
        self.spline = CubicHermiteSpline(self.x, self.rho_samples, self.drho_samples,
                                         extrapolate=False)

    @property
    def x_lo(self):
        return float(self.x[0])

    @property
    def x_hi(self):
        return float(self.x[-1])

    def covers(self, x, slack=1e-12):
        x = np.asarray(x)
        return np.all((x >= self.x_lo - slack) & (x <= self.x_hi + slack))

    def _clip(self, x):
        if not self.covers(x):
            raise OutOfDomain(f"x outside branch domain [{self.x_lo}, {self.x_hi}]")
        return np.clip(x, self.x_lo, self.x_hi)

    def rho(self, x):
        return self.spline(self._clip(x))

    def drho(self, x):
        return self.spline(self._clip(x), 1)

    def u(self, x):
        x = self._clip(x)
        return self.M / (self.nozzle.a(x) * self.spline(x))

    def du(self, x):
        x = self._clip(x)
        a, rho = self.nozzle.a(x), self.spline(x)
        return -self.M * (self.nozzle.da(x) * rho + a * self.spline(x, 1)) / (a * rho) ** 2


def _branch_samples(x_start, x_end, spacing):
    n = max(int(np.ceil(abs(x_end - x_start) / spacing)), 8)
    return np.linspace(x_start, x_end, n + 1)


def integrate_branch(gas, nozzle, M, rho_start, x_start, x_end, spacing=None,
                     rtol=ODE_RTOL, guard=SONIC_GUARD, truncate=False):
    """Integrate the steady density ODE from x_start to x_end (either direction).

    Returns a Branch sampled on a uniform grid.  If the sonic guard is hit the
    call raises SonicSingularity, unless ``truncate`` is set, in which case the
    branch is cut just before the sonic point.
    """
    if not rho_start > 0:
        raise NonPositiveDensity(f"rho_start={rho_start}")
    a0 = float(nozzle.a(x_start))
    state = regime(gas, rho_start, M / (a0 * rho_start), tol=guard)
    if state is Regime.SONIC:
        raise SonicSingularity(f"start state at x={x_start} is sonic")
    if spacing is None:
        spacing = (nozzle.L - nozzle.l) / 4000.0

    def rhs(x, y):
        rho = y[0]
        a = float(nozzle.a(x))
        u = M / (a * rho)
        return [float(nozzle.da(x)) / a * rho * u * u / (float(gas.dp(rho)) - u * u)]

    def sonic(x, y):
        rho = y[0]
        if rho <= 0:
            return -1.0
        u = M / (float(nozzle.a(x)) * rho)
        c2 = float(gas.dp(rho))
        return abs(c2 - u * u) - guard * c2

    sonic.terminal = True

    if x_start == x_end:
        raise ValueError("empty integration interval")
    sol = solve_ivp(rhs, (x_start, x_end), [rho_start], method="RK45", rtol=rtol,
                    atol=rtol * 1e-3 * rho_start, events=sonic, dense_output=True)
    if not sol.success:
        raise SonicSingularity(f"integration failed: {sol.message}")
    x_reached = float(sol.t[-1])
    if sol.status == 1:
        if not truncate:
            raise SonicSingularity(f"branch reaches the sonic line at x={x_reached:.6g}")
        # back off one sample spacing from the singular point
        direction = np.sign(x_end - x_start)
        x_end = x_reached - direction * spacing
        if (x_end - x_start) * direction <= 0:
            raise SonicSingularity("branch is sonic immediately after the start point")
    xs = _branch_samples(x_start, x_end, spacing)
    rho = sol.sol(xs)[0]
    rho[0] = rho_start
    if np.any(rho <= 0):
        raise NonPositiveDensity("branch density became non-positive")
    drho = np.array([steady_rhs(gas, nozzle, M, x, r, guard=0.0) for x, r in zip(xs, rho)])
    return Branch(gas, nozzle, M, xs, rho, drho)


def _integrate_end(gas, nozzle, M, rho_start, x_start, x_end, rtol=ODE_RTOL, guard=SONIC_GUARD):
    """End value of a branch; NaN if the sonic guard is hit."""

    def rhs(x, y):
        rho = y[0]
        a = float(nozzle.a(x))
        u = M / (a * rho)
        return [float(nozzle.da(x)) / a * rho * u * u / (float(gas.dp(rho)) - u * u)]

    def sonic(x, y):
        rho = y[0]
        if rho <= 0:
            return -1.0
        u = M / (float(nozzle.a(x)) * rho)
        c2 = float(gas.dp(rho))
        return abs(c2 - u * u) - guard * c2

    sonic.terminal = True
    sol = solve_ivp(rhs, (x_start, x_end), [rho_start], method="RK45", rtol=rtol,
                    atol=rtol * 1e-3 * rho_start, events=sonic)
    if sol.status != 0:
        return np.nan
    return float(sol.y[0, -1])


def rh_jump(gas, M, a_at_shock, rho_minus):
    """Subsonic density behind a stationary shock with upstream density rho_minus.

    Solves p(r) + j^2/r = p(rho_minus) + j^2/rho_minus with j = M/a for the
    root r > rho_minus.
    """
    if not rho_minus > 0:
        raise NonPositiveDensity(f"rho_minus={rho_minus}")
    j = M / a_at_shock
    u_minus = j / rho_minus
    if regime(gas, rho_minus, u_minus) is not Regime.SUPERSONIC:
        raise NoSubsonicRoot(f"upstream state (rho={rho_minus}, u={u_minus}) is not supersonic")
    rho_sonic = gas.sonic_density(M, a_at_shock)
    target = gas.p(rho_minus) + j * j / rho_minus

    def f(r):
        return gas.p(r) + j * j / r - target

    lo = rho_sonic
    if not f(lo) < 0:
        raise NoSubsonicRoot("upstream state is too close to sonic for a distinct root")
    hi = 2.0 * rho_sonic
    for _ in range(200):
        if f(hi) > 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise BracketFailure("could not bracket the subsonic RH root")
    rho_plus = brentq(f, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)
    if not rho_plus > rho_minus:
        raise NoSubsonicRoot("RH root does not increase density")
    return rho_plus


def rh_residual(gas, M, a, rho_minus, rho_plus):
    """Relative mismatch of p + j^2/rho across a stationary jump."""
    j2 = (M / a) ** 2
    left = gas.p(rho_minus) + j2 / rho_minus
    right = gas.p(rho_plus) + j2 / rho_plus
    return abs(left - right) / abs(left)


@dataclass
class SteadyShock:
    gas: object
    nozzle: object
    bc: BoundaryData
    mass_flux: float
    x0: float
    delta: float
    minus: Branch
    plus: Branch
    candidate_roots: tuple = ()

    @property
    def M(self):
        return self.mass_flux

    @property
    def rho_minus_x0(self):
        return float(self.minus.rho(self.x0))

    @property
    def rho_plus_x0(self):
        return float(self.plus.rho(self.x0))

    @property
    def rh_residual(self):
        return rh_residual(self.gas, self.mass_flux, float(self.nozzle.a(self.x0)),
                           self.rho_minus_x0, self.rho_plus_x0)

    def branch(self, side):
        return self.minus if Side(side) is Side.MINUS else self.plus

    def density(self, x):
        """Piecewise steady density: minus branch left of x0, plus branch right."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left = x < self.x0
        out[left] = self.minus.rho(x[left])
        out[~left] = self.plus.rho(x[~left])
        return out

    def velocity(self, x):
        x = np.asarray(x, dtype=float)
        return self.mass_flux / (self.nozzle.a(x) * self.density(x))

    def summary(self):
        return {
            "x0": self.x0,
            "M": self.mass_flux,
            "rho_minus_at_x0": self.rho_minus_x0,
            "rho_plus_at_x0": self.rho_plus_x0,
            "rh_residual": self.rh_residual,
            "delta": self.delta,
            "candidate_roots": list(self.candidate_roots),
        }


def mass_flux(nozzle, bc):
    return float(nozzle.a(nozzle.l)) * bc.rho_l * bc.u_l


def shooting_residual(gas, nozzle, M, supersonic, x0, rho_r):
    """rho(L) - rho_r for a shock placed at x0; NaN when no valid branch exists."""
    rho_m = float(supersonic.rho(x0))
    try:
        rho_p = rh_jump(gas, M, float(nozzle.a(x0)), rho_m)
    except (NoSubsonicRoot, BracketFailure):
        return np.nan
    end = _integrate_end(gas, nozzle, M, rho_p, x0, nozzle.L)
    return end - rho_r


def build_steady_shock(gas, nozzle, bc, n_scan=48, delta=None, spacing=None):
    """Locate the shock position x0 that matches the outflow density bc.rho_r.

    The residual rho(L; x0) - rho_r is scanned on ``n_scan`` interior points;
    each sign change is refined with Brent's method.  If several are found the
    smallest x0 is returned and a MultipleRoots warning is emitted.
    """
    M = mass_flux(nozzle, bc)
    if regime(gas, bc.rho_l, bc.u_l) is not Regime.SUPERSONIC or bc.u_l <= 0:
        raise NoShockPosition("inflow state must be supersonic and moving right")
    l, L = nozzle.l, nozzle.L
    if delta is None:
        delta = 0.05 * (L - l)
    supersonic = integrate_branch(gas, nozzle, M, bc.rho_l, l, L + nozzle.margin,
                                  spacing=spacing, truncate=True)
    x_hi = min(L, supersonic.x_hi)
    xs = np.linspace(l, x_hi, n_scan + 2)[1:-1]
    res = np.array([shooting_residual(gas, nozzle, M, supersonic, x, bc.rho_r) for x in xs])
    ok = np.isfinite(res)
    if not np.any(ok):
        raise NoShockPosition("no admissible subsonic branch for any shock position")
    scale = max(bc.rho_r, 1.0)
    finite = res[ok]
    if np.ptp(finite) < 1e-9 * scale:
        raise NoShockPosition("shooting residual is flat: shock position is not unique",
                              non_unique=True)
    brackets = []
    for i in range(len(xs) - 1):
        if ok[i] and ok[i + 1] and res[i] * res[i + 1] <= 0:
            brackets.append((xs[i], xs[i + 1]))
    if not brackets:
        raise NoShockPosition("residual rho(L) - rho_r has no sign change on (l, L)")

    def g(x):
        return shooting_residual(gas, nozzle, M, supersonic, x, bc.rho_r)

    roots = []
    for lo, hi in brackets:
        if g(lo) == 0:
            r = lo
        elif g(hi) == 0:
            r = hi
        else:
            r = brentq(g, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
        if not roots or abs(r - roots[-1]) > 1e-10:
            roots.append(r)
    if len(roots) > 1:
        warnings.warn(f"{len(roots)} shock positions match the outflow density: {roots}",
                      MultipleRoots, stacklevel=2)
    x0 = roots[0]
    return assemble_shock(gas, nozzle, bc, M, x0, delta, spacing=spacing,
                          candidate_roots=tuple(roots))


def assemble_shock(gas, nozzle, bc, M, x0, delta, spacing=None, candidate_roots=()):
    """Integrate both branches around a known shock position x0 and extend them by delta."""
    l, L = nozzle.l, nozzle.L
    lo_ext = l - nozzle.margin
    hi_ext = L + nozzle.margin
    fwd = integrate_branch(gas, nozzle, M, bc.rho_l, l, min(x0 + delta, hi_ext),
                           spacing=spacing, truncate=True)
    back = integrate_branch(gas, nozzle, M, bc.rho_l, l, lo_ext, spacing=spacing, truncate=True)
    minus = _join(back, fwd)
    if minus.x_hi < x0:
        raise SonicSingularity("supersonic branch does not reach the shock position")
    rho_p = rh_jump(gas, M, float(nozzle.a(x0)), float(minus.rho(x0)))
    fwd_p = integrate_branch(gas, nozzle, M, rho_p, x0, hi_ext, spacing=spacing, truncate=True)
    if fwd_p.x_hi < L:
        raise SonicSingularity("subsonic branch reaches the sonic line before the outflow")
    back_p = integrate_branch(gas, nozzle, M, rho_p, x0, max(x0 - delta, lo_ext),
                              spacing=spacing, truncate=True)
    plus = _join(back_p, fwd_p)
    delta_eff = min(delta, minus.x_hi - x0, x0 - plus.x_lo)
    return SteadyShock(gas, nozzle, bc, M, float(x0), float(delta_eff), minus, plus,
                       candidate_roots=tuple(candidate_roots) or (float(x0),))


def _join(back, fwd):
    """Merge a backward and a forward branch sharing their start point."""
    # both are stored in ascending order; back ends where fwd starts
    x = np.concatenate([back.x[:-1], fwd.x])
    rho = np.concatenate([back.rho_samples[:-1], fwd.rho_samples])
    drho = np.concatenate([back.drho_samples[:-1], fwd.drho_samples])
    return Branch(fwd.gas, fwd.nozzle, fwd.M, x, rho, drho)


def steady_state_at(shock, x, side):
    """(rho, u) of the steady branch on ``side`` at x (extensions included)."""
    br = shock.branch(side)
    rho = br.rho(x)
    u = shock.mass_flux / (shock.nozzle.a(x) * rho)
    if np.ndim(rho) == 0:
        return float(rho), float(u)
    return rho, u


def forward_outflow_density(gas, nozzle, rho_l, u_l, x0):
    """Outflow density produced by placing the shock at x0 (used to set up scenarios)."""
    M = float(nozzle.a(nozzle.l)) * rho_l * u_l
    sup = integrate_branch(gas, nozzle, M, rho_l, nozzle.l, x0)
    rho_p = rh_jump(gas, M, float(nozzle.a(x0)), float(sup.rho_samples[-1]))
    end = _integrate_end(gas, nozzle, M, rho_p, x0, nozzle.L)
    if not np.isfinite(end):
        raise SonicSingularity("subsonic branch reaches the sonic line before the outflow")
    return end
