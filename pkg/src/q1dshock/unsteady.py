"""Shock-capturing finite-volume solver for quasi-1D isentropic flow.

Unknowns are cell averages of (rho, m = rho u) on a uniform grid.  The
balance law rho_t + m_x = -(a'/a) m, m_t + (m^2/rho + p)_x = -(a'/a) m^2/rho
is advanced with minmod-limited MUSCL reconstruction, the HLL flux and the
two-stage SSP Runge-Kutta method.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (FitWindowEmpty, MultipleShocks, NonPositiveDensity, OutOfDomain,
                     RegimeViolation, RHRepairFailed, ShockLost, VacuumFormed, Q1DError)
from .fitting import decay_fit
from .steady import rh_jump, rh_residual

N_GHOST = 2
RH_OFFSET = 3
MULTI_SHOCK_CELLS = 5


@dataclass(frozen=True)
class Grid:
    l: float
    L: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 16:
            raise ValueError("n_cells must be at least 16")
        if not self.L > self.l:
            raise ValueError("need l < L")

    @property
    def dx(self):
        return (self.L - self.l) / self.n_cells

    @property
    def centers(self):
        return self.l + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self):
        return self.l + np.arange(self.n_cells + 1) * self.dx

    def ghost_centers(self, side):
        k = np.arange(1, N_GHOST + 1)
        if side == "left":
            return self.l - (k - 0.5) * self.dx
        return self.L + (k - 0.5) * self.dx


@dataclass
class FlowState:
    grid: Grid
    t: float
    rho: np.ndarray
    m: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if self.rho.shape != (self.grid.n_cells,) or self.m.shape != self.rho.shape:
            raise ValueError("state arrays must have one entry per cell")
        if not np.all(self.rho > 0):
            raise NonPositiveDensity("cell density must stay positive")

    @property
    def u(self):
        return self.m / self.rho

    def copy(self):
        return FlowState(self.grid, self.t, self.rho.copy(), self.m.copy(), dict(self.meta))


@dataclass(frozen=True)
class PerturbationSpec:
    """Perturbed initial data: shock moved by x0_shift, subsonic density bumped by epsilon.

    bump is "smooth" (fixed compact bump at bump_center, a fraction of the
    subsonic interval), "random" (center, width and sign drawn from seed) or
    "none".  blend_width is the length over which the Rankine-Hugoniot repair
    at the new shock position fades into the bumped profile.
    """
    epsilon: float = 0.0
    x0_shift: float = 0.0
    bump: str = "smooth"
    bump_center: float = 0.5
    bump_width: float = 0.2
    blend_width: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.bump not in ("smooth", "random", "none"):
            raise ValueError(f"unknown bump kind {self.bump!r}")
        if not 0 < self.bump_width <= 0.5:
            raise ValueError("bump_width must lie in (0, 0.5]")
        if not self.blend_width > 0:
            raise ValueError("blend_width must be positive")


def source_term(nozzle, x, rho, m):
    """Geometric source (-(a'/a) m, -(a'/a) m^2/rho)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise NonPositiveDensity("source_term needs rho > 0")
    g = nozzle.da(x) / nozzle.a(x)
    m = np.asarray(m, dtype=float)
    return -g * m, -g * m * m / rho


def physical_flux(gas, rho, m):
    return m, m * m / rho + gas.p(rho)


def numerical_flux(gas, left, right):
    """HLL flux with signal speeds min(u - c) and max(u + c) over both states."""
    rl, ml = (np.asarray(v, dtype=float) for v in left)
    rr, mr = (np.asarray(v, dtype=float) for v in right)
    if np.any(rl <= 0) or np.any(rr <= 0):
        raise NonPositiveDensity("numerical_flux needs rho > 0 on both sides")
    ul, ur = ml / rl, mr / rr
    cl, cr = np.sqrt(gas.dp(rl)), np.sqrt(gas.dp(rr))
    sl = np.minimum(ul - cl, ur - cr)
    sr = np.maximum(ul + cl, ur + cr)
    fl = physical_flux(gas, rl, ml)
    fr = physical_flux(gas, rr, mr)
    out = []
    for f_l, f_r, q_l, q_r in ((fl[0], fr[0], rl, rr), (fl[1], fr[1], ml, mr)):
        hll = (sr * f_l - sl * f_r + sl * sr * (q_r - q_l)) / np.where(sr > sl, sr - sl, 1.0)
        out.append(np.where(sl >= 0, f_l, np.where(sr <= 0, f_r, hll)))
    return out[0], out[1]


def _steady_side(branch, nozzle, M, x):
    """Steady (rho, m) on a branch, clamped to the sampled range."""
    xc = np.clip(x, branch.x_lo, branch.x_hi)
    return branch.rho(xc), M / nozzle.a(np.clip(x, nozzle.l - nozzle.margin, nozzle.L + nozzle.margin))


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _van_albada(a, b, eps=1e-30):
    return np.where(a * b > 0, a * b * (a + b) / (a * a + b * b + eps), 0.0)


LIMITERS = {"minmod": _minmod, "vanalbada": _van_albada}


class FVScheme:
    """Grid-dependent constants of the finite-volume update, computed once.

    boundary is "physical" (steady supersonic inflow, fixed outflow density)
    or "periodic" (test mode for conservation checks).
    """

    def __init__(self, gas, nozzle, shock, grid, boundary="physical", limiter="minmod"):
        if boundary not in ("physical", "periodic"):
            raise ValueError(f"unknown boundary mode {boundary!r}")
        if limiter not in LIMITERS:
            raise ValueError(f"unknown limiter {limiter!r}")
        self.limit = LIMITERS[limiter]
        self.gas, self.nozzle, self.shock, self.grid = gas, nozzle, shock, grid
        self.boundary = boundary
        x = grid.centers
        self.x = x
        self.geom = nozzle.da(x) / nozzle.a(x)
        self.has_source = bool(np.any(self.geom != 0))
        if boundary == "physical":
            M = shock.M
            self.left = _steady_side(shock.minus, nozzle, M, grid.ghost_centers("left"))
            self.mirror = grid.n_cells - 1 - np.arange(N_GHOST)
            self.right = _steady_side(shock.plus, nozzle, M, grid.ghost_centers("right"))
            self.right_ref = _steady_side(shock.plus, nozzle, M, x[self.mirror])

    def ghosts(self, rho, m, check=True):
        gas = self.gas
        if check:
            if not abs(m[0] / rho[0]) > np.sqrt(gas.dp(rho[0])):
                raise RegimeViolation("inflow cell became subsonic")
            if not abs(m[-1] / rho[-1]) < np.sqrt(gas.dp(rho[-1])):
                raise RegimeViolation("outflow cell became supersonic")
        rg, mg = self.right
        rm, mm = self.right_ref
        rho_r = rg - (rho[self.mirror] - rm)
        m_r = mg + (m[self.mirror] - mm)
        if np.any(rho_r <= 0):
            raise VacuumFormed("outflow ghost density non-positive")
        return self.left, (rho_r, m_r)

    def padded(self, rho, m):
        if self.boundary == "periodic":
            g = N_GHOST
            return (np.concatenate([rho[-g:], rho, rho[:g]]),
                    np.concatenate([m[-g:], m, m[:g]]))
        (rl, ml), (rr, mr) = self.ghosts(rho, m)
        return (np.concatenate([rl[::-1], rho, rr]), np.concatenate([ml[::-1], m, mr]))

    def residual(self, rho, m):
        """Semi-discrete right-hand side for cell averages."""
        R, Mo = self.padded(rho, m)
        faces = []
        for q in (R, Mo):
            d = np.diff(q)
            slope = self.limit(d[:-1], d[1:])  # padded cells 1 .. n+2
            qc = q[1:-1]
            # the n+1 physical faces sit between consecutive padded cells 1 .. n+2
            faces.append(((qc + 0.5 * slope)[:-1], (qc - 0.5 * slope)[1:]))
        (rl, rr), (ml, mr) = faces
        if np.any(rl <= 0) or np.any(rr <= 0):
            raise VacuumFormed("reconstructed density non-positive")
        fr, fm = numerical_flux(self.gas, (rl, ml), (rr, mr))
        dx = self.grid.dx
        dr = -(fr[1:] - fr[:-1]) / dx
        dm = -(fm[1:] - fm[:-1]) / dx
        if self.has_source:
            dr = dr - self.geom * m
            dm = dm - self.geom * m * m / rho
        return dr, dm

    def step(self, state, dt):
        """One SSP-RK2 step; raises VacuumFormed if density loses positivity."""
        r0, m0 = state.rho, state.m
        k_r, k_m = self.residual(r0, m0)
        r1, m1 = r0 + dt * k_r, m0 + dt * k_m
        if not np.all(r1 > 0) or not np.all(np.isfinite(m1)):
            raise VacuumFormed("density lost positivity in stage 1")
        k_r, k_m = self.residual(r1, m1)
        r2 = 0.5 * r0 + 0.5 * (r1 + dt * k_r)
        m2 = 0.5 * m0 + 0.5 * (m1 + dt * k_m)
        if not np.all(r2 > 0) or not np.all(np.isfinite(m2)):
            raise VacuumFormed("density lost positivity in stage 2")
        return FlowState(self.grid, state.t + dt, r2, m2, state.meta)

    def conservative_residual(self, rho, m):
        """First-order update of (a rho, a m) divided back by a.

        In these variables the geometric source reduces to p a' in the
        momentum equation; used as an independent check of the source form.
        """
        R, Mo = self.padded(rho, m)
        q_r, q_m = R[1:-1], Mo[1:-1]
        fr, fm = numerical_flux(self.gas, (q_r[:-1], q_m[:-1]), (q_r[1:], q_m[1:]))
        nozzle, dx = self.nozzle, self.grid.dx
        af = nozzle.a(self.grid.faces)
        a = nozzle.a(self.x)
        d_ar = -(af[1:] * fr[1:] - af[:-1] * fr[:-1]) / dx
        d_am = (-(af[1:] * fm[1:] - af[:-1] * fm[:-1]) + self.gas.p(rho) * (af[1:] - af[:-1])) / dx
        return d_ar / a, d_am / a


def ghost_cells(gas, shock, grid, rho, m, check=True):
    """Ghost cells: steady supersonic inflow on the left, rho = rho_r at x = L.

    Right ghosts mirror the interior deviation from the steady subsonic profile
    antisymmetrically in density (so the face density equals rho_r) and
    symmetrically in momentum (zero-gradient velocity perturbation).
    Returns ((rho, m) left ghosts ordered outward, (rho, m) right ghosts ordered outward).
    """
    return FVScheme(gas, shock.nozzle, shock, grid).ghosts(rho, m, check)


def apply_boundaries(gas, shock, state, check=True):
    """Ghost states for a FlowState; see ghost_cells."""
    return ghost_cells(gas, shock, state.grid, state.rho, state.m, check)


def cfl_dt(gas, state, cfl=0.45):
    """cfl * dx / max(|u| + c)."""
    if not 0 < cfl < 1:
        raise ValueError("cfl must lie in (0, 1)")
    speed = np.max(np.abs(state.u) + np.sqrt(gas.dp(state.rho)))
    return cfl * state.grid.dx / speed


def step(gas, nozzle, shock, state, dt, boundary="physical", scheme=None):
    """One MUSCL/HLL/SSP-RK2 step of the balance law."""
    scheme = scheme or FVScheme(gas, nozzle, shock, state.grid, boundary)
    return scheme.step(state, dt)


def _cell_average(func, grid, x_split=None, order=4):
    """Gauss-Legendre cell averages, splitting the cell that contains x_split."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    lo, hi = grid.faces[:-1], grid.faces[1:]

    def integrate(a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid[:, None] + half[:, None] * xg[None, :]
        vals = func(pts)
        return (vals * wg[None, :]).sum(axis=1) * half

    if x_split is None:
        return integrate(lo, hi) / grid.dx
    split = np.clip(x_split, lo, hi)
    return (integrate(lo, split) + integrate(split, hi)) / grid.dx


def _smooth_bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _fade(xi):
    """Smooth step from 1 at xi <= 0 to 0 at xi >= 1."""
    xi = np.clip(np.asarray(xi, dtype=float), 0.0, 1.0)
    f = lambda z: np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)
    return f(1.0 - xi) / (f(1.0 - xi) + f(xi))


def bump_profile(shock, spec):
    """Subsonic density bump as a callable of x (amplitude 1 before epsilon)."""
    x0, L = shock.x0, shock.nozzle.L
    if spec.bump == "none" or spec.epsilon == 0:
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    center, width, sign = spec.bump_center, spec.bump_width, 1.0
    if spec.bump == "random":
        rng = np.random.default_rng(spec.seed)
        width = rng.uniform(0.1, 0.3)
        center = rng.uniform(width, 1.0 - width)
        sign = rng.choice([-1.0, 1.0])
    xc = x0 + center * (L - x0)
    w = width * (L - x0)
    return lambda x: sign * _smooth_bump((np.asarray(x) - xc) / w)


def initial_profiles(shock, spec):
    """Pointwise initial (rho, m) and the interface data at the new shock position."""
    gas, nozzle, M = shock.gas, shock.nozzle, shock.M
    xs = shock.x0 + spec.x0_shift
    if not (nozzle.l < xs < nozzle.L):
        raise OutOfDomain("shifted shock leaves the nozzle")
    if not (shock.minus.covers(xs) and shock.plus.covers(xs)):
        raise OutOfDomain("shift exceeds the steady branch extensions")
    rho_minus = float(shock.minus.rho(xs))
    a_s = float(nozzle.a(xs))
    try:
        rho_rh = rh_jump(gas, M, a_s, rho_minus)
    except Q1DError as exc:
        raise RHRepairFailed(f"no subsonic RH state at {xs}: {exc}") from None
    bump = bump_profile(shock, spec)
    eps = spec.epsilon
    base_at_s = float(shock.plus.rho(xs)) + eps * float(bump(np.array([xs]))[0])
    jump_fix = rho_rh - base_at_s
    blend = spec.blend_width * (nozzle.L - nozzle.l)

    def rho(x):
        x = np.asarray(x, dtype=float)
        up = shock.minus.rho(np.clip(x, shock.minus.x_lo, shock.minus.x_hi))
        xd = np.clip(x, shock.plus.x_lo, shock.plus.x_hi)
        down = shock.plus.rho(xd) + eps * bump(x) + jump_fix * _fade((x - xs) / blend)
        return np.where(x < xs, up, down)

    def m(x):
        return M / nozzle.a(np.asarray(x, dtype=float))

    interface = {"x_shock": xs, "rho_minus": rho_minus, "rho_plus": rho_rh,
                 "m": M / a_s, "rh_residual": rh_residual(gas, M, a_s, rho_minus, rho_rh)}
    return rho, m, interface


def perturb_initial(shock, spec, grid):
    """Cell averages of the perturbed data; exact steady data when spec is trivial."""
    rho, m, interface = initial_profiles(shock, spec)
    if np.any(rho(grid.centers) <= 0):
        raise NonPositiveDensity("perturbed density non-positive")
    xs = interface["x_shock"]
    r = _cell_average(rho, grid, xs)
    mm = _cell_average(m, grid)
    return FlowState(grid, 0.0, r, mm, {"interface": interface})


def steady_state(shock, grid):
    return perturb_initial(shock, PerturbationSpec(), grid)


def _crossings(state, level):
    r = state.rho
    up = np.nonzero((r[:-1] < level) & (r[1:] >= level))[0]
    return up


def locate_shock(shock, state, method="midpoint", window=6):
    """Shock position and RH speed estimate.

    method "midpoint": upward crossing of the mean of the two steady shock
    densities, linearly interpolated between cell centers.  "gradient": center
    of the steepest density increase.  "integral": position for which the
    steady two-branch profile holds the same mass as the numerical solution in
    a window of +-window cells around the midpoint crossing.
    """
    grid = state.grid
    level = 0.5 * (shock.rho_minus_x0 + shock.rho_plus_x0)
    idx = _crossings(state, level)
    if idx.size == 0:
        raise ShockLost("no upward crossing of the mid-shock density")
    if idx.max() - idx.min() > MULTI_SHOCK_CELLS:
        raise MultipleShocks(f"crossings at cells {idx.tolist()}")
    jumps = state.rho[idx + 1] - state.rho[idx]
    i = int(idx[np.argmax(jumps)])
    xc = grid.centers
    r = state.rho
    s = xc[i] + (level - r[i]) / (r[i + 1] - r[i]) * grid.dx
    if method == "gradient":
        lo, hi = max(i - 3, 0), min(i + 4, grid.n_cells - 1)
        j = lo + int(np.argmax(np.diff(r[lo:hi + 1])))
        s = 0.5 * (xc[j] + xc[j + 1])
    elif method == "integral":
        s = _integral_position(shock, state, i, window, s)
    elif method != "midpoint":
        raise ValueError(f"unknown locator {method!r}")
    if not (grid.l < s < grid.L):
        raise ShockLost("shock position left the domain")
    return float(s), shock_speed(state, i)


def _integral_position(shock, state, i, window, s_guess):
    grid = state.grid
    lo = max(i - window, 0)
    hi = min(i + 1 + window, grid.n_cells - 1)
    xa, xb = grid.faces[lo], grid.faces[hi + 1]
    mass = grid.dx * np.sum(state.rho[lo:hi + 1])
    if not (shock.minus.covers([xa, xb]) and shock.plus.covers([xa, xb])):
        return s_guess
    xg, wg = np.polynomial.legendre.leggauss(8)

    def quad(branch, a, b):
        if b <= a:
            return 0.0
        pts = 0.5 * (a + b) + 0.5 * (b - a) * xg
        return 0.5 * (b - a) * float(np.dot(wg, branch.rho(pts)))

    # mass of the steady two-branch profile is monotone decreasing in s
    s = s_guess
    for _ in range(30):
        g = quad(shock.minus, xa, s) + quad(shock.plus, s, xb) - mass
        dg = float(shock.minus.rho(s) - shock.plus.rho(s))
        step_ = g / dg
        s = min(max(s - step_, xa), xb)
        if abs(step_) < 1e-14 * (1 + abs(s)):
            break
    return s


def shock_speed(state, i, offset=RH_OFFSET):
    """[m]/[rho] from cells offset cells away from the crossing at cells (i, i+1)."""
    iL = max(i - offset + 1, 0)
    iR = min(i + offset, state.grid.n_cells - 1)
    dr = state.rho[iR] - state.rho[iL]
    return float((state.m[iR] - state.m[iL]) / dr)


def side_states(state, shock, offset=RH_OFFSET):
    """(rho, m) just upstream and downstream of the captured shock layer."""
    level = 0.5 * (shock.rho_minus_x0 + shock.rho_plus_x0)
    idx = _crossings(state, level)
    if idx.size == 0:
        raise ShockLost("no upward crossing of the mid-shock density")
    i = int(idx[np.argmax(state.rho[idx + 1] - state.rho[idx])])
    iL = max(i - offset + 1, 0)
    iR = min(i + offset, state.grid.n_cells - 1)
    return (state.rho[iL], state.m[iL]), (state.rho[iR], state.m[iR])


def lax_margins(gas, left, right, sdot):
    """Signed margins of the three Lax inequalities."""
    rl, ml = left
    rr, mr = right
    if rl <= 0 or rr <= 0:
        raise NonPositiveDensity("check_lax needs positive densities")
    ul, ur = ml / rl, mr / rr
    cl, cr = np.sqrt(gas.dp(rl)), np.sqrt(gas.dp(rr))
    return ((ul - cl) - sdot, sdot - (ur - cr), (ur + cr) - sdot)


def check_lax(gas, left, right, sdot, tol=0.0):
    """(u-c)(left) > sdot > (u-c)(right) and (u+c)(right) > sdot, each by more than tol."""
    return bool(all(mg > tol for mg in lax_margins(gas, left, right, sdot)))


class SteadyReference:
    """Steady profiles sampled on a grid, shared by repeated diagnostics."""

    def __init__(self, shock, grid):
        self.grid = grid
        x = grid.centers
        nozzle, plus = shock.nozzle, shock.plus
        self.a = nozzle.a(x)
        self.cell_rho = _cell_average(lambda y: shock.density(y), grid, shock.x0)
        xp = np.clip(x, plus.x_lo, plus.x_hi)
        self.rho_plus = plus.rho(xp)
        self.u_plus = plus.u(xp)
        self.csq_plus = shock.gas.dp(self.rho_plus)
        x0 = shock.x0
        u_p, u_m = float(plus.u(x0)), float(shock.minus.u(x0))
        self.weight = float(nozzle.da(x0)) * u_p**2 * u_m / float(nozzle.a(x0))
        self.M = shock.M


def psi_diagnostic(shock, state, s, skip=RH_OFFSET, upstream=10, reference=None):
    """Potential perturbation downstream of the shock and its energy E0.

    Psi(x) is the running integral of a (rho - rho_steady) starting upstream
    of the shock, where rho_steady is the steady profile with its jump at x0;
    this equals the shock-anchored potential difference and needs no
    resolution of the captured layer.  Psi_t = M - a m.  E0 uses the x0
    boundary weight with the Psi value at the first cell past the layer.
    Returns (x, Psi, E0).
    """
    grid = state.grid
    ref = reference or SteadyReference(shock, grid)
    x = grid.centers
    i_up = max(int(np.searchsorted(x, s)) - upstream, 0)
    defect = ref.a * (state.rho - ref.cell_rho) * grid.dx
    defect[:i_up] = 0.0
    psi = np.cumsum(defect) - 0.5 * defect  # midpoint rule at cell centers
    keep = x > s + skip * grid.dx
    if not np.any(keep):
        raise ShockLost("no cells downstream of the shock layer")
    psi_x = ref.a[keep] * (state.rho[keep] - ref.rho_plus[keep])
    psi_t = ref.M - ref.a[keep] * state.m[keep]
    ub, csq = ref.u_plus[keep], ref.csq_plus[keep]
    interior = np.sum(ub * (psi_t**2 + (csq - ub**2) * psi_x**2)) * grid.dx
    psi_k = psi[keep]
    return x[keep], psi_k, float(ref.weight * psi_k[0] ** 2 + interior)


@dataclass
class ShockTrace:
    x0: float
    t: list = field(default_factory=list)
    s: list = field(default_factory=list)
    sdot: list = field(default_factory=list)
    lax_ok: list = field(default_factory=list)
    E0: list = field(default_factory=list)
    lambda_fit: float = float("nan")
    C_fit: float = float("nan")
    fit: object = None
    stop_reason: str = ""
    error: object = None
    reference_error: object = None  # set when the unperturbed reference run ended early

    def arrays(self):
        return np.array(self.t), np.array(self.s), np.array(self.sdot)

    def displacement(self):
        return np.array(self.s) - self.x0


@dataclass
class PsiLedger:
    t: list = field(default_factory=list)
    E0: list = field(default_factory=list)


@dataclass
class SimulationOptions:
    """Numerical knobs of a nonlinear run; defaults are used by the CLI scenarios."""
    n_cells: int = 800
    cfl: float = 0.45
    sample_dt: float = 0.05
    snapshot_times: tuple = ()
    locator: str = "integral"
    fit_model: str = "damped"
    transient: float = 1.0  # in slow transits of [x0, L]
    noise_cells: float = 0.0
    stop_displacement: float = float("inf")
    reference: bool = True
    limiter: str = "minmod"


def transit_time(shock):
    """Slow transit (L - x0)/min(c - u) over the subsonic steady branch."""
    x = np.linspace(shock.x0, shock.nozzle.L, 401)
    u = shock.plus.u(x)
    c = np.sqrt(shock.gas.dp(shock.plus.rho(x)))
    return float((shock.nozzle.L - shock.x0) / np.min(c - u))


def _near_boundary(s, grid, fraction=0.05):
    span = grid.L - grid.l
    return min(s - grid.l, grid.L - s) < fraction * span


RUN_ENDING_ERRORS = (ShockLost, MultipleShocks, RegimeViolation, VacuumFormed)


def _run(gas, nozzle, shock, state, t_end, opts, record, tolerate_errors=False):
    """Step and sample; returns (state, stop_reason, error or None).

    With tolerate_errors, a solver or locator failure after the first sample
    ends the run and is reported instead of raised.
    """
    scheme = FVScheme(gas, nozzle, shock, state.grid, limiter=opts.limiter)
    t_next = 0.0
    first = True
    try:
        while True:
            if state.t >= t_next - 1e-12:
                if not record(state):
                    return state, "left linear regime", None
                first = False
                t_next += opts.sample_dt
            if state.t >= t_end - 1e-12:
                return state, "t_end", None
            dt = min(cfl_dt(gas, state, opts.cfl), t_next - state.t, t_end - state.t)
            state = scheme.step(state, dt)
    except RUN_ENDING_ERRORS as exc:
        if first or not tolerate_errors:
            raise
        return state, f"{type(exc).__name__}: {exc}", exc


def simulate(gas, nozzle, shock, spec, t_end, cfl=0.45, options=None):
    """Run the perturbed flow to t_end and fit the shock-relaxation rate.

    Returns (ShockTrace, snapshots, PsiLedger).  With options.reference the
    unperturbed steady data are evolved alongside and the displacement is
    measured against that reference trace, which cancels the O(dx) offset of
    the captured equilibrium.  Sampling stops early once the displacement
    exceeds options.stop_displacement.
    """
    opts = options or SimulationOptions()
    if cfl != opts.cfl:
        opts = SimulationOptions(**{**opts.__dict__, "cfl": cfl})
    grid = Grid(nozzle.l, nozzle.L, opts.n_cells)
    state = perturb_initial(shock, spec, grid)
    lax_tol = -2.0 * grid.dx  # dx-proportional band around the strict inequalities

    ref_s = None
    reference_error = None
    if opts.reference:
        ref_s = []
        ref0 = steady_state(shock, grid)

        def ref_record(st):
            ref_s.append(locate_shock(shock, st, opts.locator)[0])
            return True

        _, _, ref_err = _run(gas, nozzle, shock, ref0, t_end, opts, ref_record, tolerate_errors=True)
        if ref_err is not None:
            # around an unstable equilibrium the reference drifts away too; measure raw positions
            reference_error = f"{type(ref_err).__name__}: {ref_err}"
            ref_s = None

    steady_ref = SteadyReference(shock, grid)
    trace = ShockTrace(shock.x0, reference_error=reference_error)
    psi_ledger = PsiLedger()
    snapshots = {}
    pending = sorted(opts.snapshot_times)

    def record(st):
        s, sdot = locate_shock(shock, st, opts.locator)
        k = len(trace.t)
        s_eff = s - (ref_s[k] - shock.x0) if ref_s is not None else s
        left, right = side_states(st, shock)
        ok = check_lax(gas, left, right, sdot, tol=lax_tol)
        _, _, e0 = psi_diagnostic(shock, st, s, reference=steady_ref)
        trace.t.append(st.t)
        trace.s.append(s_eff)
        trace.sdot.append(sdot)
        trace.lax_ok.append(ok)
        trace.E0.append(e0)
        psi_ledger.t.append(st.t)
        psi_ledger.E0.append(e0)
        while pending and st.t >= pending[0] - 1e-12:
            snapshots[pending.pop(0)] = (grid.centers.copy(), st.rho.copy(), st.u.copy())
        return abs(s_eff - shock.x0) <= opts.stop_displacement

    state, reason, err = _run(gas, nozzle, shock, state, t_end, opts, record, tolerate_errors=True)
    if isinstance(err, RegimeViolation) and _near_boundary(trace.s[-1], grid):
        # a boundary cell flips regime when the shock runs into it
        err = ShockLost(f"shock left the domain near x={trace.s[-1]:.4g} ({err})")
        reason = f"ShockLost: {err}"
    trace.stop_reason = reason
    trace.error = type(err).__name__ if err is not None else None
    fit_trace(trace, shock, grid, opts)
    return trace, snapshots, psi_ledger


def fit_trace(trace, shock, grid, opts):
    """Fit the displacement after the transient; stores lambda_fit and C_fit."""
    t = np.array(trace.t)
    y = trace.displacement()
    t_start = opts.transient * transit_time(shock)
    sel = t >= t_start
    if opts.noise_cells > 0:
        sel &= np.abs(y) >= opts.noise_cells * grid.dx
    if np.count_nonzero(sel) < 10:
        trace.fit = None
        return trace
    try:
        fit = decay_fit(t[sel], y[sel], model=opts.fit_model)
    except FitWindowEmpty:
        trace.fit = None
        return trace
    trace.fit = fit
    trace.lambda_fit = fit.lam
    trace.C_fit = fit.C
    return trace
