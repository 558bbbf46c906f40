"""Linearised shock-front problem for the potential perturbation Psi.

On the subsonic side [x0, L] the perturbation Psi of the mass potential solves

    Psi_tt + 2 u Psi_tx + (u^2 - c^2) Psi_xx + 2 u' Psi_t + B Psi_x = 0,
    Psi_x = d1 Psi_t + e1 Psi   at x = x0,
    Psi_x = 0                    at x = L,

with B = (a'/a) c^2 - (c^2)' + (u^2)'.  The energy

    E = (a' u+^2 u- / a)(x0) Psi(x0)^2 + int u [Psi_t^2 + (c^2 - u^2) Psi_x^2] dx

decreases by exactly D = 2 int u^2 Psi_t^2 |_{x0, L} dt.

Discretisation: nodes x_j = x0 + j h, unknowns (Psi, V = Psi_t).  Multiplying
the equation by u and using B u = -(u (c^2 - u^2))' gives the split form

    u V_t = -(u^2 V_x + (u^2 V)_x) + (u k Psi_x)_x,       k = c^2 - u^2,

which is discretised with a second-order summation-by-parts first derivative
(trapezoid norm) for the advective pair and a compact flux-form second
derivative for the elastic term.  The x0 boundary condition enters through the
boundary flux.  The resulting semi-discrete system satisfies the discrete
analogue of E + D = const exactly; the small consistency term
(B + (u k)'/u) Psi_x is added so the scheme still discretises the operator
with the coefficient B as given.  Time stepping is classical RK4, which is
stable on the imaginary axis.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, OutOfDomain, StabilityViolation

DENSE_CAP = 2000


@dataclass
class LinearizedCoefficients:
    x: np.ndarray
    h: float
    ubar: np.ndarray
    dubar: np.ndarray
    csq: np.ndarray
    B: np.ndarray
    flux_slope: np.ndarray  # d/dx [u (c^2 - u^2)] from the branch interpolant
    x_mid: np.ndarray
    K_mid: np.ndarray  # u (c^2 - u^2) at cell midpoints
    d1: float
    e1: float
    boundary_weight: float  # a' u+^2 u- / a at x0
    ubar_minus_x0: float
    x0: float
    L: float

    @property
    def n(self):
        return len(self.x) - 1

    @property
    def k(self):
        return self.csq - self.ubar**2

    @property
    def max_speed(self):
        return float(np.max(self.ubar + np.sqrt(self.csq)))

    def slow_transit(self):
        """(L - x0) / min(c - u): time for an upstream acoustic wave to cross."""
        return float((self.L - self.x0) / np.min(np.sqrt(self.csq) - self.ubar))

    def identity_residual(self):
        """B u + (u (c^2 - u^2))' on the nodes; zero for an exact steady branch."""
        return self.B * self.ubar + self.flux_slope


def _subsonic_profiles(gas, nozzle, branch, x):
    rho = branch.rho(x)
    drho = branch.drho(x)
    u = branch.u(x)
    du = branch.du(x)
    a, da = nozzle.a(x), nozzle.da(x)
    csq = gas.dp(rho)
    dcsq = gas.d2p(rho) * drho
    B = da / a * csq - dcsq + 2.0 * u * du
    k = csq - u * u
    flux_slope = du * k + u * (dcsq - 2.0 * u * du)
    return u, du, csq, B, flux_slope


def assemble_coefficients(gas, shock, n=400):
    """Sample the linearised coefficients on n uniform intervals of [x0, L]."""
    nozzle = shock.nozzle
    x0, L = shock.x0, nozzle.L
    if not shock.plus.covers([x0, L]):
        raise OutOfDomain("subsonic branch does not cover [x0, L]")
    x = np.linspace(x0, L, n + 1)
    h = (L - x0) / n
    u, du, csq, B, flux_slope = _subsonic_profiles(gas, nozzle, shock.plus, x)
    x_mid = 0.5 * (x[1:] + x[:-1])
    um, _, cm, _, _ = _subsonic_profiles(gas, nozzle, shock.plus, x_mid)
    K_mid = um * (cm - um * um)
    a0, da0 = float(nozzle.a(x0)), float(nozzle.da(x0))
    u_minus = float(shock.minus.u(x0))
    k0 = csq[0] - u[0] ** 2
    d1 = 2.0 * u[0] / k0
    e1 = da0 * u[0] * u_minus / (k0 * a0)
    weight = da0 * u[0] ** 2 * u_minus / a0
    return LinearizedCoefficients(x, h, u, du, csq, B, flux_slope, x_mid, K_mid,
                                  float(d1), float(e1), float(weight), u_minus, x0, L)


@dataclass
class LinearState:
    t: float
    psi: np.ndarray
    psi_t: np.ndarray

    def stacked(self):
        return np.concatenate([self.psi, self.psi_t], axis=0)


@dataclass
class EnergyLedger:
    t: list = field(default_factory=list)
    E: list = field(default_factory=list)
    D: list = field(default_factory=list)

    def append(self, t, E, D):
        self.t.append(t)
        self.E.append(E)
        self.D.append(D)

    def arrays(self):
        return np.array(self.t), np.array(self.E), np.array(self.D)

    def identity_residual(self):
        _, E, D = self.arrays()
        return np.abs(E + D - E[0]) / E[0] if E[0] != 0 else np.abs(E + D - E[0])


class LinearOperator:
    """Semi-discrete generator A with d/dt (Psi, V) = A (Psi, V)."""

    def __init__(self, coeffs, frozen_ends=False):
        self.coeffs = coeffs
        self.frozen_ends = frozen_ends
        self.A = self._assemble()

    def _assemble(self):
        c = self.coeffs
        n, h = c.n, c.h
        N = n + 1
        u = c.ubar
        w = u * u
        H = np.full(N, h)
        H[0] = H[-1] = 0.5 * h

        # SBP first derivative: central interior, one-sided first-order rows at the ends
        main = np.zeros(N)
        main[0], main[-1] = -1.0 / h, 1.0 / h
        upper = np.full(N - 1, 0.5 / h)
        upper[0] = 1.0 / h
        lower = np.full(N - 1, -0.5 / h)
        lower[-1] = -1.0 / h
        D = sp.diags([lower, main, upper], [-1, 0, 1], format="csr")

        # compact flux-form second derivative, without the boundary fluxes:
        # (H D2 Psi)_j = K_{j+1/2}(Psi_{j+1}-Psi_j)/h - K_{j-1/2}(Psi_j-Psi_{j-1})/h
        Dp = sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, N)) / h
        M2 = -(Dp.T @ sp.diags(h * c.K_mid) @ Dp)

        inv = sp.diags(1.0 / (H * u))
        W = sp.diags(w)
        psi_block = inv @ M2
        v_block = -(sp.diags(1.0 / u) @ (W @ D + D @ W))
        psi_block = psi_block - sp.diags(c.B + c.flux_slope / u) @ D

        # shock-side flux: -K0 (d1 V0 + e1 Psi0) / (H0 u0)
        K0 = u[0] * c.k[0]
        fix_psi = sp.csr_matrix(([-K0 * c.e1 / (H[0] * u[0])], ([0], [0])), shape=(N, N))
        fix_v = sp.csr_matrix(([-K0 * c.d1 / (H[0] * u[0])], ([0], [0])), shape=(N, N))
        psi_block = (psi_block + fix_psi).tolil()
        v_block = (v_block + fix_v).tolil()
        if self.frozen_ends:
            for j in (0, n):
                psi_block[j, :] = 0.0
                v_block[j, :] = 0.0
        top = sp.hstack([sp.csr_matrix((N, N)), sp.identity(N, format="csr")])
        bottom = sp.hstack([psi_block.tocsr(), v_block.tocsr()])
        return sp.vstack([top, bottom]).tocsr()

    @property
    def n_dof(self):
        return self.A.shape[0]

    def dt_max(self):
        return self.coeffs.h / self.coeffs.max_speed

    def default_dt(self, cfl=0.5):
        return cfl * self.dt_max()

    def rk4(self, U, dt):
        A = self.A
        k1 = A @ U
        k2 = A @ (U + 0.5 * dt * k1)
        k3 = A @ (U + 0.5 * dt * k2)
        k4 = A @ (U + dt * k3)
        return U + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_linear(op, state, dt):
    """Advance (Psi, Psi_t) by one RK4 step of size dt."""
    if dt > op.dt_max() * (1 + 1e-12):
        raise StabilityViolation(f"dt={dt:.3g} exceeds the explicit limit {op.dt_max():.3g}")
    N = op.coeffs.n + 1
    U = op.rk4(state.stacked(), dt)
    if not np.all(np.isfinite(U)):
        raise StabilityViolation("non-finite values in linear solution")
    return LinearState(state.t + dt, U[:N], U[N:])


def energy(coeffs, state):
    """Discrete E: boundary term plus trapezoid/compact-difference quadrature."""
    c = coeffs
    h = c.h
    psi, v = state.psi, state.psi_t
    H = np.full(c.n + 1, h)
    H[0] = H[-1] = 0.5 * h
    grad = np.diff(psi, axis=0) / h
    kin = np.sum((H * c.ubar) * np.abs(v.T) ** 2, axis=-1)
    pot = np.sum((h * c.K_mid) * np.abs(grad.T) ** 2, axis=-1)
    bdy = c.boundary_weight * np.abs(psi[0]) ** 2
    return bdy + kin + pot


def dissipation_rate(coeffs, state):
    """Integrand of D: 2 (u^2(x0) Psi_t(x0)^2 + u^2(L) Psi_t(L)^2)."""
    u = coeffs.ubar
    return 2.0 * (u[0] ** 2 * np.abs(state.psi_t[0]) ** 2 + u[-1] ** 2 * np.abs(state.psi_t[-1]) ** 2)


def dissipation_increment(coeffs, state, new_state, dt):
    """Trapezoidal increment of D over one step."""
    return 0.5 * dt * (dissipation_rate(coeffs, state) + dissipation_rate(coeffs, new_state))


def initial_state(coeffs, h1, h2):
    """Sample initial data; h1, h2 may be callables of x or nodal arrays."""
    x = coeffs.x
    psi = np.asarray(h1(x) if callable(h1) else h1, dtype=float).copy()
    v = np.asarray(h2(x) if callable(h2) else h2, dtype=float).copy()
    if psi.shape != x.shape or v.shape != x.shape:
        raise ValueError("initial data must match the node grid")
    return LinearState(0.0, psi, v)


def run_linear(coeffs, h1, h2, t_end, dt=None, cfl=0.5, frozen_ends=False, op=None):
    """Integrate to t_end and record the (t, E, D) ledger at every step."""
    op = op or LinearOperator(coeffs, frozen_ends=frozen_ends)
    state = initial_state(coeffs, h1, h2)
    if frozen_ends:
        state.psi_t[[0, -1]] = 0.0
    if dt is None:
        dt = op.default_dt(cfl)
    nsteps = max(int(np.ceil(t_end / dt - 1e-9)), 1)
    dt = t_end / nsteps
    ledger = EnergyLedger()
    D = 0.0
    ledger.append(0.0, float(energy(coeffs, state)), D)
    for _ in range(nsteps):
        new = step_linear(op, state, dt)
        D += float(dissipation_increment(coeffs, state, new, dt))
        state = new
        ledger.append(state.t, float(energy(coeffs, state)), D)
    return state, ledger


def check_dissipation_identity(coeffs, h1, h2, t_end, dt=None, cfl=0.5):
    """max_t |E(t) + D(t) - E(0)| / E(0); zero data gives 0."""
    state0 = initial_state(coeffs, h1, h2)
    if not np.any(state0.psi) and not np.any(state0.psi_t):
        return 0.0
    _, ledger = run_linear(coeffs, h1, h2, t_end, dt=dt, cfl=cfl)
    return float(np.max(ledger.identity_residual()))


def compatible_bump(coeffs, center=0.5, width=0.3, amplitude=1.0):
    """Smooth bump supported strictly inside (x0, L); all compatibility conditions hold."""
    x0, L = coeffs.x0, coeffs.L
    xc = x0 + center * (L - x0)
    w = width * (L - x0)

    def h1(x):
        r = (np.asarray(x) - xc) / w
        out = np.zeros_like(r, dtype=float)
        inside = np.abs(r) < 1
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
        return out

    return h1


def x_gram(coeffs):
    """Gram matrix G with h^T G h = ||h||_X^2, matching ``energy``."""
    c = coeffs
    n, h = c.n, c.h
    N = n + 1
    H = np.full(N, h)
    H[0] = H[-1] = 0.5 * h
    Dp = sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, N)) / h
    g_psi = (Dp.T @ sp.diags(h * c.K_mid) @ Dp).toarray()
    g_psi[0, 0] += c.boundary_weight
    G = np.zeros((2 * N, 2 * N))
    G[:N, :N] = g_psi
    G[N:, N:] = np.diag(H * c.ubar)
    return G


def default_T(coeffs):
    """Two slow transits of [x0, L]."""
    return 2.0 * coeffs.slow_transit()


def assemble_ST(coeffs, T=None, dt=None, cfl=0.5, op=None, dense=True):
    """Evolution operator over [0, T] as a matrix, with the X-norm Gram matrix.

    The one-step RK4 map R is obtained by stepping every canonical basis
    vector once; S_T = R^nsteps.  With ``dense=False`` a scipy LinearOperator
    applying the nsteps steps is returned instead of a matrix.
    """
    op = op or LinearOperator(coeffs)
    T = default_T(coeffs) if T is None else T
    if not T > 0:
        raise ValueError("T must be positive")
    dt = op.default_dt(cfl) if dt is None else dt
    nsteps = max(int(np.ceil(T / dt - 1e-9)), 1)
    dt = T / nsteps
    n_dof = op.n_dof
    N = n_dof // 2
    info = {"T": T, "dt": dt, "nsteps": nsteps, "n_dof": n_dof}
    if dense:
        eye = np.eye(n_dof)
        basis = LinearState(0.0, eye[:N], eye[N:])
        one = step_linear(op, basis, dt)
        R = np.vstack([one.psi, one.psi_t])
        ST = np.linalg.matrix_power(R, nsteps)
    else:
        def matvec(v):
            v = np.asarray(v).reshape(-1)
            for _ in range(nsteps):
                v = op.rk4(v, dt)
            return v

        ST = spla.LinearOperator((n_dof, n_dof), matvec=matvec, dtype=float)
    return ST, x_gram(coeffs), info


@dataclass
class SpectrumReport:
    T: float
    n_dof: int
    radius: float
    dominant: list
    lambda0: float

    def to_dict(self):
        return {
            "radius": self.radius,
            "lambda0": self.lambda0,
            "T": self.T,
            "n_dof": self.n_dof,
            "dominant_eigs": [[float(z.real), float(z.imag)] for z in self.dominant],
        }


def spectral_radius(ST, gram=None, T=1.0, n_dominant=6, dense_cap=DENSE_CAP, tol=1e-10):
    """Dominant-modulus eigenvalues of S_T and lambda0 = -ln(radius)/T.

    Eigenvalues do not depend on the inner product, so the Gram matrix is only
    validated here.  Dense matrices up to ``dense_cap`` use LAPACK; anything
    else goes through ARPACK.
    """
    n = ST.shape[0]
    if gram is not None:
        G = np.asarray(gram)
        if G.shape != (n, n) or not np.allclose(G, G.T, atol=1e-12 * np.abs(G).max()):
            raise ValueError("gram must be a symmetric matrix of matching size")
    if isinstance(ST, np.ndarray) and n <= dense_cap:
        ev = np.linalg.eigvals(ST)
    else:
        k = min(n_dominant, n - 2)
        try:
            ev = spla.eigs(ST, k=k, which="LM", tol=tol, return_eigenvectors=False,
                           maxiter=50 * n)
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(str(exc)) from None
    order = np.argsort(-np.abs(ev))
    ev = ev[order]
    radius = float(np.abs(ev[0]))
    lam = -np.log(radius) / T if radius > 0 else np.inf
    return SpectrumReport(T, n, radius, list(ev[:n_dominant]), float(lam))


def generator_eigenvalues(coeffs, k=6):
    """Eigenvalues of the semi-discrete generator with the largest real part."""
    op = LinearOperator(coeffs)
    ev = np.linalg.eigvals(op.A.toarray())
    return ev[np.argsort(-ev.real)][:k]


def linearized_shock_rate(shock):
    """(a' u- / 2a)(x0): leading-order relaxation rate of a displaced shock."""
    noz = shock.nozzle
    x0 = shock.x0
    return float(noz.da(x0) * shock.minus.u(x0) / (2.0 * noz.a(x0)))

