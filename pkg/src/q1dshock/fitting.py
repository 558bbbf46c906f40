"""Exponential decay-rate fits for energies and shock displacements."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import FitWindowEmpty

MIN_SAMPLES = 10


@dataclass
class DecayFit:
    lam: float
    C: float
    r2: float
    residual: float
    model: str
    omega: float = 0.0
    phase: float = 0.0
    offset: float = 0.0
    window: tuple = (float("nan"), float("nan"))

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _r2(y, yhat):
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return 1.0 - ss_res / ss_tot


def loglinear_fit(t, y):
    """Least-squares line through log|y|: |y| ~ C exp(-lam t)."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    ok = y > 0
    if np.count_nonzero(ok) < MIN_SAMPLES:
        raise FitWindowEmpty("fewer than 10 positive samples in the fit window")
    t, ly = t[ok], np.log(y[ok])
    slope, icpt = np.polyfit(t, ly, 1)
    pred = slope * t + icpt
    return DecayFit(lam=float(-slope), C=float(np.exp(icpt)), r2=_r2(ly, pred),
                    residual=float(np.sqrt(np.mean((ly - pred) ** 2))), model="exponential",
                    window=(float(t[0]), float(t[-1])))


def _damped(t, C, lam, omega, phase, offset):
    return C * np.exp(-lam * t) * np.cos(omega * t + phase) + offset


def damped_fit(t, y, omega_guesses=None):
    """Fit y ~ C exp(-lam t) cos(omega t + phase) + offset on signed data.

    lam is the decay rate of the envelope; omega = 0 recovers a plain
    exponential.  Several starting frequencies are tried and the best R^2 kept.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < MIN_SAMPLES:
        raise FitWindowEmpty("fewer than 10 samples in the fit window")
    t0 = t[0]
    tau = t - t0
    span = max(tau[-1], 1e-12)
    scale = float(np.max(np.abs(y))) or 1.0
    try:
        base = loglinear_fit(t, y - np.median(y[-max(len(y) // 10, 1):]))
        lam0 = max(base.lam, 1e-3)
    except FitWindowEmpty:
        lam0 = 1.0 / span
    if omega_guesses is None:
        omega_guesses = [0.0] + list(np.pi * np.arange(1, 9) / span)
    best = None
    for om in omega_guesses:
        p0 = [y[0] if om == 0 else scale, lam0, om, 0.0, 0.0]
        try:
            with warnings.catch_warnings():
                # covariance is unused; degenerate starts are discarded by R^2 anyway
                warnings.simplefilter("ignore", OptimizeWarning)
                p, _ = curve_fit(_damped, tau, y, p0=p0, maxfev=20000)
        except (RuntimeError, ValueError):
            continue
        r2 = _r2(y, _damped(tau, *p))
        if best is None or r2 > best[1]:
            best = (p, r2)
    if best is None:
        raise FitWindowEmpty("damped fit did not converge")
    (C, lam, om, ph, off), r2 = best
    if C < 0:
        C, ph = -C, ph + np.pi
    if om < 0:
        om, ph = -om, -ph
    ph = float(np.angle(np.exp(1j * ph)))
    resid = float(np.sqrt(np.mean((y - _damped(tau, C, lam, om, ph, off)) ** 2)))
    # report the amplitude referred to t = 0 rather than the window start
    return DecayFit(lam=float(lam), C=float(C * np.exp(lam * t0)), r2=r2, residual=resid,
                    model="damped", omega=float(om), phase=ph, offset=float(off),
                    window=(float(t[0]), float(t[-1])))


def decay_fit(t, y, model="exponential", window=None):
    """Decay rate of a sampled series.

    model "exponential" fits a line to log|y|; "damped" fits a damped
    oscillation to the signed series.  window = (t_lo, t_hi) restricts the
    samples used.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if model == "exponential":
        return loglinear_fit(t, y)
    if model == "damped":
        return damped_fit(t, y)
    raise ValueError(f"unknown fit model {model!r}")
