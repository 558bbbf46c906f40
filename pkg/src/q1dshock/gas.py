"""Isentropic pressure law p = A rho**gamma and flow-regime helpers."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NonPositiveDensity


class Regime(Enum):
    SUPERSONIC = "supersonic"
    SUBSONIC = "subsonic"
    SONIC = "sonic"


def _check_rho(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise NonPositiveDensity(f"density must be positive, got min {np.min(rho)}")
    return rho


@dataclass(frozen=True)
class GasLaw:
    A: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"pressure coefficient A must be positive, got {self.A}")
        if not self.gamma >= 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")

    def p(self, rho):
        return self.A * rho**self.gamma

    def dp(self, rho):
        """p'(rho) = c^2."""
        return self.A * self.gamma * rho ** (self.gamma - 1.0)

    def d2p(self, rho):
        return self.A * self.gamma * (self.gamma - 1.0) * rho ** (self.gamma - 2.0)

    def enthalpy(self, rho):
        """Specific enthalpy h with h'(rho) = p'(rho)/rho and h(1) = 0 (Bernoulli potential)."""
        g1 = self.gamma - 1.0
        log_rho = np.log(rho)
        if g1 == 0.0:
            return self.A * log_rho
        # expm1 keeps the gamma -> 1 limit A log(rho) free of cancellation
        return self.A * self.gamma * np.expm1(g1 * log_rho) / g1

    def sonic_density(self, mass_flux, area):
        """Density at which u = M/(a rho) equals c(rho)."""
        # c^2 rho^2 = (M/a)^2  <=>  A gamma rho^(gamma+1) = (M/a)^2
        j2 = (mass_flux / area) ** 2
        return (j2 / (self.A * self.gamma)) ** (1.0 / (self.gamma + 1.0))


def pressure(gas, rho):
    rho = _check_rho(rho)
    out = gas.p(rho)
    return float(out) if out.ndim == 0 else out


def sound_speed(gas, rho):
    rho = _check_rho(rho)
    out = np.sqrt(gas.dp(rho))
    return float(out) if out.ndim == 0 else out


def regime(gas, rho, u, tol=1e-12):
    """Classify a state by comparing |u| against the sound speed with a relative band."""
    c = sound_speed(gas, rho)
    speed = abs(u)
    if speed > c * (1.0 + tol):
        return Regime.SUPERSONIC
    if speed < c * (1.0 - tol):
        return Regime.SUBSONIC
    return Regime.SONIC
