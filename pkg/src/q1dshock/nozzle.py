"""Nozzle cross-section a(x) on [l, L] and its slope."""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import PchipInterpolator

from .errors import InvalidNozzle, OutOfDomain

SHAPES = ("constant", "cone", "sphere", "polynomial", "tabulated")


@dataclass(frozen=True)
class Nozzle:
    """Smooth duct profile.

    ``shape`` is one of ``SHAPES``. Polynomial coefficients are in ascending
    order, so ``coeffs=(1, 1)`` is ``a(x) = 1 + x``. Tabulated profiles are
    interpolated with a monotone (PCHIP) cubic, which is C1.

    ``margin`` is the distance past either endpoint that area/darea still
    accept; steady branches are extended into it.
    """

    l: float
    L: float
    shape: str = "constant"
    coeffs: tuple = ()
    table: tuple = ()
    margin: float = None
    _interp: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.L > self.l:
            raise InvalidNozzle(f"need L > l, got l={self.l}, L={self.L}")
        if self.shape not in SHAPES:
            raise InvalidNozzle(f"unknown shape {self.shape!r}")
        if self.margin is None:
            object.__setattr__(self, "margin", 0.05 * (self.L - self.l))
        if self.shape == "polynomial":
            if len(self.coeffs) == 0:
                raise InvalidNozzle("polynomial nozzle needs coefficients")
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.shape == "tabulated":
            xs, vals = (np.asarray(v, dtype=float) for v in self.table)
            if xs.size < 2 or np.any(np.diff(xs) <= 0):
                raise InvalidNozzle("tabulated x must be strictly increasing")
            object.__setattr__(self, "table", (tuple(xs), tuple(vals)))
            object.__setattr__(self, "_interp", PchipInterpolator(xs, vals, extrapolate=True))
        xs = np.linspace(self.l - self.margin, self.L + self.margin, 4001)
        if np.any(self.a(xs) <= 0):
            raise InvalidNozzle("area must stay positive on the (extended) domain")

    @classmethod
    def constant(cls, l, L, **kw):
        return cls(l, L, "constant", **kw)

    @classmethod
    def cone(cls, l, L, **kw):
        return cls(l, L, "cone", **kw)

    @classmethod
    def sphere(cls, l, L, **kw):
        return cls(l, L, "sphere", **kw)

    @classmethod
    def polynomial(cls, coeffs, l, L, **kw):
        return cls(l, L, "polynomial", coeffs=tuple(coeffs), **kw)

    @classmethod
    def tabulated(cls, x, a, **kw):
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), float(x[-1]), "tabulated", table=(tuple(x), tuple(a)), **kw)

    @classmethod
    def from_csv(cls, path, **kw):
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if not np.isfinite(data[0, 0]):
            data = data[1:]
        return cls.tabulated(data[:, 0], data[:, 1], **kw)

    # unchecked vectorised evaluators, used in inner loops
    def a(self, x):
        x = np.asarray(x, dtype=float)
        if self.shape == "constant":
            return np.ones_like(x)
        if self.shape == "cone":
            return x.copy()
        if self.shape == "sphere":
            return x * x
        if self.shape == "polynomial":
            return P.polyval(x, self.coeffs)
        return self._interp(x)

    def da(self, x):
        x = np.asarray(x, dtype=float)
        if self.shape == "constant":
            return np.zeros_like(x)
        if self.shape == "cone":
            return np.ones_like(x)
        if self.shape == "sphere":
            return 2.0 * x
        if self.shape == "polynomial":
            return P.polyval(x, P.polyder(self.coeffs)) if len(self.coeffs) > 1 else np.zeros_like(x)
        return self._interp(x, 1)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.l - self.margin) & (x <= self.L + self.margin))

    def _check(self, x):
        if not self.contains(x):
            raise OutOfDomain(
                f"x outside [{self.l - self.margin}, {self.L + self.margin}]")


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def area(nozzle, x):
    nozzle._check(x)
    return _scalar(nozzle.a(x))


def darea(nozzle, x):
    nozzle._check(x)
    return _scalar(nozzle.da(x))


def check_widening(nozzle, x0):
    """True iff the duct widens at x0, the hypothesis for shock stability."""
    return bool(nozzle.da(x0) > 0)


def nozzle_from_config(cfg):
    """Build a Nozzle from a mapping such as ``{shape="polynomial", coeffs=[1, 1], l=1, L=3}``."""
    cfg = dict(cfg)
    shape = cfg.pop("shape", "constant")
    margin = cfg.pop("margin", None)
    if shape == "tabulated":
        if "csv" in cfg:
            return Nozzle.from_csv(cfg["csv"], margin=margin)
        return Nozzle.tabulated(cfg["x"], cfg["a"], margin=margin)
    try:
        l, L = float(cfg.pop("l")), float(cfg.pop("L"))
    except KeyError as exc:
        raise InvalidNozzle(f"nozzle config missing {exc}") from None
    if shape == "polynomial":
        return Nozzle.polynomial(cfg.pop("coeffs"), l, L, margin=margin)
    return Nozzle(l, L, shape, margin=margin)
