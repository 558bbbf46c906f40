"""Scenario configuration loaded from TOML."""

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli

from .errors import ConfigError
from .gas import GasLaw
from .nozzle import nozzle_from_config
from .steady import BoundaryData, forward_outflow_density
from .unsteady import PerturbationSpec, SimulationOptions

SCENARIO_DIR = Path(__file__).resolve().parent / "scenarios"


@dataclass
class BoundaryConfig:
    rho_l: float = 1.0
    u_l: float = 2.0
    rho_r: float = float("nan")
    # if rho_r is not given it is computed by integrating forward with a shock at x0_design
    x0_design: float = float("nan")


@dataclass
class RunConfig:
    # t_end and the fit/transient windows are measured in slow transits when t_end_transits is set
    t_end: float = float("nan")
    t_end_transits: float = 11.0
    cfl: float = 0.45
    sample_dt: float = 0.05
    snapshot_times: list = field(default_factory=list)
    locator: str = "integral"
    fit_model: str = "damped"
    transient_transits: float = 1.0
    noise_cells: float = 0.0
    stop_displacement: float = float("inf")
    reference: bool = True


@dataclass
class LinearConfig:
    n_nodes: int = 400  # number of intervals; the node grid has n_nodes + 1 points
    T_mode: str = "auto"
    T: float = float("nan")
    identity_transits: float = 10.0
    bump_center: float = 0.5
    bump_width: float = 0.3


@dataclass
class VerdictConfig:
    radius_max: float = 1.0
    lambda_min: float = 0.0
    shrink_factor: float = 0.5


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    gas: dict = field(default_factory=lambda: {"A": 1.0, "gamma": 1.0})
    nozzle: dict = field(default_factory=dict)
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    n_cells: int = 800
    perturbation: dict = field(default_factory=dict)
    run: RunConfig = field(default_factory=RunConfig)
    linear: LinearConfig = field(default_factory=LinearConfig)
    verdict: VerdictConfig = field(default_factory=VerdictConfig)
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        g = self.gas
        if not (g.get("A", 1.0) > 0 and g.get("gamma", 1.0) >= 1):
            raise ConfigError("gas needs A > 0 and gamma >= 1")
        b = self.boundary
        if not (b.rho_l > 0 and b.u_l > 0):
            raise ConfigError("boundary needs rho_l > 0 and u_l > 0")
        if not (b.rho_r > 0) and math.isnan(b.x0_design):
            raise ConfigError("boundary needs rho_r > 0 or x0_design")
        if self.n_cells < 16:
            raise ConfigError("grid.n_cells must be at least 16")
        if self.linear.n_nodes < 8:
            raise ConfigError("linear.n_nodes must be at least 8")
        if not 0 < self.run.cfl < 1:
            raise ConfigError("run.cfl must lie in (0, 1)")
        if not self.run.sample_dt > 0:
            raise ConfigError("run.sample_dt must be positive")
        if self.linear.T_mode not in ("auto", "fixed"):
            raise ConfigError("linear.T_mode must be 'auto' or 'fixed'")
        try:
            self.perturbation_spec()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"perturbation: {exc}") from None

    def gas_law(self):
        return GasLaw(float(self.gas.get("A", 1.0)), float(self.gas.get("gamma", 1.0)))

    def build_nozzle(self):
        try:
            return nozzle_from_config(self.nozzle)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"nozzle: {exc}") from None

    def boundary_data(self, gas=None, nozzle=None):
        b = self.boundary
        rho_r = b.rho_r
        if not rho_r > 0:
            rho_r = forward_outflow_density(gas or self.gas_law(), nozzle or self.build_nozzle(),
                                            b.rho_l, b.u_l, b.x0_design)
        return BoundaryData(b.rho_l, b.u_l, rho_r)

    def perturbation_spec(self):
        p = dict(self.perturbation)
        p.setdefault("seed", self.seed)
        return PerturbationSpec(**p)

    def simulation_options(self, transit):
        r = self.run
        return SimulationOptions(
            n_cells=self.n_cells, cfl=r.cfl, sample_dt=r.sample_dt,
            snapshot_times=tuple(r.snapshot_times), locator=r.locator, fit_model=r.fit_model,
            transient=r.transient_transits, noise_cells=r.noise_cells,
            stop_displacement=r.stop_displacement, reference=r.reference)

    def t_end(self, transit):
        r = self.run
        return r.t_end if r.t_end > 0 else r.t_end_transits * transit

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **changes):
        """Copy with top-level fields replaced; nested dicts are merged."""
        data = self.to_dict()
        for key, value in changes.items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return config_from_dict(data)


def _section(cls, data, name):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data):
    data = dict(data)
    known = {"name", "gas", "nozzle", "boundary", "grid", "n_cells", "perturbation", "run",
             "linear", "verdict", "seed"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    n_cells = data.get("n_cells", (data.get("grid") or {}).get("n_cells", 800))
    try:
        return ScenarioConfig(
            name=data.get("name", "scenario"),
            gas=dict(data.get("gas", {"A": 1.0, "gamma": 1.0})),
            nozzle=dict(data.get("nozzle", {})),
            boundary=_section(BoundaryConfig, data.get("boundary"), "boundary"),
            n_cells=int(n_cells),
            perturbation=dict(data.get("perturbation", {})),
            run=_section(RunConfig, data.get("run"), "run"),
            linear=_section(LinearConfig, data.get("linear"), "linear"),
            verdict=_section(VerdictConfig, data.get("verdict"), "verdict"),
            seed=int(data.get("seed", 0)),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path):
    """Read a scenario TOML file; a bare name resolves to a bundled scenario."""
    p = Path(path)
    if not p.exists() and (SCENARIO_DIR / f"{path}.toml").exists():
        p = SCENARIO_DIR / f"{path}.toml"
    try:
        with open(p, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data)


def bundled_scenarios():
    return sorted(q.stem for q in SCENARIO_DIR.glob("*.toml"))
