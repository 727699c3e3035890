"""Scenario configuration: YAML schema, parsing and validation.

Schema (``schema_version: 1``)::

    schema_version: 1
    mode: subsystem            # or coupled
    params: {EI: 1.0, rho: 1.0, Id: 1.0, varpi: 0.0, omega0: 0.0}
    law:
      damping: {kind: power, c: 1.0, p: 3}
      torque: {kind: linear, K: 1.0}
      profile: {kind: power, c: 1.0, p: 3, r: 1.0}   # optional
    grid: {n_elements: 64}
    time: {dt: 1.0e-3, T: 50.0, cadence: 10, startup_steps: 0}
    initial:
      displacement: {shape: bump, amplitude: 1.0}
      velocity: {shape: zero}
    analysis:
      envelope: {profile: auto, eps0: null, search_eps0: true, require_dominance: false}
      rates: [exponential, power, logarithmic]
      spectral: false
    seed: null                 # reserved; runs are deterministic

Shapes for ``initial``: ``zero``, ``mode`` (clamped-free eigenmode ``index``,
scaled so the tip value equals ``amplitude``), ``first_mode`` (alias for
index 1), ``bump`` (``amplitude * x^2 (x-1)^2``), ``tabulated``
(``values`` and ``slopes`` at nodes 1..N) and ``damped_mode``. The last one is
only valid for the displacement: it sets both displacement and velocity to the
real part of the ``index``-th oscillatory eigenmode of the subsystem linearised
with gain f'(0), phased so the tip value equals ``amplitude``. The velocity
must then be ``zero``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
import yaml
from scipy.optimize import brentq

from .exceptions import ConfigurationError
from .model import DampingLaw, FeedbackLaw, GrowthProfile, PhysicalParams, TorqueLaw
from .spatial import Grid, interpolate

SCHEMA_VERSION = 1
MODES = ("subsystem", "coupled")
RATE_KINDS = ("exponential", "power", "logarithmic")


class ConfigError(ConfigurationError):
    """Configuration error carrying the offending key path and, when known, a line."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key = key
        self.line = line


# --------------------------------------------------------------------------
# initial data

def clamped_free_root(index: int) -> float:
    """index-th positive root of cos(b) cosh(b) = -1."""
    if index < 1:
        raise ConfigurationError("mode index must be >= 1")
    guess = (index - 0.5) * math.pi
    g = lambda b: math.cos(b) * math.cosh(b) + 1.0
    return brentq(g, guess - 0.6, guess + 0.6, xtol=1e-15, rtol=1e-15, maxiter=200)


def mode_shape(index: int):
    """(phi, dphi) of the clamped-free mode, normalised to phi(1) = 1."""
    b = clamped_free_root(index)
    sig = (math.cosh(b) + math.cos(b)) / (math.sinh(b) + math.sin(b))

    def raw(x):
        return np.cosh(b * x) - np.cos(b * x) - sig * (np.sinh(b * x) - np.sin(b * x))

    def draw(x):
        return b * (np.sinh(b * x) + np.sin(b * x) - sig * (np.cosh(b * x) - np.cos(b * x)))

    tip = float(raw(1.0))
    return (lambda x: raw(x) / tip), (lambda x: draw(x) / tip)


@dataclass(frozen=True)
class FieldSpec:
    shape: str = "zero"
    amplitude: float = 1.0
    index: int = 1
    values: tuple | None = None
    slopes: tuple | None = None

    def project(self, grid: Grid) -> np.ndarray:
        """Nodal interpolation onto the Hermite space."""
        a = self.amplitude
        if self.shape == "zero":
            return np.zeros(grid.ndof)
        if self.shape in ("mode", "first_mode"):
            phi, dphi = mode_shape(1 if self.shape == "first_mode" else self.index)
            return a * interpolate(grid, phi, dphi)
        if self.shape == "bump":
            return interpolate(grid, lambda x: a * x**2 * (x - 1) ** 2,
                               lambda x: a * (2 * x * (x - 1) ** 2 + 2 * x**2 * (x - 1)))
        if self.shape == "tabulated":
            vals = np.asarray(self.values, dtype=float)
            slps = np.asarray(self.slopes, dtype=float)
            if vals.shape != (grid.n_elements,) or slps.shape != (grid.n_elements,):
                raise ConfigError(
                    f"tabulated data needs {grid.n_elements} values and slopes (nodes 1..N)",
                    "initial")
            out = np.empty(grid.ndof)
            out[0::2], out[1::2] = a * vals, a * slps
            return out
        if self.shape == "damped_mode":
            raise ConfigError("damped_mode data needs the operators; use InitialData.project",
                              "initial.displacement.shape")
        raise ConfigError(f"unknown initial shape {self.shape!r}", "initial.shape")


@dataclass(frozen=True)
class InitialData:
    displacement: FieldSpec = field(default_factory=lambda: FieldSpec("first_mode"))
    velocity: FieldSpec = field(default_factory=FieldSpec)

    def __post_init__(self):
        if self.velocity.shape == "damped_mode":
            raise ConfigError("damped_mode is only valid for the displacement",
                              "initial.velocity.shape")
        if self.displacement.shape == "damped_mode" and self.velocity.shape != "zero":
            raise ConfigError("damped_mode fixes the velocity; leave it zero",
                              "initial.velocity.shape")

    def project(self, ops, law) -> tuple:
        """(y0, v0) on the Hermite space of ``ops``."""
        if self.displacement.shape == "damped_mode":
            from .decay import damped_mode

            gain = float(law.damping.derivative(0.0))
            return damped_mode(ops, gain, self.displacement.index, self.displacement.amplitude)
        return self.displacement.project(ops.grid), self.velocity.project(ops.grid)


@dataclass(frozen=True)
class TimeConfig:
    dt: float = 1e-3
    T: float = 50.0
    cadence: int = 10
    startup_steps: int = 0

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class EnvelopeRequest:
    profile: str = "auto"
    eps0: float | None = None
    search_eps0: bool = True
    require_dominance: bool = False


@dataclass(frozen=True)
class AnalysisConfig:
    envelope: EnvelopeRequest | None = None
    rates: tuple = ()
    spectral: bool = False


@dataclass(frozen=True)
class SimConfig:
    params: PhysicalParams = field(default_factory=PhysicalParams)
    law: FeedbackLaw = field(default_factory=FeedbackLaw)
    grid: Grid = field(default_factory=Grid)
    time: TimeConfig = field(default_factory=TimeConfig)
    mode: str = "subsystem"
    initial: InitialData = field(default_factory=InitialData)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    seed: int | None = None
    raw: dict | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}", "mode")
        if not self.time.dt > 0:
            raise ConfigError("dt must be > 0", "time.dt")
        if not self.time.T >= 10 * self.time.dt:
            raise ConfigError("horizon T must be at least 10 dt", "time.T")
        if not (isinstance(self.time.cadence, int) and self.time.cadence >= 1):
            raise ConfigError("cadence must be a positive integer", "time.cadence")
        if not (isinstance(self.time.startup_steps, int) and self.time.startup_steps >= 0):
            raise ConfigError("startup_steps must be a non-negative integer", "time.startup_steps")

    def to_dict(self) -> dict:
        if self.raw is not None:
            return copy.deepcopy(self.raw)
        return _config_to_dict(self)

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _config_to_dict(cfg: SimConfig) -> dict:
    def clean(d):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items() if v is not None}

    law = {"damping": clean(asdict(cfg.law.damping)), "torque": clean(asdict(cfg.law.torque)),
           "profile": clean(asdict(cfg.law.profile))}
    an = {"rates": list(cfg.analysis.rates), "spectral": cfg.analysis.spectral}
    if cfg.analysis.envelope is not None:
        an["envelope"] = clean(asdict(cfg.analysis.envelope))
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": cfg.mode,
        "params": clean(asdict(cfg.params)),
        "law": law,
        "grid": {"n_elements": cfg.grid.n_elements},
        "time": asdict(cfg.time),
        "initial": {"displacement": clean(asdict(cfg.initial.displacement)),
                    "velocity": clean(asdict(cfg.initial.velocity))},
        "analysis": an,
        "seed": cfg.seed,
    }


# --------------------------------------------------------------------------
# parsing

_ALLOWED = {
    "": {"schema_version", "mode", "params", "law", "grid", "time", "initial", "analysis", "seed"},
    "params": {"EI", "rho", "Id", "varpi", "omega0", "length"},
    "law": {"damping", "torque", "profile"},
    "law.damping": {"kind", "c", "p", "table"},
    "law.torque": {"kind", "K", "k3"},
    "law.profile": {"kind", "c", "p", "r", "table"},
    "grid": {"n_elements"},
    "time": {"dt", "T", "cadence", "startup_steps"},
    "initial": {"displacement", "velocity"},
    "initial.displacement": {"shape", "amplitude", "index", "values", "slopes"},
    "initial.velocity": {"shape", "amplitude", "index", "values", "slopes"},
    "analysis": {"envelope", "rates", "spectral"},
    "analysis.envelope": {"profile", "eps0", "search_eps0", "require_dominance"},
}


def _section(d, path):
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ConfigError("expected a mapping", path or "<root>")
    for key in d:
        if key not in _ALLOWED[path]:
            raise ConfigError("unknown key", f"{path}.{key}" if path else str(key))
    return d


def _num(d, key, path, default=None, kind=float):
    if key not in d or d[key] is None:
        return default
    val = d[key]
    try:
        if isinstance(val, bool):
            raise TypeError
        out = kind(float(val)) if kind is int else float(val)
        if kind is int and float(val) != out:
            raise ValueError
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {val!r}", f"{path}.{key}") from None
    if kind is float and not math.isfinite(out):
        raise ConfigError("value must be finite", f"{path}.{key}")
    return out


def _build(path, factory, **kwargs):
    try:
        return factory(**{k: v for k, v in kwargs.items() if v is not None})
    except ConfigError:
        raise
    except ConfigurationError as exc:
        raise ConfigError(str(exc), path) from None


def _field(d, path):
    d = _section(d, path)
    shape = d.get("shape", "zero")
    if shape not in ("zero", "mode", "first_mode", "bump", "tabulated", "damped_mode"):
        raise ConfigError(f"unknown initial shape {shape!r}", f"{path}.shape")
    return FieldSpec(shape=shape, amplitude=_num(d, "amplitude", path, 1.0),
                     index=_num(d, "index", path, 1, int),
                     values=tuple(d["values"]) if "values" in d else None,
                     slopes=tuple(d["slopes"]) if "slopes" in d else None)


def config_from_dict(data: dict) -> SimConfig:
    data = _section(data, "")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}", "schema_version")

    p = _section(data.get("params"), "params")
    params = _build("params", PhysicalParams, **{k: _num(p, k, "params") for k in _ALLOWED["params"]})

    law_d = _section(data.get("law"), "law")
    dd = _section(law_d.get("damping"), "law.damping")
    damping = _build("law.damping", DampingLaw, kind=dd.get("kind", "linear"),
                     c=_num(dd, "c", "law.damping"), p=_num(dd, "p", "law.damping"),
                     table=dd.get("table"))
    td = _section(law_d.get("torque"), "law.torque")
    torque = _build("law.torque", TorqueLaw, kind=td.get("kind", "linear"),
                    K=_num(td, "K", "law.torque"), k3=_num(td, "k3", "law.torque"))
    profile = None
    if law_d.get("profile") is not None:
        pd = _section(law_d["profile"], "law.profile")
        profile = _build("law.profile", GrowthProfile, kind=pd.get("kind", "linear"),
                         c=_num(pd, "c", "law.profile"), p=_num(pd, "p", "law.profile"),
                         r=_num(pd, "r", "law.profile"), table=pd.get("table"))
    law = FeedbackLaw(damping, torque, profile)

    g = _section(data.get("grid"), "grid")
    grid = _build("grid", Grid, n_elements=_num(g, "n_elements", "grid", None, int))

    t = _section(data.get("time"), "time")
    time = TimeConfig(dt=_num(t, "dt", "time", 1e-3), T=_num(t, "T", "time", 50.0),
                      cadence=_num(t, "cadence", "time", 10, int),
                      startup_steps=_num(t, "startup_steps", "time", 0, int))

    ini = _section(data.get("initial"), "initial")
    initial = InitialData(
        displacement=_field(ini.get("displacement", {"shape": "first_mode"}), "initial.displacement"),
        velocity=_field(ini.get("velocity"), "initial.velocity"))

    an = _section(data.get("analysis"), "analysis")
    env = None
    if an.get("envelope") is not None:
        ed = _section(an["envelope"], "analysis.envelope")
        prof = ed.get("profile", "auto")
        if prof not in ("auto", "linear", "power", "exp_type", "tabulated"):
            raise ConfigError(f"unknown envelope profile {prof!r}", "analysis.envelope.profile")
        env = EnvelopeRequest(profile=prof, eps0=_num(ed, "eps0", "analysis.envelope"),
                              search_eps0=bool(ed.get("search_eps0", True)),
                              require_dominance=bool(ed.get("require_dominance", False)))
    rates = an.get("rates", [])
    if isinstance(rates, str):
        rates = [rates]
    for r in rates:
        if r not in RATE_KINDS:
            raise ConfigError(f"unknown rate kind {r!r}", "analysis.rates")
    analysis = AnalysisConfig(envelope=env, rates=tuple(rates), spectral=bool(an.get("spectral", False)))

    mode = data.get("mode", "subsystem")
    seed = data.get("seed")
    cfg = SimConfig(params, law, grid, time, mode, initial, analysis, seed)
    normalized = _config_to_dict(cfg)
    return SimConfig(params, law, grid, time, mode, initial, analysis, seed, raw=normalized)


def load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}",
                          line=None if mark is None else mark.line + 1) from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    return data


def load_config(path) -> SimConfig:
    return config_from_dict(load_yaml(path))
