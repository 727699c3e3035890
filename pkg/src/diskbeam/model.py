"""Physical parameters, feedback-law catalog and hypothesis validators.

The moment feedback ``f`` acts on the tip slope velocity and the torque
feedback ``gamma`` acts on the angular-velocity error ``omega - varpi``.
Every law is a small frozen dataclass with a vectorised ``__call__``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError

DAMPING_KINDS = ("zero", "linear", "power", "exp_type", "tabulated")
PROFILE_KINDS = ("linear", "power", "exp_type", "tabulated")
TORQUE_KINDS = ("zero", "linear", "cubic")

# strict convexity of H(x) = c*exp(-1/x) is lost at x = 1/2
DEFAULT_RADIUS = {"linear": 1.0, "power": 1.0, "exp_type": 0.4, "tabulated": 1.0}


@dataclass(frozen=True)
class PhysicalParams:
    EI: float = 1.0
    rho: float = 1.0
    Id: float = 1.0
    varpi: float = 0.0
    omega0: float | None = None
    length: float = 1.0

    def __post_init__(self):
        if self.omega0 is None:
            object.__setattr__(self, "omega0", self.varpi)
        if self.length != 1.0:
            raise ConfigurationError(
                "beam length must be 1 (rescale EI, rho and time beforehand)")

    @property
    def varpi_bound(self) -> float:
        """Largest admissible |varpi|, 3*sqrt(EI/rho) (exclusive)."""
        if self.EI <= 0 or self.rho <= 0:
            return float("nan")
        return 3.0 * math.sqrt(self.EI / self.rho)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float | None = None
    bound: float | None = None
    message: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def admissible(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def bound(self) -> float:
        for c in self.checks:
            if c.name == "angular_velocity":
                return c.bound
        return float("nan")

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.message}"
                 for c in self.checks]
        lines.append(f"admissible: {self.admissible}")
        return "\n".join(lines)


def validate_params(params: PhysicalParams) -> ValidationReport:
    """Positivity of EI, rho, Id and the smallness condition |varpi| < 3 sqrt(EI/rho)."""
    checks = []
    for name in ("EI", "rho", "Id"):
        value = getattr(params, name)
        ok = bool(np.isfinite(value) and value > 0)
        checks.append(Check(f"positive_{name}", ok, value, 0.0,
                            f"{name} = {value!r} must be > 0"))
    bound = params.varpi_bound
    ok = bool(np.isfinite(bound) and abs(params.varpi) < bound)
    checks.append(Check(
        "angular_velocity", ok, abs(params.varpi), bound,
        f"|varpi| = {abs(params.varpi)!r} {'<' if ok else '>='} "
        f"3*sqrt(EI/rho) = {bound!r}"))
    return ValidationReport(tuple(checks))


# --------------------------------------------------------------------------
# growth profiles f0 and the damping catalog

def _exp_shape(s):
    """exp(-1/s^2)/s for s > 0, 0 at s = 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-1.0 / s[pos] ** 2) / s[pos]
    return out


def _exp_shape_prime(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        val = np.exp(-1.0 / sp ** 2) * (2.0 / sp ** 4 - 1.0 / sp ** 2)
    out[pos] = np.nan_to_num(val, nan=0.0)
    return out


def _as_table(table):
    if table is None:
        raise ConfigurationError("tabulated kind requires a table of (s, value) pairs")
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise ConfigurationError("table must be a list of at least two (s, value) pairs")
    s, v = arr[:, 0], arr[:, 1]
    if s[0] != 0.0 or v[0] != 0.0:
        raise ConfigurationError("table must start at (0, 0)")
    if np.any(np.diff(s) <= 0):
        raise ConfigurationError("table abscissae must be strictly increasing")
    return tuple(map(tuple, arr))


def _table_eval(table, s):
    """Piecewise-linear interpolant on |s|, continued proportionally past the last knot."""
    arr = np.asarray(table)
    xs, ys = arr[:, 0], arr[:, 1]
    a = np.abs(np.asarray(s, dtype=float))
    inside = np.interp(a, xs, ys)
    outside = ys[-1] * a / xs[-1]
    return np.where(a <= xs[-1], inside, outside)


def _table_slope(table, s):
    arr = np.asarray(table)
    xs, ys = arr[:, 0], arr[:, 1]
    a = np.abs(np.asarray(s, dtype=float))
    slopes = np.diff(ys) / np.diff(xs)
    idx = np.clip(np.searchsorted(xs, a, side="right") - 1, 0, len(slopes) - 1)
    return np.where(a <= xs[-1], slopes[idx], ys[-1] / xs[-1])


@dataclass(frozen=True)
class GrowthProfile:
    """Lower growth function f0 of the damping law near the origin.

    f0 follows its formula on [0, 1] and is continued linearly, f0(1)*s,
    beyond 1 so that it is strictly increasing on [0, inf).
    """

    kind: str = "linear"
    c: float = 1.0
    p: float = 1.0
    r: float | None = None
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigurationError(f"unknown growth profile kind {self.kind!r}")
        if not self.c > 0:
            raise ConfigurationError("profile scale c must be > 0")
        if self.kind == "power" and not self.p >= 1:
            raise ConfigurationError("power profile needs p >= 1")
        if self.kind == "tabulated":
            object.__setattr__(self, "table", _as_table(self.table))
        if self.r is None:
            object.__setattr__(self, "r", DEFAULT_RADIUS[self.kind])
        if not self.r > 0:
            raise ConfigurationError("convexity radius r must be > 0")

    @property
    def exponent(self) -> float:
        return 1.0 if self.kind == "linear" else float(self.p)

    def f0(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        if self.kind == "tabulated":
            return _table_eval(self.table, s)
        inner = np.minimum(s, 1.0)
        if self.kind == "linear":
            core = inner
        elif self.kind == "power":
            core = inner ** self.p
        else:
            core = _exp_shape(inner)
        edge = {"linear": 1.0, "power": 1.0, "exp_type": math.exp(-1.0)}[self.kind]
        return self.c * np.where(s <= 1.0, core, edge * s)

    def f0_inv(self, v):
        """Inverse of f0 on [0, inf), by bisection (vectorised)."""
        v = np.abs(np.asarray(v, dtype=float))
        if self.kind == "linear":
            return v / self.c
        with np.errstate(over="ignore", invalid="ignore"):
            return self._bisect_inverse(v)

    def _bisect_inverse(self, v):
        lo = np.zeros_like(v)
        hi = np.ones_like(v)
        for _ in range(1100):
            short = self.f0(hi) < v
            if not short.any():
                break
            hi = np.where(short, 2.0 * hi, hi)
        # values f0 never reaches (bounded tabulated profiles) map to inf
        unreachable = self.f0(hi) < v
        hi = np.where(unreachable, np.inf, hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.f0(mid) < v
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(unreachable | (hi - lo <= 1e-15 * np.maximum(hi, 1e-300))):
                break
        return np.where(unreachable, np.inf, 0.5 * (lo + hi))

    def H(self, x):
        """H(x) = sqrt(x) f0(sqrt(x)), x >= 0."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("H is defined for x >= 0")
        if self.kind == "linear":
            return self.c * x
        shape = x.shape
        x = x.reshape(-1)
        out = np.sqrt(x) * self.f0(np.sqrt(x))
        small = (x > 0) & (x <= 1.0)
        if self.kind == "power":
            out[small] = self.c * x[small] ** ((self.p + 1.0) / 2.0)
        elif self.kind == "exp_type":
            out[small] = self.c * np.exp(-1.0 / x[small])
        return out.reshape(shape)


@dataclass(frozen=True)
class DampingLaw:
    """Moment feedback f. Catalog kinds:

    * ``zero``: f = 0 (conservative runs only)
    * ``linear``: f(s) = c s
    * ``power``: sign(s) c |s|^p for |s| <= 1, c s beyond
    * ``exp_type``: sign(s) c exp(-1/s^2)/|s| for 0 < |s| <= 1, c e^-1 s beyond
    * ``tabulated``: odd extension of a piecewise-linear table on s >= 0
    """

    kind: str = "linear"
    c: float = 1.0
    p: float = 1.0
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in DAMPING_KINDS:
            raise ConfigurationError(f"unknown damping law kind {self.kind!r}")
        if self.kind == "tabulated":
            object.__setattr__(self, "table", _as_table(self.table))
        elif self.kind != "zero" and not self.c > 0:
            raise ConfigurationError("damping scale c must be > 0")
        if self.kind == "power" and not self.p >= 1:
            raise ConfigurationError("power damping needs p >= 1")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        if self.kind == "zero":
            mag = np.zeros_like(a)
        elif self.kind == "linear":
            mag = self.c * a
        elif self.kind == "power":
            mag = self.c * np.where(a <= 1.0, a ** self.p, a)
        elif self.kind == "exp_type":
            mag = self.c * np.where(a <= 1.0, _exp_shape(np.minimum(a, 1.0)),
                                    math.exp(-1.0) * a)
        else:
            mag = _table_eval(self.table, a)
        return np.sign(s) * mag

    def derivative(self, s):
        """f'(s); one-sided (outer) value at the corner |s| = 1."""
        a = np.abs(np.asarray(s, dtype=float))
        if self.kind == "zero":
            return np.zeros_like(a)
        if self.kind == "linear":
            return np.full_like(a, self.c)
        if self.kind == "power":
            return self.c * np.where(a < 1.0, self.p * a ** (self.p - 1.0), 1.0)
        if self.kind == "exp_type":
            return self.c * np.where(a < 1.0, _exp_shape_prime(np.minimum(a, 1.0)),
                                     math.exp(-1.0))
        return _table_slope(self.table, a)

    def linear_bounds(self):
        """(c1, c2) with c1 |s| <= |f(s)| <= c2 |s| for |s| >= 1."""
        if self.kind == "zero":
            return 0.0, 0.0
        if self.kind in ("linear", "power"):
            return self.c, self.c
        if self.kind == "exp_type":
            return self.c * math.exp(-1.0), self.c * math.exp(-1.0)
        s = np.concatenate([[1.0], [x for x, _ in self.table if x > 1.0]])
        ratio = np.abs(self(s)) / s
        return float(ratio.min()), float(ratio.max())

    def default_profile(self) -> GrowthProfile:
        """A growth profile for which the H.II sandwich holds for catalog laws.

        With f = c g and f0 = c' g the sandwich needs c' <= c and
        c * c'^(1/p) <= 1 near s = 1, hence c' = min(c, c^-p).
        """
        if self.kind in ("zero",):
            return GrowthProfile("linear", 1.0)
        if self.kind == "linear":
            return GrowthProfile("linear", min(self.c, 1.0 / self.c))
        if self.kind == "power":
            if self.p == 1:
                return GrowthProfile("linear", min(self.c, 1.0 / self.c))
            return GrowthProfile("power", min(self.c, self.c ** -self.p), self.p)
        if self.kind == "exp_type":
            return GrowthProfile("exp_type", min(self.c, 1.0))
        return GrowthProfile("tabulated", table=self.table)


@dataclass(frozen=True)
class TorqueLaw:
    """Torque feedback gamma on the disk.

    ``linear``: K x. ``cubic``: K x + k3 x^3 (k3 >= 0). Laws violating the
    sector condition |gamma(x)| >= K |x| (e.g. saturations) are rejected.
    """

    kind: str = "linear"
    K: float = 1.0
    k3: float = 0.0

    def __post_init__(self):
        if self.kind == "saturated":
            raise ConfigurationError(
                "saturated torque laws violate |gamma(x)| >= K|x| and are not admitted")
        if self.kind not in TORQUE_KINDS:
            raise ConfigurationError(f"unknown torque law kind {self.kind!r}")
        if self.kind != "zero" and not self.K > 0:
            raise ConfigurationError("sector constant K must be > 0")
        if self.k3 < 0:
            raise ConfigurationError("cubic coefficient k3 must be >= 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "linear":
            return self.K * x
        return self.K * x + self.k3 * x ** 3

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "linear":
            return np.full_like(x, self.K)
        return self.K + 3.0 * self.k3 * x ** 2


@dataclass(frozen=True)
class FeedbackLaw:
    damping: DampingLaw = field(default_factory=DampingLaw)
    torque: TorqueLaw = field(default_factory=TorqueLaw)
    profile: GrowthProfile | None = None
    c1: float | None = None
    c2: float | None = None

    def __post_init__(self):
        if self.profile is None:
            object.__setattr__(self, "profile", self.damping.default_profile())
        lo, hi = self.damping.linear_bounds()
        if self.c1 is None:
            object.__setattr__(self, "c1", lo)
        if self.c2 is None:
            object.__setattr__(self, "c2", hi)


def eval_feedback(law: FeedbackLaw, which: str, s):
    """f(s) for ``which='damping'``, gamma(s) for ``which='torque'``."""
    if which == "damping":
        out = law.damping(s)
    elif which == "torque":
        out = law.torque(s)
    else:
        raise ConfigurationError(f"unknown feedback component {which!r}")
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# hypothesis checks

@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    counterexample: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    checks: tuple[HypothesisCheck, ...]
    sector_constant: float | None = None

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self):
        lines = []
        for c in self.checks:
            tail = "" if c.passed else f" (first counterexample s = {c.counterexample!r})"
            lines.append(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}{tail}")
        return "\n".join(lines)


def default_grid(n: int = 2001, span: float = 10.0) -> np.ndarray:
    return np.linspace(-span, span, n)


def _first(mask, values):
    idx = np.flatnonzero(mask)
    return None if idx.size == 0 else float(values[idx[0]])


def check_hypotheses(law: FeedbackLaw, sample_grid=None, rtol: float = 1e-12) -> HypothesisReport:
    """Sample-based check of H.I, H.II, H.III and strict convexity of H on (0, r^2]."""
    grid = default_grid() if sample_grid is None else np.asarray(sample_grid, dtype=float)
    if grid.size == 0:
        raise ConfigurationError("sample grid is empty")
    s = np.unique(np.concatenate([grid, [0.0]]))
    f = law.damping(s)
    checks = []

    tol = rtol * np.maximum(1.0, np.abs(f))
    dec = np.diff(f) < -tol[1:]
    zero_ok = law.damping(0.0) == 0.0
    checks.append(HypothesisCheck(
        "H.I", bool(zero_ok and not dec.any()), 0.0 if not zero_ok else _first(dec, s[1:]),
        "f continuous, non-decreasing, f(0) = 0"))

    prof = law.profile
    inner = s[(np.abs(s) <= 1.0) & (s != 0.0)]
    fa = np.abs(law.damping(inner))
    lower = prof.f0(np.abs(inner))
    upper = prof.f0_inv(np.abs(inner))
    bad = (fa < lower * (1 - 1e-9)) | (fa > upper * (1 + 1e-9))
    checks.append(HypothesisCheck(
        "H.II.sandwich", not bad.any(), _first(bad, inner),
        "f0(|s|) <= |f(s)| <= f0^-1(|s|) for |s| <= 1"))

    outer = s[np.abs(s) >= 1.0]
    fo = np.abs(law.damping(outer))
    ao = np.abs(outer)
    bad = (fo < law.c1 * ao * (1 - 1e-9)) | (fo > law.c2 * ao * (1 + 1e-9)) | (law.c1 <= 0)
    checks.append(HypothesisCheck(
        "H.II.linear", not bad.any(), _first(bad, outer),
        f"{law.c1:.6g}|s| <= |f(s)| <= {law.c2:.6g}|s| for |s| >= 1"))

    g = law.torque(s)
    K = law.torque.K
    bad = (g * s < 0) | (np.abs(g) < K * np.abs(s) * (1 - 1e-12)) | (K <= 0)
    checks.append(HypothesisCheck(
        "H.III", not bad.any(), _first(bad, s),
        f"gamma(x) x >= 0 and |gamma(x)| >= {K:.6g}|x|"))

    x = np.linspace(0.0, prof.r ** 2, 401)[1:]
    Hx = prof.H(x)
    second = Hx[:-2] - 2.0 * Hx[1:-1] + Hx[2:]
    # skip points where H itself underflows (exp_type near 0)
    resolvable = Hx[:-2] > 1e-280
    if prof.kind == "linear":
        # affine H: the degenerate (exponential) case, convex but not strictly
        bad = second < -1e-12 * np.abs(Hx[1:-1])
        detail = "H affine (linear profile), convexity degenerate"
    else:
        bad = resolvable & ~(second > 0)
        detail = f"H strictly convex on (0, r^2], r = {prof.r:.6g}"
    checks.append(HypothesisCheck("H.convex", not bad.any(), _first(bad, x[1:-1]), detail))
    return HypothesisReport(tuple(checks), sector_constant=K)
