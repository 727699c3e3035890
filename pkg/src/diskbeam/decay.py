"""Convexity calculus for decay envelopes, envelope calibration, rate fits and
the spectral oracle for linear damping.

For a growth profile f0 the envelope family is built from::

    H(x)  = sqrt(x) f0(sqrt(x))            strictly convex on (0, r^2]
    H2(t) = t H'(eps0 t)
    H1(t) = int_t^1 ds / H2(s)             decreasing, H1(1) = 0, H1(0+) = inf
    E0(t) <= k3 H1^{-1}(k1 t + k2) E0(0)

Linear profiles give exponentials, power profiles give (1 + C tau)^(-2/(p-1))
and the exp_type profile gives logarithmic envelopes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .exceptions import DataError, DomainError, NotApplicable, NumericalError
from .model import GrowthProfile
from .spatial import Operators, resolved_cutoff

# log(float max) with a margin
_LOG_BIG = 700.0


# --------------------------------------------------------------------------
# H, H', H2, H*

def _check_domain(profile, x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)) or np.any(x > profile.r ** 2 * (1 + 1e-12)):
        raise DomainError(f"x must lie in (0, r^2] = (0, {profile.r ** 2:g}]")
    return x


def H(profile: GrowthProfile, x):
    x = _check_domain(profile, x)
    out = profile.H(x)
    return float(out) if out.ndim == 0 else out


def H_prime(profile: GrowthProfile, x):
    """H'(x); analytic for catalog profiles, central difference for tabulated ones."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("H' is defined for x >= 0")
    c, k = profile.c, profile.kind
    if k == "linear":
        out = np.full_like(x, c)
    elif k == "power":
        out = c * (profile.p + 1.0) / 2.0 * x ** ((profile.p - 1.0) / 2.0)
    elif k == "exp_type":
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = c * np.exp(-1.0 / x[pos]) / x[pos] ** 2
    else:
        h = 1e-6 * np.maximum(x, 1e-6)
        lo = np.maximum(x - h, 0.0)
        out = (profile.H(x + h) - profile.H(lo)) / (x + h - lo)
    return float(out) if out.ndim == 0 else out


def H2(profile: GrowthProfile, eps0: float, t):
    t = np.asarray(t, dtype=float)
    out = t * H_prime(profile, eps0 * t)
    return float(out) if np.ndim(out) == 0 else out


def _log_H2(profile, eps0, t):
    """log H2(t) computed without overflow/underflow (scalar)."""
    c = profile.c
    if profile.kind == "linear":
        return math.log(c * t)
    if profile.kind == "power":
        p = profile.p
        return math.log(c * (p + 1) / 2) + math.log(t) + (p - 1) / 2 * math.log(eps0 * t)
    if profile.kind == "exp_type":
        x = eps0 * t
        return math.log(c) + math.log(t) - 1.0 / x - 2.0 * math.log(x)
    val = H2(profile, eps0, t)
    return math.log(val) if val > 0 else -math.inf


def H_prime_inv(profile: GrowthProfile, s):
    """(H')^{-1}(s) on (0, H'(r^2)) by monotone bracketing (closed form for power)."""
    if profile.kind == "linear":
        raise NotApplicable("H' is constant for a linear profile; (H')^-1 is undefined")
    r2 = profile.r ** 2
    top = H_prime(profile, r2)
    shape = np.shape(s)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float)).reshape(-1)
    if np.any(~(s_arr > 0)) or np.any(s_arr >= top * (1 + 1e-12)):
        raise DomainError(f"s must lie in (0, H'(r^2)) = (0, {top:g})")
    if profile.kind == "power" and profile.p > 1:
        k = profile.c * (profile.p + 1) / 2
        out = (s_arr / k) ** (2.0 / (profile.p - 1))
    else:
        out = np.empty_like(s_arr)
        for i, si in enumerate(s_arr):
            g = lambda x: H_prime(profile, x) - si
            if g(r2) == 0:
                out[i] = r2
                continue
            lo = r2
            while g(lo) > 0:
                lo *= 0.5
                if lo < 1e-300:
                    raise NumericalError("cannot bracket (H')^-1", {"s": si})
            out[i] = brentq(g, lo, r2, xtol=1e-300, rtol=1e-15, maxiter=500)
    return float(out[0]) if np.ndim(s) == 0 else out.reshape(shape)


def H_star(profile: GrowthProfile, s):
    """Convex conjugate H*(s) = s (H')^-1(s) - H((H')^-1(s))."""
    x = H_prime_inv(profile, s)
    out = np.asarray(s) * x - profile.H(np.asarray(x))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HValues:
    H: float
    H_prime: float
    H2: float
    H_star_of_H_prime: float | None


def H_calculus(profile: GrowthProfile, eps0: float, x: float) -> HValues:
    """H(x), H'(x), H2(x) and H*(H'(x)) = x H'(x) - H(x) (None for affine H)."""
    hx = H(profile, x)
    hp = H_prime(profile, x)
    conj = None if profile.kind == "linear" else x * hp - hx
    return HValues(hx, hp, H2(profile, eps0, x), conj)


def verify_young(profile: GrowthProfile, eps0: float, A, B):
    """H*(A) + H(B) - A B, nonnegative by Young's inequality.

    Raises NotApplicable for affine H (linear profile).
    """
    if profile.kind == "linear":
        raise NotApplicable("Young inequality with H* needs strictly convex H")
    _check_domain(profile, B)
    out = H_star(profile, A) + profile.H(np.asarray(B, dtype=float)) - np.asarray(A) * np.asarray(B)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# H1 and its inverse

def H1_closed(profile: GrowthProfile, eps0: float, t):
    """Closed-form H1 for linear and power profiles."""
    t = np.asarray(t, dtype=float)
    if profile.kind == "linear":
        out = -np.log(t) / profile.c
    elif profile.kind == "power" and profile.p == 1:
        out = -np.log(t) / profile.c
    elif profile.kind == "power":
        p = profile.p
        C = profile.c * (p + 1) / 2 * eps0 ** ((p - 1) / 2)
        out = 2.0 / (C * (p - 1)) * (t ** (-(p - 1) / 2) - 1.0)
    else:
        raise NotApplicable(f"no closed form H1 for {profile.kind} profiles")
    return float(out) if out.ndim == 0 else out


def H1_inv_closed(profile: GrowthProfile, eps0: float, tau):
    tau = np.asarray(tau, dtype=float)
    if profile.kind == "linear" or (profile.kind == "power" and profile.p == 1):
        out = np.exp(-profile.c * tau)
    elif profile.kind == "power":
        p = profile.p
        C = profile.c * (p + 1) / 2 * eps0 ** ((p - 1) / 2)
        out = (1.0 + C * (p - 1) / 2 * tau) ** (-2.0 / (p - 1))
    else:
        raise NotApplicable(f"no closed form H1^-1 for {profile.kind} profiles")
    return float(out) if out.ndim == 0 else out


def _H1_quad_scalar(profile, eps0, t):
    if t == 1.0:
        return 0.0
    # s = e^u turns the 1/s-type singularity into a smooth integrand
    log_g = lambda u: u - _log_H2(profile, eps0, math.exp(u))
    a = math.log(t)
    if log_g(a) > _LOG_BIG:
        return math.inf
    val, err = quad(lambda u: math.exp(log_g(u)), a, 0.0, epsabs=1e-12, epsrel=1e-13, limit=500)
    return val


def H1(profile: GrowthProfile, eps0: float, t, method: str = "auto"):
    """int_t^1 ds / H2(s) for t in (0, 1].

    ``method='quad'`` forces adaptive quadrature; ``'auto'`` uses closed
    forms for linear and power profiles.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)) or np.any(t_arr > 1):
        raise DomainError("H1 is defined on (0, 1]")
    if method == "auto" and profile.kind in ("linear", "power"):
        return H1_closed(profile, eps0, t)
    if method not in ("auto", "quad"):
        raise ValueError(f"unknown method {method!r}")
    out = np.vectorize(lambda x: _H1_quad_scalar(profile, eps0, float(x)), otypes=[float])(t_arr)
    return float(out) if out.ndim == 0 else out


def H1_inv(profile: GrowthProfile, eps0: float, tau, rtol: float = 1e-10, method: str = "auto"):
    """Solve H1(s) = tau for s in (0, 1] by bisection in log s."""
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau_arr < 0) or np.any(np.isnan(tau_arr)):
        raise DomainError("H1^-1 needs tau >= 0")
    out = np.empty_like(tau_arr)
    for i, ti in enumerate(tau_arr):
        if ti == 0.0:
            out[i] = 1.0
            continue
        g = lambda u: H1(profile, eps0, math.exp(u), method) - ti
        hi = 0.0
        lo = -1.0
        while g(lo) < 0:
            hi = lo
            lo *= 2.0
            if lo < -745:
                raise NumericalError("H1^-1 underflows", {"tau": ti})
        while math.exp(hi - lo) - 1.0 > rtol * 1e-2:
            mid = 0.5 * (lo + hi)
            if g(mid) < 0:
                hi = mid
            else:
                lo = mid
        out[i] = math.exp(0.5 * (lo + hi))
    return float(out[0]) if np.ndim(tau) == 0 else out


class EnvelopeShape:
    """Vectorised H1^-1 for one (profile, eps0); tabulated for profiles without closed forms."""

    def __init__(self, profile: GrowthProfile, eps0: float, n_table: int = 4000):
        self.profile = profile
        self.eps0 = eps0
        self._closed = profile.kind == "linear" or profile.kind == "power"
        if not self._closed:
            self._build_table(n_table)

    def _build_table(self, n):
        # cumulative integral of exp(u)/H2(exp(u)) from u = 0 downwards
        log_g = lambda u: u - _log_H2(self.profile, self.eps0, math.exp(u))
        g = lambda u: math.exp(log_g(u))
        limit = _LOG_BIG - 50
        hi, lo = 0.0, -1.0
        while log_g(lo) < limit and lo > -700:
            hi, lo = lo, 2.0 * lo
        u_min = lo if log_g(lo) < limit else brentq(lambda u: log_g(u) - limit, lo, hi)
        us = np.concatenate([[0.0], -np.geomspace(1e-10, -u_min, n - 1)])
        xg, wg = np.polynomial.legendre.leggauss(10)
        vals = np.zeros(n)
        for i in range(1, n):
            a, b = us[i], us[i - 1]
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            vals[i] = vals[i - 1] + half * sum(w * g(mid + half * x) for x, w in zip(xg, wg))
        keep = np.concatenate([[True], np.diff(vals) > 0])
        self._tau = vals[keep]
        self._u = us[keep]
        # exact slopes du/dlog(1+tau) = -(1 + tau)/g(u) make the inverse fourth-order accurate
        slopes = np.array([-(1.0 + tv) / g(u) for tv, u in zip(self._tau, self._u)])
        self._interp = CubicHermiteSpline(np.log1p(self._tau), self._u, slopes, extrapolate=False)

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self._closed:
            return H1_inv_closed(self.profile, self.eps0, tau)
        u = self._interp(np.log1p(np.minimum(tau, self._tau[-1])))
        out = np.exp(u)
        return np.where(tau > self._tau[-1], 0.0, out)


# --------------------------------------------------------------------------
# envelope calibration

K_GRID = tuple(10.0 ** i for i in range(-3, 3))
EPS0_FACTORS = (0.1, 0.25, 0.5, 0.75)


class EnvelopeFitError(NumericalError):
    """No (k1, k2) on the search grid yields a dominating envelope."""


@dataclass(frozen=True)
class EnvelopeFit:
    profile: GrowthProfile
    eps0: float
    k1: float
    k2: float
    k3: float
    dominance_margin: float
    E0_initial: float
    tolerance: float = 1e-9
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def feasible(self) -> bool:
        return self.dominance_margin >= -self.tolerance * self.E0_initial

    def envelope(self, t):
        shape = EnvelopeShape(self.profile, self.eps0)
        return self.k3 * shape(self.k1 * np.asarray(t, dtype=float) + self.k2) * self.E0_initial


def default_eps0(profile: GrowthProfile) -> float:
    return 0.5 * profile.r ** 2


def _cell_margin(shape, t, E0, k1, k2, headroom):
    base = float(shape(np.array(k2)))
    if not base > 0:
        return -math.inf, math.nan
    k3 = headroom / base
    env = k3 * shape(k1 * t + k2) * E0[0]
    return float(np.min(env - E0)), k3


def calibrate_envelope(t, E0, profile: GrowthProfile, eps0: float | None = None,
                       search_eps0: bool = False, headroom: float = 1.1,
                       tolerance: float = 1e-9, k_grid=K_GRID) -> EnvelopeFit:
    """Largest k1 on a log grid (refined once) for which k3 H1^-1(k1 t + k2) E0(0) dominates E0.

    k3 is tied to k2 so that the envelope starts at ``headroom * E0(0)``.
    """
    t = np.asarray(t, dtype=float)
    E0 = np.asarray(E0, dtype=float)
    if t.shape != E0.shape or t.size < 2:
        raise DataError("t and E0 must be equal-length series with at least two samples")
    if not E0[0] > 0:
        raise DataError("E0(0) must be positive")
    t = t - t[0]
    r2 = profile.r ** 2
    if eps0 is None:
        eps_list = [f * r2 for f in EPS0_FACTORS] if search_eps0 else [default_eps0(profile)]
    else:
        if not 0 < eps0 < r2:
            raise DomainError("eps0 must lie in (0, r^2)")
        eps_list = [eps0]
    if profile.kind == "linear":
        eps_list = eps_list[:1]          # H2 does not depend on eps0 for affine H
    tol_abs = tolerance * E0[0]
    best = None
    best_margin_seen = -math.inf
    cells = 0
    for eps in eps_list:
        shape = EnvelopeShape(profile, eps)
        feasible = []
        for k1, k2 in itertools.product(k_grid, k_grid):
            m, k3 = _cell_margin(shape, t, E0, k1, k2, headroom)
            cells += 1
            best_margin_seen = max(best_margin_seen, m)
            if m >= -tol_abs:
                feasible.append((k1, m, k2, k3))
        if not feasible:
            continue
        k1b, _, k2b, _ = max(feasible)
        fine1 = k1b * 10.0 ** np.linspace(0.0, 1.0, 11)
        fine2 = k2b * 10.0 ** np.linspace(-1.0, 1.0, 21)
        for k1, k2 in itertools.product(fine1, fine2):
            m, k3 = _cell_margin(shape, t, E0, float(k1), float(k2), headroom)
            cells += 1
            if m >= -tol_abs:
                feasible.append((float(k1), m, float(k2), k3))
        k1, m, k2, k3 = max(feasible)
        cand = (k1, m, eps, k2, k3)
        if best is None or cand[:2] > best[:2]:
            best = cand
    if best is None:
        raise EnvelopeFitError(
            f"no dominating {profile.kind} envelope on the grid; wrong profile family?",
            {"cells": cells, "best_margin": best_margin_seen, "E0_initial": float(E0[0]),
             "eps0_candidates": eps_list})
    k1, m, eps, k2, k3 = best
    return EnvelopeFit(profile, eps, k1, k2, k3, m, float(E0[0]), tolerance, {"cells": cells})


def envelope_feasible(t, E0, profile: GrowthProfile, **kwargs) -> bool:
    try:
        calibrate_envelope(t, E0, profile, **kwargs)
    except EnvelopeFitError:
        return False
    return True


# --------------------------------------------------------------------------
# rate fits

@dataclass(frozen=True)
class RateFit:
    kind: str
    rate: float
    prefactor: float
    window: tuple
    quality: float

    @property
    def exponent(self) -> float:
        return self.rate


NOISE_FLOOR = 1e-10


def fit_rates(t, series, kind: str = "exponential", drop_fraction: float = 0.2,
              window=None, floor: float | None = None, floor_ref: str = "initial") -> RateFit:
    """Least-squares decay fit on a window (default: drop the first 20% of samples).

    With ``floor`` the window also ends before the first sample at or below
    ``floor`` times a reference value; a run that has decayed into roundoff
    carries no rate information there. The reference is ``series[0]``
    (``floor_ref='initial'``) or the first windowed value (``'window'``); the
    latter suits series whose initial value is inflated by a transient.

    * exponential: log y = log A - rate t  (rate > 0 for decay)
    * power: log y = log A + exponent log(1 + t)
    * logarithmic: 1/y = (ln(1 + t) + b) / A, i.e. y ~ A / (b + ln(1+t));
      ``rate`` is the slope of 1/y against ln(1+t)
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(series, dtype=float)
    if t.shape != y.shape:
        raise DataError("t and series must have the same shape")
    if window is None:
        start = int(math.floor(drop_fraction * len(t)))
        mask = np.zeros(len(t), bool)
        mask[start:] = True
    else:
        mask = (t >= window[0]) & (t <= window[1])
    if floor is not None and mask.any():
        if floor_ref not in ("initial", "window"):
            raise ValueError(f"unknown floor reference {floor_ref!r}")
        ref = abs(y[0]) if floor_ref == "initial" else abs(y[np.argmax(mask)])
        low = np.flatnonzero(mask & (np.abs(y) <= floor * ref))
        if low.size:
            mask[low[0]:] = False
    tw, yw = t[mask], y[mask]
    if tw.size < 3:
        raise DataError("fewer than three samples in the fit window")
    if np.any(~(yw > 0)):
        raise DataError("series must be positive in the fit window")
    if kind == "exponential":
        X, Y = tw, np.log(yw)
    elif kind == "power":
        X, Y = np.log1p(tw), np.log(yw)
    elif kind == "logarithmic":
        X, Y = np.log1p(tw), 1.0 / yw
    else:
        raise ValueError(f"unknown fit kind {kind!r}")
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    quality = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    quality = min(max(quality, 0.0), 1.0)
    if kind == "exponential":
        rate, pref = -slope, math.exp(intercept)
    elif kind == "power":
        rate, pref = slope, math.exp(intercept)
    else:
        rate, pref = slope, (1.0 / slope if slope != 0 else math.inf)
    return RateFit(kind, float(rate), float(pref), (float(tw[0]), float(tw[-1])), quality)


def tail_envelope(series):
    """sup_{s >= t} |x(s)|: a monotone envelope of an oscillating decaying series."""
    a = np.abs(np.asarray(series, dtype=float))
    return np.maximum.accumulate(a[::-1])[::-1]


def predicted_decay_kind(profile: GrowthProfile) -> str:
    if profile.kind == "linear" or (profile.kind == "power" and profile.p == 1):
        return "exponential"
    if profile.kind == "power":
        return "power"
    if profile.kind == "exp_type":
        return "logarithmic"
    return "unknown"


# --------------------------------------------------------------------------
# spectral oracle

@dataclass(frozen=True)
class SpectralResult:
    eigenvalues: np.ndarray = field(repr=False)
    max_real_part: float
    max_real_part_all: float
    cutoff: float
    resolved: np.ndarray = field(repr=False)


def closed_loop_matrix(ops: Operators, gain: float) -> np.ndarray:
    """First-order generator on (y, v) for the linearly damped subsystem."""
    p = ops.params
    n = ops.ndof
    Minv = sla.cho_solve(sla.cho_factor(ops.M), np.eye(n))
    D = p.EI * gain * np.outer(ops.tip_slope, ops.tip_slope)
    return np.block([[np.zeros((n, n)), np.eye(n)],
                     [-Minv @ ops.stiffness(), -Minv @ D]])


def spectral_abscissa(ops: Operators, params=None, linear_gain: float = 1.0) -> SpectralResult:
    """Spectrum of the linearly damped subsystem and its rightmost resolved real part.

    ``max_real_part`` is taken over eigenvalues with |lambda| below the
    resolved cutoff; the top of the discrete spectrum consists of mesh modes
    whose weak damping is a discretisation artefact (``max_real_part_all``).
    """
    if params is not None and params is not ops.params:
        from dataclasses import replace
        ops = replace(ops, params=params)
    if ops.ndof > 128:
        raise NumericalError("dense eigen-solve limited to n_elements <= 64",
                             {"ndof": ops.ndof})
    try:
        ev = np.linalg.eigvals(closed_loop_matrix(ops, linear_gain))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("nonsymmetric eigensolver failed", {"gain": linear_gain}) from exc
    cut = resolved_cutoff(ops)
    resolved = np.abs(ev) <= cut
    return SpectralResult(ev, float(np.max(ev.real[resolved])), float(np.max(ev.real)),
                          cut, resolved)


def damped_mode(ops: Operators, gain: float, index: int = 1, amplitude: float = 1.0):
    """Real initial data (y0, v0) lying on the index-th damped oscillatory eigenmode.

    The mode is phased so its tip displacement is real and equal to ``amplitude``.
    """
    A = closed_loop_matrix(ops, gain)
    ev, vec = np.linalg.eig(A)
    n = ops.ndof
    osc = np.flatnonzero(ev.imag > 0)
    order = osc[np.argsort(ev.imag[osc])]
    if not 1 <= index <= len(order):
        raise DomainError(f"mode index must be in [1, {len(order)}]")
    if len(order) == 0:
        raise NumericalError("no oscillatory modes")
    j = order[index - 1]
    xi = vec[:, j]
    xi = xi / xi[n - 2] * amplitude
    return xi[:n].real.copy(), xi[n:].real.copy()
