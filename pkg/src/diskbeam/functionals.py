"""Energy, modified energy, multiplier and Lyapunov functionals on discrete states.

All quadratic forms use the assembled matrices, so integrals of products of
Hermite fields are exact. The energy uses the target rate ``varpi``, not
the instantaneous ``omega``, as the state norm does.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import BeamState, Integrator, Trace
from .exceptions import ConfigurationError, NotApplicable
from .model import FeedbackLaw, GrowthProfile, PhysicalParams
from .spatial import Operators, evaluate


def _ops_for(ops, params):
    if params is None or params is ops.params:
        return ops
    from dataclasses import replace
    return replace(ops, params=params)


def quadratic_energy(ops: Operators, u, w) -> float:
    """1/2 (w'Mw + EI u'Kb u - rho varpi^2 u'M0 u) for displacement u and velocity w."""
    return 0.5 * (float(w @ ops.M @ w) + ops.Q(u))


def energy_E(state: BeamState, ops: Operators, params: PhysicalParams | None = None) -> float:
    return quadratic_energy(_ops_for(ops, params), state.y, state.v)


def energy_E0(state: BeamState, ops: Operators, params: PhysicalParams | None,
              law: FeedbackLaw) -> float:
    """E(y, y_t) + E(y_t, y_tt) with the acceleration recomputed from (y, v, omega)."""
    ops = _ops_for(ops, params)
    a = Integrator(ops, law).consistent_acceleration(state.y, state.v, state.omega)
    return quadratic_energy(ops, state.y, state.v) + quadratic_energy(ops, state.v, a)


def functional_F(state: BeamState, ops: Operators) -> float:
    """2 int x y_t y_x dx."""
    return 2.0 * float(state.v @ ops.G @ state.y)


def lyapunov_V(state: BeamState, ops: Operators, params: PhysicalParams | None = None) -> float:
    """Disk term, its y-weighted companion and the beam energy, with explicit EI and rho."""
    ops = _ops_for(ops, params)
    p = ops.params
    dev = state.dev
    disk = 0.5 * dev * dev * (p.rho * ops.l2(state.y) + p.Id)
    return disk + quadratic_energy(ops, state.y, state.v)


def boundary_flux(state: BeamState, params: PhysicalParams, law: FeedbackLaw) -> float:
    s = float(state.v[-1])
    return params.EI * s * float(law.damping(s))


def torque_flux(state: BeamState, law: FeedbackLaw) -> float:
    return state.dev * float(law.torque(state.dev))


@dataclass(frozen=True)
class FunctionalSample:
    t: float
    E: float
    E0: float
    F: float
    V: float
    omega: float
    tip_slope_velocity: float
    boundary_flux: float
    torque_flux: float


TRACE_COLUMNS = ("t", "E", "E0", "F", "V", "omega", "tip_slope_velocity",
                 "boundary_flux", "torque_flux")


@dataclass(frozen=True)
class FunctionalSeries:
    """Column arrays of functional values along a trace."""

    t: np.ndarray
    E: np.ndarray
    E0: np.ndarray
    F: np.ndarray
    V: np.ndarray
    omega: np.ndarray
    tip_slope_velocity: np.ndarray
    boundary_flux: np.ndarray
    torque_flux: np.ndarray
    dev: np.ndarray = field(repr=False, default=None)
    dE: np.ndarray = field(repr=False, default=None)
    dV: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return len(self.t)

    def sample(self, k) -> FunctionalSample:
        return FunctionalSample(*(float(getattr(self, c)[k]) for c in TRACE_COLUMNS))

    def columns(self):
        return {c: getattr(self, c) for c in TRACE_COLUMNS}

    def E1(self, eps=None):
        """E0 + eps F; default eps keeps |eps F(0)| <= E0(0)/2."""
        if eps is None:
            eps = default_multiplier_weight(self.E0[0], self.F[0])
        return self.E0 + eps * self.F

    def state_norm(self):
        """State norm of (y, y_t): sqrt(2 E)."""
        return np.sqrt(np.maximum(2.0 * self.E, 0.0))


def energy_increment(ops: Operators, s0: BeamState, s1: BeamState) -> float:
    """E(s1) - E(s0) in difference form; avoids the cancellation in y'Ky."""
    dy, dv = s1.y - s0.y, s1.v - s0.v
    return 0.5 * (float(dv @ ops.M @ (s1.v + s0.v)) + float(dy @ ops.stiffness() @ (s1.y + s0.y)))


def compatibility_residual(ops: Operators, law: FeedbackLaw, y0, v0) -> dict:
    """Free-end conditions of smooth data: y_xx(1) + f(v_x(1)) and y_xxx(1).

    Reported only. The third derivative of the Hermite field is constant per
    element, so the shear entry is a coarse last-element value.
    """
    y0 = np.asarray(y0, dtype=float)
    s = float(np.asarray(v0, dtype=float)[-1])
    moment = float(evaluate(ops.grid, y0, 1.0, 2)[0]) + float(law.damping(s))
    shear = float(evaluate(ops.grid, y0, 1.0, 3)[0])
    return {"moment": moment, "shear": shear}


def default_multiplier_weight(E0_initial, F_initial, cap=1.0):
    if F_initial == 0.0:
        return cap
    return min(cap, 0.5 * abs(E0_initial) / abs(F_initial))


def evaluate_trace(trace: Trace, ops: Operators, law: FeedbackLaw) -> FunctionalSeries:
    """All functionals at every sample of a trace."""
    p = ops.params
    integ = Integrator(ops, law)
    n = len(trace)
    cols = {c: np.empty(n) for c in TRACE_COLUMNS}
    dE = np.empty(max(n - 1, 0))
    prev = None
    for k, st in enumerate(trace.states()):
        if prev is not None:
            dE[k - 1] = energy_increment(ops, prev, st)
        prev = st
        a = integ.consistent_acceleration(st.y, st.v, st.omega)
        E = quadratic_energy(ops, st.y, st.v)
        cols["t"][k] = st.t
        cols["E"][k] = E
        cols["E0"][k] = E + quadratic_energy(ops, st.v, a)
        cols["F"][k] = functional_F(st, ops)
        cols["V"][k] = lyapunov_V(st, ops)
        cols["omega"][k] = st.omega
        cols["tip_slope_velocity"][k] = st.v[-1]
        cols["boundary_flux"][k] = boundary_flux(st, p, law)
        cols["torque_flux"][k] = torque_flux(st, law)
    disk = cols["V"] - cols["E"]
    return FunctionalSeries(**cols, dev=np.asarray(trace.dev).copy(), dE=dE,
                            dV=np.diff(disk) + dE)


@dataclass(frozen=True)
class Residuals:
    t_mid: np.ndarray
    residual_E: np.ndarray
    residual_V: np.ndarray
    max_E: float
    max_V: float


def dissipation_residuals(trace_or_series, ops: Operators | None = None,
                          params: PhysicalParams | None = None,
                          law: FeedbackLaw | None = None) -> Residuals:
    """Discrete check of E' = -EI s f(s) and V' = -EI s f(s) - (w-varpi) gamma(w-varpi).

    Residuals use the mean of the end-point fluxes on each sample interval and
    are normalised by E(0)+1 (resp. V(0)+1).
    """
    if isinstance(trace_or_series, FunctionalSeries):
        fs = trace_or_series
    else:
        if ops is None or law is None:
            raise ConfigurationError("ops and law are required to evaluate a trace")
        fs = evaluate_trace(trace_or_series, _ops_for(ops, params), law)
    if len(fs) < 2:
        raise ConfigurationError("need at least two samples for residuals")
    dt = np.diff(fs.t)
    bflux = 0.5 * (fs.boundary_flux[1:] + fs.boundary_flux[:-1])
    tflux = 0.5 * (fs.torque_flux[1:] + fs.torque_flux[:-1])
    dE = np.diff(fs.E) if fs.dE is None else fs.dE
    dV = np.diff(fs.V) if fs.dV is None else fs.dV
    rE = dE / dt + bflux
    rV = dV / dt + bflux + tflux
    return Residuals(0.5 * (fs.t[1:] + fs.t[:-1]), rE, rV,
                     float(np.max(np.abs(rE)) / (fs.E[0] + 1.0)),
                     float(np.max(np.abs(rV)) / (fs.V[0] + 1.0)))


def diagnostic_R(E0, E, profile: GrowthProfile, eps0: float, delta: float, E0_initial: float):
    """H'(eps0 E0/E0(0)) E0 + delta E (vectorised over E0, E)."""
    from .decay import H_prime

    if E0_initial == 0:
        raise NotApplicable("R is undefined for E0(0) = 0")
    if not 0 < eps0 < profile.r ** 2:
        raise ConfigurationError("eps0 must lie in (0, r^2)")
    if not delta > 0:
        raise ConfigurationError("delta must be > 0")
    E0 = np.asarray(E0, dtype=float)
    E = np.asarray(E, dtype=float)
    out = H_prime(profile, eps0 * E0 / E0_initial) * E0 + delta * E
    return float(out) if out.ndim == 0 else out
