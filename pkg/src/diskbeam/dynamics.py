"""Time integration of the beam subsystem and the coupled disk-beam system.

Semi-discrete equations (free dofs, ``b`` = tip-slope functional)::

    M a + (EI Kb - rho w^2 M0) y + EI f(b.v) b = 0
    d/dt (w - varpi) = (-gamma(w - varpi) - 2 rho w y'M0 v) / (Id + rho y'M0 y)

In subsystem mode w is frozen at varpi. The beam is advanced with the
average-acceleration Newmark scheme; the boundary nonlinearity is rank
one, so each implicit solve reduces to a scalar equation in the new tip
slope velocity. The angular velocity uses the trapezoidal rule and is
coupled to the beam by staggered sub-iteration.

The tip damper on the slope dof creates a stiff real mode that the
trapezoidal rule does not damp (it flips sign every step). Initial data that
violate the free-end moment condition excite it; ``startup_steps`` replaces
the first steps by two implicit Euler half-steps each, which removes it.
"""
from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigurationError, StepFailure
from .model import FeedbackLaw, PhysicalParams, validate_params
from .spatial import BandedSPD, Operators, assemble

log = logging.getLogger(__name__)

NEWTON_MAXITER = 100
STAGGER_MAXITER = 25
STAGGER_RTOL = 1e-10
MAX_HALVINGS = 4


@dataclass(frozen=True)
class BeamState:
    """Snapshot of the discrete state. ``dev`` is omega - varpi, integrated directly."""

    t: float
    y: np.ndarray
    v: np.ndarray
    a: np.ndarray
    omega: float
    dev: float = 0.0

    def negated(self) -> "BeamState":
        return replace(self, y=-self.y, v=-self.v, a=-self.a)


def solve_tip_equation(s_lin: float, kappa: float, law_f, history=None) -> float:
    """Root of s + kappa f(s) = s_lin for non-decreasing odd f.

    The root lies between 0 and s_lin; Newton steps that leave the bracket
    (corners of the power law, flat spots of exp_type) fall back to bisection.
    """
    if s_lin == 0.0 or kappa == 0.0:
        return s_lin
    lo, hi = (0.0, s_lin) if s_lin > 0 else (s_lin, 0.0)
    s = s_lin
    for _ in range(NEWTON_MAXITER):
        g = s + kappa * float(law_f(s)) - s_lin
        if history is not None:
            history.append(g)
        if not np.isfinite(g):
            raise StepFailure("non-finite residual in the boundary equation",
                              {"residuals": list(history or []), "s": s})
        if g == 0.0:
            return s
        if g > 0:
            hi = s
        else:
            lo = s
        dg = 1.0 + kappa * float(law_f.derivative(s))
        s_new = s - g / dg
        if not lo < s_new < hi:
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= 2e-16 * abs(s) or hi - lo <= 2e-16 * max(abs(lo), abs(hi)):
            return s_new
        s = s_new
    raise StepFailure("scalar boundary equation did not converge",
                      {"residuals": list(history or []), "bracket": (lo, hi)})


class Integrator:
    """Average-acceleration Newmark stepper with cached factorizations."""

    def __init__(self, ops: Operators, law: FeedbackLaw, mode: str = "subsystem"):
        if mode not in ("subsystem", "coupled"):
            raise ConfigurationError(f"unknown mode {mode!r}")
        self.ops = ops
        self.params = ops.params
        self.law = law
        self.mode = mode
        self._cache = {}
        self._mass = None

    # -- linear algebra helpers
    def _factor(self, dt, omega, scheme="trapezoid"):
        key = (dt, omega, scheme)
        hit = self._cache.get(key)
        if hit is None:
            K = self.ops.stiffness(omega)
            weight = 0.25 if scheme == "trapezoid" else 1.0
            S = BandedSPD(self.ops.M + weight * dt * dt * K)
            w = S.solve(self.ops.tip_slope)
            hit = (K, S, w)
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def consistent_acceleration(self, y, v, omega):
        if self._mass is None:
            self._mass = BandedSPD(self.ops.M)
        s = float(v[-1])
        rhs = -self.ops.stiffness(omega) @ y
        fs = float(self.law.damping(s))
        if fs != 0.0:
            rhs[-1] -= self.params.EI * fs
        return self._mass.solve(rhs)

    # -- one beam solve at a frozen new angular velocity
    def _beam_update(self, state, dt, omega1):
        K, S, w = self._factor(dt, omega1)
        y_pred = state.y + dt * state.v + 0.25 * dt * dt * state.a
        v_pred = state.v + 0.5 * dt * state.a
        a_lin = S.solve(-(K @ y_pred))
        s_lin = float(v_pred[-1] + 0.5 * dt * a_lin[-1])
        kappa = 0.5 * dt * self.params.EI * float(w[-1])
        hist = []
        s = solve_tip_equation(s_lin, kappa, self.law.damping, hist)
        a1 = a_lin - self.params.EI * float(self.law.damping(s)) * w
        y1 = y_pred + 0.25 * dt * dt * a1
        v1 = v_pred + 0.5 * dt * a1
        return y1, v1, a1

    def _euler_update(self, state, dt, omega1):
        """Implicit Euler on (y, v); the returned acceleration is (v1 - v0)/dt."""
        K, S, w = self._factor(dt, omega1, "euler")
        v_lin = S.solve(self.ops.M @ state.v - dt * (K @ state.y))
        kappa = dt * self.params.EI * float(w[-1])
        s = solve_tip_equation(float(v_lin[-1]), kappa, self.law.damping, [])
        v1 = v_lin - dt * self.params.EI * float(self.law.damping(s)) * w
        y1 = state.y + dt * v1
        return y1, v1, (v1 - state.v) / dt

    def _dev_rate(self, dev, y, v):
        p = self.params
        J = p.Id + p.rho * float(y @ self.ops.M0 @ y)
        c = float(y @ self.ops.M0 @ v)
        omega = p.varpi + dev
        return (-float(self.law.torque(dev)) - 2.0 * p.rho * omega * c) / J, J, c

    def _dev_update(self, state, dt, y1, v1, rate0, theta=0.5):
        """Theta rule (trapezoidal by default) for omega - varpi given the new beam state."""
        p = self.params
        J1 = p.Id + p.rho * float(y1 @ self.ops.M0 @ y1)
        c1 = float(y1 @ self.ops.M0 @ v1)
        base = state.dev + (1.0 - theta) * dt * rate0
        d = state.dev + dt * rate0
        for _ in range(NEWTON_MAXITER):
            g1 = (-float(self.law.torque(d)) - 2.0 * p.rho * (p.varpi + d) * c1) / J1
            r = d - base - theta * dt * g1
            dr = 1.0 + theta * dt * (float(self.law.torque.derivative(d)) + 2.0 * p.rho * c1) / J1
            d_new = d - r / dr
            if abs(d_new - d) <= 1e-15 * abs(d_new) or d_new == d:
                return d_new
            d = d_new
        raise StepFailure("angular velocity update did not converge", {"dev": d})

    def _single(self, state, dt, scheme="trapezoid"):
        update = self._beam_update if scheme == "trapezoid" else self._euler_update
        theta = 0.5 if scheme == "trapezoid" else 1.0
        if self.mode == "subsystem":
            y1, v1, a1 = update(state, dt, self.params.varpi)
            return BeamState(state.t + dt, y1, v1, a1, self.params.varpi, 0.0)
        rate0, _, _ = self._dev_rate(state.dev, state.y, state.v)
        dev1 = state.dev + dt * rate0
        history = []
        for _ in range(STAGGER_MAXITER):
            y1, v1, a1 = update(state, dt, self.params.varpi + dev1)
            dev_new = self._dev_update(state, dt, y1, v1, rate0, theta)
            change = abs(dev_new - dev1)
            history.append(change)
            dev1 = dev_new
            if change <= STAGGER_RTOL * abs(dev1):
                return BeamState(state.t + dt, y1, v1, a1, self.params.varpi + dev1, dev1)
        raise StepFailure("staggered beam/omega iteration did not converge",
                          {"history": history})

    def step(self, state: BeamState, dt: float, scheme: str = "trapezoid") -> BeamState:
        """One step of size dt; on failure retry with up to four dt halvings.

        ``scheme='euler'`` takes two implicit Euler half-steps instead (start-up).
        """
        if not dt > 0:
            raise ConfigurationError("dt must be > 0")
        if scheme not in ("trapezoid", "euler"):
            raise ConfigurationError(f"unknown scheme {scheme!r}")
        failure = None
        for halvings in range(MAX_HALVINGS + 1):
            n_sub = 2 ** halvings * (2 if scheme == "euler" else 1)
            h = dt / n_sub
            try:
                s = state
                for _ in range(n_sub):
                    s = self._single(s, h, scheme)
                if halvings:
                    log.debug("step at t=%g needed %d halvings", state.t, halvings)
                return replace(s, t=state.t + dt)
            except StepFailure as exc:
                failure = exc
        raise StepFailure(f"step failed at t={state.t!r} after {MAX_HALVINGS} halvings",
                          failure.diagnostics if failure else {})


def consistent_acceleration(y, v, omega, ops: Operators, params: PhysicalParams | None,
                            law: FeedbackLaw) -> np.ndarray:
    """Solve M a = -(EI Kb - rho omega^2 M0) y - EI f(b.v) b."""
    if params is not None and params is not ops.params:
        ops = replace(ops, params=params)
    return Integrator(ops, law).consistent_acceleration(np.asarray(y, float), np.asarray(v, float), omega)


def initial_state(ops: Operators, law: FeedbackLaw, y0, v0, omega0=None, t0=0.0) -> BeamState:
    p = ops.params
    w = p.omega0 if omega0 is None else omega0
    y0 = np.asarray(y0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    a0 = Integrator(ops, law).consistent_acceleration(y0, v0, w)
    return BeamState(t0, y0, v0, a0, w, w - p.varpi)


def step(state: BeamState, dt: float, mode: str, ops: Operators,
         params: PhysicalParams | None, law: FeedbackLaw) -> BeamState:
    """Functional form of :meth:`Integrator.step` (no factorization reuse across calls)."""
    if params is not None and params is not ops.params:
        ops = replace(ops, params=params)
    return Integrator(ops, law, mode).step(state, dt)


# --------------------------------------------------------------------------
# traces

@dataclass(frozen=True)
class Trace:
    """Sampled trajectory. Arrays are indexed by sample; ``Y[k]`` is the state at ``t[k]``."""

    t: np.ndarray
    Y: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    dev: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)
    failure: dict | None = None

    def __len__(self):
        return len(self.t)

    def state(self, k: int) -> BeamState:
        return BeamState(float(self.t[k]), self.Y[k], self.V[k], self.A[k],
                         float(self.omega[k]), float(self.dev[k]))

    def states(self):
        for k in range(len(self.t)):
            yield self.state(k)

    @property
    def complete(self) -> bool:
        return self.failure is None


def integrate(ops: Operators, law: FeedbackLaw, state: BeamState, dt: float, n_steps: int,
              cadence: int = 10, mode: str = "subsystem", meta: dict | None = None,
              startup_steps: int = 0) -> Trace:
    """March n_steps of size dt from ``state``, sampling every ``cadence`` steps (and the last).

    The first ``startup_steps`` steps use implicit Euler half-steps.
    """
    stepper = Integrator(ops, law, mode)
    n_samples = n_steps // cadence + 1 + (1 if n_steps % cadence else 0)
    nd = ops.ndof
    T = np.empty(n_samples)
    Y, V, A = (np.empty((n_samples, nd)) for _ in range(3))
    W, D = np.empty(n_samples), np.empty(n_samples)

    def record(k, s):
        T[k], Y[k], V[k], A[k], W[k], D[k] = s.t, s.y, s.v, s.a, s.omega, s.dev

    record(0, state)
    k = 1
    failure = None
    t0 = state.t
    for i in range(1, n_steps + 1):
        try:
            state = stepper.step(state, dt, "euler" if i <= startup_steps else "trapezoid")
        except StepFailure as exc:
            failure = {"step": i, "t": state.t, "message": str(exc),
                       "diagnostics": _jsonable(exc.diagnostics)}
            log.warning("run aborted: %s", exc)
            break
        # t from the step count keeps sample times free of accumulated roundoff
        state = replace(state, t=t0 + i * dt)
        if i % cadence == 0 or i == n_steps:
            record(k, state)
            k += 1
    return Trace(T[:k].copy(), Y[:k].copy(), V[:k].copy(), A[:k].copy(), W[:k].copy(),
                 D[:k].copy(), dict(meta or {}), failure)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return str(obj)


def simulate(config) -> Trace:
    """Run a validated :class:`~diskbeam.config.SimConfig` from projected initial data."""
    report = validate_params(config.params)
    if not report.admissible:
        raise ConfigurationError("non-admissible parameters:\n" + str(report))
    ops = assemble(config.params, config.grid)
    y0, v0 = config.initial.project(ops, config.law)
    omega0 = config.params.omega0 if config.mode == "coupled" else config.params.varpi
    state = initial_state(ops, config.law, y0, v0, omega0)
    meta = {"mode": config.mode, "dt": config.time.dt, "T": config.time.T,
            "cadence": config.time.cadence, "n_elements": config.grid.n_elements,
            "config_hash": config.content_hash()}
    started = _time.perf_counter()
    trace = integrate(ops, config.law, state, config.time.dt, config.time.n_steps,
                      config.time.cadence, config.mode, meta, config.time.startup_steps)
    log.info("simulated %d steps in %.2fs", config.time.n_steps, _time.perf_counter() - started)
    return trace
