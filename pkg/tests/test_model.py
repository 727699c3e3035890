import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diskbeam.exceptions import ConfigurationError
from diskbeam.model import (DampingLaw, FeedbackLaw, GrowthProfile, PhysicalParams, TorqueLaw,
                            check_hypotheses, eval_feedback, validate_params)


def test_smallness_condition_is_strict():
    assert validate_params(PhysicalParams(varpi=2.9)).admissible
    rep = validate_params(PhysicalParams(varpi=3.0))
    assert not rep.admissible
    assert [c.name for c in rep.failures()] == ["angular_velocity"]
    assert rep.bound == pytest.approx(3.0)
    assert validate_params(PhysicalParams(EI=4.0, rho=1.0, varpi=5.9)).admissible


def test_nonpositive_inertia_rejected():
    rep = validate_params(PhysicalParams(EI=0.0))
    assert not rep.admissible
    assert "positive_EI" in [c.name for c in rep.failures()]


def test_omega0_defaults_to_target():
    assert PhysicalParams(varpi=1.5).omega0 == 1.5


@pytest.mark.parametrize("law", [
    DampingLaw("linear", 0.5), DampingLaw("linear", 2.0), DampingLaw("power", 1.0, 2),
    DampingLaw("power", 1.0, 3), DampingLaw("power", 2.0, 3), DampingLaw("exp_type", 1.0),
])
def test_catalog_laws_satisfy_hypotheses(law):
    rep = check_hypotheses(FeedbackLaw(law, TorqueLaw("linear", 1.0)))
    assert rep.passed, str(rep)


def test_decreasing_law_fails_monotonicity():
    law = FeedbackLaw(DampingLaw("tabulated", table=[(0, 0), (1, -1)]))
    rep = check_hypotheses(law)
    assert not rep["H.I"].passed
    assert rep["H.I"].counterexample is not None


def test_zero_torque_fails_sector():
    rep = check_hypotheses(FeedbackLaw(DampingLaw("linear"), TorqueLaw("zero")))
    assert not rep["H.III"].passed


def test_saturated_torque_not_admitted():
    with pytest.raises(ConfigurationError):
        TorqueLaw("saturated")


def test_empty_grid_rejected():
    with pytest.raises(ConfigurationError):
        check_hypotheses(FeedbackLaw(), np.array([]))


def test_power_law_values():
    f = DampingLaw("power", 1.0, 3)
    assert f(0.5) == pytest.approx(0.125)
    assert f(-2.0) == pytest.approx(-2.0)
    assert eval_feedback(FeedbackLaw(f), "damping", 0.5) == pytest.approx(0.125)


def test_exp_type_value_and_continuation():
    f = DampingLaw("exp_type", 1.0)
    assert f(0.5) == pytest.approx(math.exp(-4.0) / 0.5)
    assert f(1.0) == pytest.approx(math.exp(-1.0))
    assert f(3.0) == pytest.approx(3.0 * math.exp(-1.0))
    assert f(0.0) == 0.0


def test_default_profile_scale():
    assert DampingLaw("power", 2.0, 3).default_profile().c == pytest.approx(0.125)
    assert DampingLaw("power", 0.5, 3).default_profile().c == pytest.approx(0.5)
    assert DampingLaw("power", 1.0, 1).default_profile().kind == "linear"


def test_profile_inverse_roundtrip():
    for prof in (GrowthProfile("power", 1.0, 3), GrowthProfile("exp_type"), GrowthProfile("linear", 2.0)):
        s = np.linspace(0.05, 3.0, 40)
        assert np.allclose(prof.f0_inv(prof.f0(s)), s, rtol=1e-10)


def test_H_of_profiles():
    x = np.array([0.04, 0.25, 0.81])
    assert np.allclose(GrowthProfile("power", 1.0, 3).H(x), x ** 2)
    assert np.allclose(GrowthProfile("exp_type").H(x), np.exp(-1.0 / x))
    assert GrowthProfile("exp_type").H(0.25) == pytest.approx(math.exp(-4.0))


finite = st.floats(-20, 20, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(s=finite, kind=st.sampled_from(["linear", "power", "exp_type"]),
       p=st.sampled_from([1.0, 2.0, 3.0, 5.0]))
def test_laws_odd_and_sign_preserving(s, kind, p):
    f = DampingLaw(kind, 1.0, p)
    assert f(-s) == -f(s)
    assert f(s) * s >= 0


@settings(max_examples=200, deadline=None)
@given(a=finite, b=finite, kind=st.sampled_from(["linear", "power", "exp_type"]))
def test_laws_nondecreasing(a, b, kind):
    f = DampingLaw(kind, 1.3, 3.0)
    lo, hi = min(a, b), max(a, b)
    assert f(lo) <= f(hi)


@settings(max_examples=100, deadline=None)
@given(x=finite, K=st.floats(0.1, 5), k3=st.floats(0, 2))
def test_cubic_torque_sector(x, K, k3):
    g = TorqueLaw("cubic", K, k3)
    assert g(x) * x >= 0
    assert abs(g(x)) >= K * abs(x) * (1 - 1e-12)
