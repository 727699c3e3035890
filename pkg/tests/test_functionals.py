import numpy as np
import pytest

from diskbeam.dynamics import BeamState, initial_state
from diskbeam.exceptions import ConfigurationError, NotApplicable
from diskbeam.functionals import (default_multiplier_weight, diagnostic_R, dissipation_residuals,
                                  energy_E, energy_E0, energy_increment, functional_F, lyapunov_V,
                                  quadratic_energy)
from diskbeam.model import DampingLaw, FeedbackLaw, GrowthProfile, PhysicalParams
from diskbeam.spatial import assemble, interpolate

from conftest import run_dict, small_config


@pytest.fixture(scope="module")
def ops():
    return assemble(PhysicalParams(varpi=1.0, Id=2.0), 16)


def poly_state(ops, omega=1.0):
    g = ops.grid
    y = interpolate(g, lambda x: x**2, lambda x: 2 * x)
    v = interpolate(g, lambda x: x**3, lambda x: 3 * x**2)
    return BeamState(0.0, y, v, np.zeros_like(y), omega, omega - ops.params.varpi)


def test_energy_of_polynomial_state(ops):
    # y = x^2, v = x^3: int v^2 = 1/7, int y_xx^2 = 4, varpi^2 int y^2 = 1/5
    s = poly_state(ops)
    assert energy_E(s, ops) == pytest.approx(0.5 * (1 / 7 + 4.0 - 1 / 5), rel=1e-11)
    assert ops.Q(s.y, 0.0) == pytest.approx(4.0)


def test_functional_F_polynomial(ops):
    # 2 int x v y_x dx = 2 int x * x^3 * 2x dx = 4/6
    assert functional_F(poly_state(ops), ops) == pytest.approx(4 / 6, rel=1e-13)


def test_lyapunov_adds_disk_term(ops):
    s = poly_state(ops, omega=1.5)
    disk = 0.5 * 0.25 * (1.0 * 0.2 + 2.0)
    assert lyapunov_V(s, ops) == pytest.approx(disk + energy_E(s, ops), rel=1e-13)


def test_E0_uses_consistent_acceleration(ops):
    law = FeedbackLaw(DampingLaw("linear", 1.0))
    s = poly_state(ops)
    st = initial_state(ops, law, s.y, s.v, 1.0)
    assert energy_E0(s, ops, None, law) == pytest.approx(
        quadratic_energy(ops, s.y, s.v) + quadratic_energy(ops, s.v, st.a), rel=1e-13)


def test_energy_increment_matches_difference(ops):
    s = poly_state(ops)
    s1 = BeamState(0.1, 0.9 * s.y, 1.1 * s.v, s.a, 1.0)
    assert energy_increment(ops, s, s1) == pytest.approx(energy_E(s1, ops) - energy_E(s, ops),
                                                         rel=1e-12)


def test_multiplier_weight():
    assert default_multiplier_weight(1.0, 0.0) == 1.0
    assert default_multiplier_weight(1.0, 4.0) == 0.125


def test_residuals_small_for_damped_run():
    _, _, _, fs = run_dict(small_config(time={"dt": 1e-3, "T": 1.0, "cadence": 1}))
    res = dissipation_residuals(fs)
    assert res.max_E <= 1e-4
    assert len(res.t_mid) == len(fs) - 1
    assert fs.E1()[0] == pytest.approx(fs.E0[0] + default_multiplier_weight(fs.E0[0], fs.F[0])
                                       * fs.F[0])
    assert np.all(fs.state_norm() >= 0)


def test_residuals_need_two_samples():
    _, _, _, fs = run_dict(small_config())
    with pytest.raises(ConfigurationError):
        dissipation_residuals(fs.__class__(*(getattr(fs, c)[:1] for c in
                                             ("t", "E", "E0", "F", "V", "omega",
                                              "tip_slope_velocity", "boundary_flux",
                                              "torque_flux"))))


def test_diagnostic_R():
    prof = GrowthProfile("power", 1.0, 3)
    r = diagnostic_R(np.array([1.0, 0.5]), np.array([0.2, 0.1]), prof, 0.5, 2.0, 1.0)
    assert np.allclose(r, [2 * 0.5 * 1.0 + 0.4, 2 * 0.25 * 0.5 + 0.2])
    with pytest.raises(NotApplicable):
        diagnostic_R(1.0, 1.0, prof, 0.5, 1.0, 0.0)
    with pytest.raises(ConfigurationError):
        diagnostic_R(1.0, 1.0, prof, 1.5, 1.0, 1.0)


def test_compatibility_residual_of_bump():
    from diskbeam.config import FieldSpec
    from diskbeam.functionals import compatibility_residual

    ops = assemble(PhysicalParams(), 64)
    law = FeedbackLaw(DampingLaw("linear", 1.0))
    bump = FieldSpec("bump").project(ops.grid)
    # x^2 (x-1)^2 has y_xx(1) = 2 and y_xxx(1) = 12
    res = compatibility_residual(ops, law, bump, np.zeros(ops.ndof))
    assert res["moment"] == pytest.approx(2.0, rel=1e-3)
    assert res["shear"] == pytest.approx(12.0, rel=2e-2)
    mode = FieldSpec("first_mode").project(ops.grid)
    assert abs(compatibility_residual(ops, law, mode, 0 * mode)["moment"]) < 1e-3
