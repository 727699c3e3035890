import math

import numpy as np
import pytest

from diskbeam.decay import (EnvelopeFitError, EnvelopeShape, H, H1, H1_closed, H1_inv,
                            H2, H_calculus, H_prime, H_prime_inv, H_star, calibrate_envelope,
                            closed_loop_matrix, damped_mode, envelope_feasible, fit_rates,
                            predicted_decay_kind, spectral_abscissa, tail_envelope, verify_young)
from diskbeam.exceptions import DataError, DomainError, NotApplicable, NumericalError
from diskbeam.model import GrowthProfile, PhysicalParams
from diskbeam.spatial import assemble

LIN = GrowthProfile("linear", 1.0)
CUBIC = GrowthProfile("power", 1.0, 3)
EXPT = GrowthProfile("exp_type")


def test_H_prime_matches_difference_quotient():
    for prof in (CUBIC, GrowthProfile("power", 0.5, 2), EXPT):
        x = np.array([0.05, 0.1, 0.15])
        h = 1e-6
        fd = (prof.H(x + h) - prof.H(x - h)) / (2 * h)
        assert np.allclose(H_prime(prof, x), fd, rtol=1e-6)


def test_H_domain():
    with pytest.raises(DomainError):
        H(CUBIC, 0.0)
    with pytest.raises(DomainError):
        H(EXPT, 0.5)      # r = 0.4 for exp_type, r^2 = 0.16


def test_H_calculus_conjugate_identity():
    vals = H_calculus(CUBIC, 0.5, 0.3)
    assert vals.H == pytest.approx(0.09)
    assert vals.H_prime == pytest.approx(0.6)
    assert vals.H2 == pytest.approx(0.3 * H_prime(CUBIC, 0.15))
    assert vals.H_star_of_H_prime == pytest.approx(H_star(CUBIC, 0.6))
    assert H_calculus(LIN, 0.5, 0.3).H_star_of_H_prime is None


def test_H_prime_inverse_roundtrip():
    for prof in (CUBIC, GrowthProfile("power", 2.0, 5), EXPT):
        x = np.array([0.02, 0.07, 0.12])
        assert np.allclose(H_prime_inv(prof, H_prime(prof, x)), x, rtol=1e-10)
    with pytest.raises(NotApplicable):
        H_prime_inv(LIN, 0.5)


@pytest.mark.parametrize("prof", [GrowthProfile("power", 1.0, 2), CUBIC, EXPT])
def test_young_margin(prof):
    r2 = prof.r ** 2
    A = np.linspace(0.05, 0.95, 20) * H_prime(prof, r2)
    B = np.linspace(0.05, 1.0, 20) * r2
    AA, BB = np.meshgrid(A, B)
    assert np.all(verify_young(prof, 0.5 * r2, AA, BB) >= -1e-14)
    # equality where B is the maximiser of A B - H(B)
    Bstar = H_prime_inv(prof, A)
    assert np.max(np.abs(verify_young(prof, 0.5 * r2, A, Bstar))) <= 1e-10


def test_young_not_applicable_for_linear():
    with pytest.raises(NotApplicable):
        verify_young(LIN, 0.5, 0.5, 0.5)


def test_H1_quadrature_matches_closed_forms():
    t = np.geomspace(1e-4, 1.0, 25)
    for prof, eps0 in ((LIN, 0.5), (CUBIC, 0.5), (CUBIC, 0.1)):
        q = H1(prof, eps0, t, method="quad")
        assert np.max(np.abs(q - H1_closed(prof, eps0, t))) <= 1e-8
    assert np.allclose(H1(CUBIC, 0.25, t), (1.0 / 0.5) * (1.0 / t - 1.0), rtol=1e-12)
    assert np.allclose(H1(LIN, 0.5, t), -np.log(t), rtol=1e-12)


def test_H1_derivative_is_minus_inverse_H2():
    t, h = 0.3, 1e-6
    d = (H1(EXPT, 0.08, t + h) - H1(EXPT, 0.08, t - h)) / (2 * h)
    assert d == pytest.approx(-1.0 / H2(EXPT, 0.08, t), rel=1e-6)


def test_H1_inverse_roundtrip():
    for prof, eps0 in ((CUBIC, 0.5), (EXPT, 0.08)):
        tau = np.array([0.0, 0.1, 2.0, 30.0])
        s = H1_inv(prof, eps0, tau)
        assert s[0] == 1.0
        assert np.allclose(H1(prof, eps0, s[1:]), tau[1:], rtol=1e-8)
    with pytest.raises(DomainError):
        H1(CUBIC, 0.5, 0.0)


def test_envelope_shape_matches_inverse():
    shape = EnvelopeShape(EXPT, 0.08)
    tau = np.array([0.0, 0.5, 3.0, 40.0, 500.0])
    assert np.allclose(shape(tau), H1_inv(EXPT, 0.08, tau), rtol=1e-7)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_power_envelope_exponent(p):
    # tail of H1^-1 decays like tau^(-2/(p-1))
    shape = EnvelopeShape(GrowthProfile("power", 1.0, p), 0.5)
    tau = np.array([1e6, 1e7])
    slope = np.diff(np.log(shape(tau))) / np.diff(np.log(tau))
    assert slope[0] == pytest.approx(-2.0 / (p - 1), rel=1e-3)


def test_calibrate_on_exact_exponential():
    t = np.linspace(0, 20, 401)
    E0 = 3.0 * np.exp(-0.4 * t)
    fit = calibrate_envelope(t, E0, LIN)
    assert fit.feasible
    assert fit.dominance_margin >= 0
    assert np.all(fit.envelope(t) >= E0 * (1 - 1e-9))
    # headroom 1.1 and the largest k1 on the grid cannot exceed the true rate
    assert fit.envelope(np.array([0.0]))[0] == pytest.approx(3.3)
    assert fit.k1 <= 0.4 * (1 + 1e-12)
    assert fit.k1 >= 0.4 / 10 ** 0.1


def test_exponential_envelope_cannot_cover_power_decay():
    # any slow decay is covered by a slow enough exponential, so the grid
    # floor of k1 decides: 1.1 exp(-0.01 t) drops below 1/(1 + 0.01 t)
    t = np.linspace(0, 100, 1001)
    E0 = 1.0 / (1.0 + 0.01 * t)
    grid = (1e-2, 1e-1, 1.0)
    assert not envelope_feasible(t, E0, LIN, k_grid=grid)
    assert envelope_feasible(t, E0, CUBIC, search_eps0=True, k_grid=grid)
    with pytest.raises(EnvelopeFitError) as info:
        calibrate_envelope(t, E0, LIN, k_grid=grid)
    assert info.value.diagnostics["best_margin"] < 0


def test_calibrate_input_checks():
    with pytest.raises(DataError):
        calibrate_envelope([0.0], [1.0], LIN)
    with pytest.raises(DataError):
        calibrate_envelope([0.0, 1.0], [0.0, 0.0], LIN)
    with pytest.raises(DomainError):
        calibrate_envelope([0.0, 1.0], [1.0, 0.5], CUBIC, eps0=2.0)


def test_fit_rates_recovers_synthetic_laws():
    t = np.linspace(0, 50, 501)
    f = fit_rates(t, 2.0 * np.exp(-0.3 * t), "exponential")
    assert f.rate == pytest.approx(0.3) and f.prefactor == pytest.approx(2.0)
    assert f.quality == pytest.approx(1.0)
    f = fit_rates(t, 5.0 * (1 + t) ** -1.5, "power")
    assert f.exponent == pytest.approx(-1.5)
    f = fit_rates(t, 2.0 / (1.0 + np.log1p(t)), "logarithmic")
    assert f.rate == pytest.approx(0.5)
    assert f.window == (10.0, 50.0)


def test_fit_noise_floor_truncates_window():
    t = np.linspace(0, 50, 501)
    y = np.maximum(np.exp(-t), 1e-13)
    f = fit_rates(t, y, floor=1e-10)
    assert f.rate == pytest.approx(1.0)
    assert f.window[1] < -math.log(1e-10)
    g = fit_rates(t, y, floor=1e-3, floor_ref="window")
    assert g.window[1] < 10 - math.log(1e-3)


def test_fit_rejects_bad_windows():
    t = np.linspace(0, 1, 10)
    with pytest.raises(DataError):
        fit_rates(t, -np.ones(10))
    with pytest.raises(DataError):
        fit_rates(t, np.ones(10), window=(0.0, 0.1))
    with pytest.raises(DataError):
        fit_rates(t, np.ones(9))


def test_tail_envelope_is_monotone_upper_bound():
    x = np.exp(-0.1 * np.arange(100)) * np.cos(np.arange(100))
    env = tail_envelope(x)
    assert np.all(env >= np.abs(x))
    assert np.all(np.diff(env) <= 0)


def test_predicted_kinds():
    assert predicted_decay_kind(LIN) == "exponential"
    assert predicted_decay_kind(CUBIC) == "power"
    assert predicted_decay_kind(EXPT) == "logarithmic"


def test_spectrum_without_damping_is_imaginary(ops32):
    sp = spectral_abscissa(ops32, linear_gain=0.0)
    assert len(sp.eigenvalues) == 2 * ops32.ndof
    assert abs(sp.max_real_part_all) <= 1e-8 * np.max(np.abs(sp.eigenvalues))
    assert abs(sp.max_real_part) <= 1e-8


def test_spectrum_conjugate_pairs_and_stability(ops32):
    sp = spectral_abscissa(ops32, linear_gain=0.5)
    ev = sp.eigenvalues
    upper = np.sort_complex(ev[ev.imag > 0])
    lower = np.sort_complex(np.conj(ev[ev.imag < 0]))
    assert np.allclose(upper, lower, rtol=1e-8)
    assert sp.max_real_part < 0
    assert sp.max_real_part_all <= 1e-10


def test_spectrum_guard_for_large_meshes():
    with pytest.raises(NumericalError):
        spectral_abscissa(assemble(PhysicalParams(), 128))


def test_damped_mode_is_eigenvector(ops32):
    y, v = damped_mode(ops32, 1.0, 1, 0.5)
    assert y[-2] == pytest.approx(0.5)
    A = closed_loop_matrix(ops32, 1.0)
    ev = np.linalg.eigvals(A)
    lam = ev[ev.imag > 0][np.argmin(ev.imag[ev.imag > 0])]
    # x = Re z for A z = lam z; then w = Im z = (lam.real x - A x) / lam.imag
    x = np.concatenate([y, v])
    w = (lam.real * x - A @ x) / lam.imag
    scale = np.linalg.norm(A, np.inf) * np.abs(w).max()
    assert np.abs(A @ w - (lam.imag * x + lam.real * w)).max() <= 1e-8 * scale
    with pytest.raises(DomainError):
        damped_mode(ops32, 1.0, 10_000)
