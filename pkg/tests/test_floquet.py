import math

import mpmath
import numpy as np
import pytest
from scipy.linalg import expm

from floqlab.core import SIGMA_X, SIGMA_Z, DriveParams, unitarity_defect
from floqlab.floquet import (
    DegeneracyWarning,
    adiabatic_quasienergy,
    floquet_diagonalize,
    floquet_solution,
    fold,
    folded_gap,
    folded_gap_from_mu,
    ground_overlap,
    locate_resonances,
    propagate,
    propagator_grid,
    quasienergy,
    shirley_matrix,
    shirley_mu,
    shirley_quasienergies,
)


def test_static_propagator_is_exact():
    p = DriveParams(1, 1, 0, 0.19, "sine_x")
    u = propagate(p, 0.0, 1.0, 7)
    np.testing.assert_allclose(u, expm(-1j * (SIGMA_Z + SIGMA_X)), atol=1e-14)


def test_one_period_propagator_is_unitary(strong_cos):
    u = propagate(strong_cos, 0.0, strong_cos.period, 4096)
    assert unitarity_defect(u) < 1e-12


def test_propagator_is_second_order(strong_cos):
    # Richardson study against a 2^16-step reference
    tau = strong_cos.period
    ref = propagate(strong_cos, 0.0, tau, 2**16)
    errs = [np.abs(propagate(strong_cos, 0.0, tau, n) - ref).max() for n in (512, 1024, 2048)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_propagator_grid_composes(strong_cos):
    props = propagator_grid(strong_cos, 8, 1024)
    direct = propagate(strong_cos, 0.0, 3 * strong_cos.period / 8, 384)
    np.testing.assert_allclose(props[3], direct, atol=1e-13)
    with pytest.raises(ValueError):
        propagator_grid(strong_cos, 3, 1024)


def test_fold_range_and_idempotence():
    w = 0.7
    x = np.linspace(-5, 5, 1001)
    f = fold(x, w)
    assert np.all(f > -w / 2) and np.all(f <= w / 2 + 1e-15)
    np.testing.assert_allclose(fold(f, w), f, atol=1e-15)
    assert fold(w / 2, w) == pytest.approx(w / 2)
    assert fold(-w / 2, w) == pytest.approx(w / 2)


def test_identity_is_degenerate():
    p = DriveParams(1, 1, 0, 1.0)
    with pytest.warns(DegeneracyWarning):
        sol = floquet_diagonalize(np.eye(2, dtype=complex), p, grid=8, steps=64)
    assert sol.mu_pos == 0.0
    assert sol.degenerate
    np.testing.assert_allclose(sol.modes_t0 @ sol.modes_t0.conj().T, np.eye(2), atol=1e-14)


def test_diagonal_unitary():
    p = DriveParams(0, 1, 0, 1.0)
    theta = 0.3
    u = np.diag([np.exp(-1j * theta), np.exp(1j * theta)])
    sol = floquet_diagonalize(u, p, grid=8, steps=64)
    assert sol.mu_pos == pytest.approx(fold(theta / p.period, 1.0), abs=1e-14)
    assert sol.mu_pos == pytest.approx(0.3 / (2 * math.pi), abs=1e-14)
    np.testing.assert_allclose(np.abs(sol.modes_t0), np.eye(2), atol=1e-14)


def test_modes_are_orthonormal_and_periodic(strong_cos):
    sol = floquet_solution(strong_cos, grid=64)
    np.testing.assert_allclose(sol.modes_t0 @ sol.modes_t0.conj().T, np.eye(2), atol=1e-12)
    # the sample one step past the last must return to t = 0
    tau = strong_cos.period
    step = propagate(strong_cos, tau * 63 / 64, tau, sol.steps // 64)
    for m, mu in enumerate(sol.quasienergies):
        wrapped = np.exp(1j * mu * tau / 64) * (step @ sol.mode_samples[m, -1])
        np.testing.assert_allclose(wrapped, sol.modes_t0[m], atol=1e-9)


def test_quasienergies_opposite(strong_cos):
    sol = floquet_solution(strong_cos)
    mu_p, mu_m = sol.quasienergies
    assert fold(mu_p + mu_m, strong_cos.omega0) == pytest.approx(0.0, abs=1e-12)
    assert 0 <= mu_p <= strong_cos.omega0 / 2


@pytest.mark.parametrize("omega0", [0.1, 0.19, 0.194859, 0.5, 1.0])
def test_shirley_matrix_agrees_with_propagator(omega0):
    p = DriveParams(1, 1, 2, omega0, "cosine_y")
    assert abs(quasienergy(p) - shirley_mu(p)) < 1e-9


def test_shirley_matrix_is_hermitian(strong_sin):
    k = shirley_matrix(strong_sin, 6)
    np.testing.assert_allclose(k, k.conj().T, atol=0)


def test_shirley_pair_and_truncation_warning(strong_sin):
    pair = shirley_quasienergies(strong_sin.with_omega0(0.5), n_max=64)
    assert fold(pair.sum(), 0.5) == pytest.approx(0.0, abs=1e-12)
    with pytest.warns(Warning):
        shirley_quasienergies(strong_sin.with_omega0(0.1), n_max=4)


def test_forms_share_the_spectrum():
    # equivalent Hamiltonians up to a rotation and a time shift
    for w in (0.19, 0.4):
        a = quasienergy(DriveParams(1, 1, 2, w, "cosine_y"))
        b = quasienergy(DriveParams(1, 1, 2, w, "sine_x"))
        assert a == pytest.approx(b, abs=1e-9)


def test_adiabatic_quasienergy_static_limit():
    p = DriveParams(1, 1, 0, 0.9)
    assert adiabatic_quasienergy(p) == pytest.approx(fold(math.sqrt(2), 0.9), abs=1e-14)
    p = DriveParams(1, 0, 1e-9, 5.0)
    assert adiabatic_quasienergy(p) == pytest.approx(fold(1.0, 5.0), abs=1e-12)


def test_adiabatic_quasienergy_against_high_precision_quadrature():
    mpmath.mp.dps = 30
    oracle = mpmath.quad(lambda x: mpmath.sqrt(1 + (1 + 2 * mpmath.sin(x)) ** 2),
                         [0, mpmath.pi / 6 + mpmath.pi, 2 * mpmath.pi]) / (2 * mpmath.pi)
    for form in ("sine_x", "cosine_y"):
        p = DriveParams(1, 1, 2, 0.19, form)
        assert adiabatic_quasienergy(p, folded=False) == pytest.approx(float(oracle), abs=1e-10)


def test_adiabatic_regime_quasienergy(strong_cos):
    sol = floquet_solution(strong_cos)
    assert abs(sol.mu_pos - abs(adiabatic_quasienergy(strong_cos))) < 1e-2


def test_static_overlap_is_zero_or_one():
    for form in ("sine_x", "cosine_y"):
        p = DriveParams(1, 1, 0, 0.7, form)
        ov = ground_overlap(floquet_solution(p, grid=16), p)
        assert min(ov, 1 - ov) < 1e-12


def test_folded_gap_examples():
    assert folded_gap_from_mu(0.0, 0.3) == 0.0
    assert folded_gap_from_mu(0.3 / 4, 0.3) == pytest.approx(0.15)
    assert folded_gap_from_mu(0.3 / 2, 0.3) == pytest.approx(0.0, abs=1e-16)


def test_quasi_degeneracy_gap_is_small():
    p = DriveParams(1, 1, 2, 0.194859, "cosine_y")
    gap = folded_gap(p)
    assert gap < 0.02 * p.omega0 / 2
    # and far below the off-resonant gap just beside it
    assert gap < folded_gap(p.with_omega0(0.19)) / 50


def test_resonances_are_local_minima():
    p = DriveParams(1, 1, 2, 1.0, "cosine_y")
    found = locate_resonances(p, (0.19, 0.20), 41)
    assert len(found) == 1
    r = found[0]
    lo, hi = r.bracket
    assert lo <= r.omega0_star <= hi
    probe = np.linspace(lo, hi, 9)
    gaps = [folded_gap(p.with_omega0(w), 2**15) for w in probe]
    assert r.folded_gap <= min(gaps) + 1e-12


def test_resonance_scan_validation():
    p = DriveParams(1, 1, 2, 1.0)
    with pytest.raises(ValueError):
        locate_resonances(p, (0.2, 0.1))
    with pytest.raises(ValueError):
        locate_resonances(p, (0.1, 0.2), scan_points=2)
