import dataclasses
import math

import numpy as np
import pytest

from floqlab import dissipation
from floqlab.core import DriveParams
from floqlab.dissipation import (
    BathParams,
    SteadyState,
    bath_kernel,
    bose_factor,
    kernel_products,
    sigma_z_fourier,
    spectral_density,
    steady_excitation_energy,
    steady_state,
    sweep_steady_state,
)
from floqlab.floquet import floquet_solution, fold

FIG_BATH = BathParams(gamma=0.01, cutoff=500.0, temperature=0.0)


def swapped(sol):
    """The same solution with the two mode labels exchanged."""
    return dataclasses.replace(sol, mu_pos=fold(-sol.mu_pos, sol.omega0),
                               modes_t0=sol.modes_t0[::-1].copy(),
                               mode_samples=sol.mode_samples[::-1].copy())


@pytest.mark.parametrize("kwargs", [dict(gamma=0, cutoff=1), dict(gamma=1, cutoff=0),
                                    dict(gamma=1, cutoff=1, temperature=-0.1)])
def test_bath_validation(kwargs):
    with pytest.raises(ValueError):
        BathParams(**kwargs)


def test_spectral_density_is_odd_and_linear(rng):
    bath = BathParams(0.3, 5.0, 0.2)
    w = rng.uniform(-20, 20, 100)
    np.testing.assert_array_equal(spectral_density(-w, bath), -spectral_density(w, bath))
    double = dataclasses.replace(bath, gamma=0.6)
    np.testing.assert_array_equal(spectral_density(w, double), 2 * spectral_density(w, bath))


def test_bose_factor_extension(rng):
    bath = BathParams(1.0, 5.0, 0.7)
    w = rng.uniform(0.01, 10, 50)
    n = bose_factor(w, bath)
    np.testing.assert_allclose(n, 1 / np.expm1(w / 0.7), rtol=1e-13)
    np.testing.assert_allclose(bose_factor(-w, bath), -(n + 1), rtol=1e-13)
    assert bose_factor(1e4, bath) == 0.0  # no overflow


def test_zero_temperature_limits():
    bath = BathParams(1.0, 500.0, 0.0)
    w = np.array([0.3, 2.0])
    jn, _ = kernel_products(w, bath)
    np.testing.assert_array_equal(jn, 0.0)
    jn, _ = kernel_products(-w, bath)
    np.testing.assert_allclose(jn, spectral_density(w, bath), rtol=1e-15)
    j, n = bath_kernel(0.0, bath)
    assert j == 0.0 and math.isnan(n)
    jn, j2n1 = kernel_products(0.0, bath)
    assert jn == 0.0 and j2n1 == 0.0


def test_products_at_zero_frequency_are_continuous():
    bath = BathParams(0.5, 500.0, 0.3)
    jn0, j2n10 = kernel_products(0.0, bath)
    assert jn0 == pytest.approx(2 * 0.5 / math.pi * 0.3)
    assert j2n10 == pytest.approx(2 * jn0)
    jn, j2n1 = kernel_products(np.array([1e-7, -1e-7]), bath)
    np.testing.assert_allclose(jn, jn0, rtol=1e-6)
    np.testing.assert_allclose(j2n1, j2n10, rtol=1e-6)
    assert bath_kernel(0.0, bath)[1] == math.inf


def test_static_coefficients():
    # E < omega0 / 2: nothing folds, f(t) is the constant <e|sigma^z|g>
    p = DriveParams(1, 1, 0, 3.0, "cosine_y")
    sol = floquet_solution(p, grid=64)
    c = sigma_z_fourier(sol, p, 16)
    assert abs(c[16]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert np.abs(np.delete(c, 16)).max() < 1e-12


def test_static_coefficients_with_folding():
    # folding moves the single line to another harmonic; its transition
    # frequency n w + 2 mu is still the level splitting
    p = DriveParams(1, 1, 0, 0.5, "cosine_y")
    sol = floquet_solution(p, grid=64)
    c = sigma_z_fourier(sol, p, 16)
    k = int(np.argmax(np.abs(c)))
    assert abs(c[k]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert np.abs(np.delete(c, k)).max() < 1e-12
    n = -(k - 16)  # the weight |s_{-n}|^2 multiplies frequency n w + 2 mu
    assert abs(n * 0.5 + 2 * sol.mu_pos) == pytest.approx(2 * math.sqrt(2), abs=1e-10)


def test_parseval(strong_cos):
    sol = floquet_solution(strong_cos, grid=256)
    plus, minus = sol.mode_samples
    f = np.einsum("ti,ij,tj->t", plus.conj(), np.diag([1, -1]), minus)
    c = sigma_z_fourier(sol, strong_cos, 64)
    assert abs(np.sum(np.abs(c) ** 2) - np.mean(np.abs(f) ** 2)) < 1e-10


def test_coefficient_tail_is_negligible(strong_cos):
    sol = floquet_solution(strong_cos, grid=512)
    c = sigma_z_fourier(sol, strong_cos, 128)
    weight = np.abs(c) ** 2
    tail = weight[:128 - 64].sum() + weight[128 + 65:].sum()
    assert tail < 1e-8 * weight.sum()


def test_coefficients_beyond_resolution_rejected(strong_cos):
    sol = floquet_solution(strong_cos, grid=64)
    with pytest.raises(ValueError):
        sigma_z_fourier(sol, strong_cos, 17)


def test_adiabatic_zero_temperature_population(strong_cos):
    p = strong_cos.with_omega0(0.19)
    ss = steady_state(floquet_solution(p, grid=512), p, FIG_BATH)
    assert ss.converged
    assert ss.rho_pp < 1e-3
    assert ss.rho_pp + ss.rho_mm == 1.0


def test_high_temperature_limit(strong_cos):
    sol = floquet_solution(strong_cos, grid=512)
    ss = steady_state(sol, strong_cos, BathParams(1.0, 500.0, 1e4))
    assert ss.rho_pp == pytest.approx(0.5, abs=1e-3)


def test_coupling_strength_cancels_exactly(strong_cos):
    sol = floquet_solution(strong_cos, grid=512)
    for t in (0.0, 0.05, 1.0):
        a = steady_state(sol, strong_cos, BathParams(0.01, 500.0, t))
        b = steady_state(sol, strong_cos, BathParams(0.02, 500.0, t))
        assert a.rho_pp == b.rho_pp


def test_relabelling_covariance():
    for w in (0.19, 0.3, 0.55):
        p = DriveParams(1, 1, 2, w, "cosine_y")
        sol = floquet_solution(p, grid=512)
        bath = BathParams(1.0, 500.0, 0.05)
        a, b = steady_state(sol, p, bath), steady_state(swapped(sol), p, bath)
        assert a.rho_pp == pytest.approx(b.rho_pp, abs=1e-12)
        assert a.upper != b.upper
        assert steady_excitation_energy(a, sol, p) == pytest.approx(
            steady_excitation_energy(b, swapped(sol), p), abs=1e-12)


def test_all_weights_vanishing_is_flagged():
    p = DriveParams(0, 1, 0.5, 0.4, "sine_x")
    ss = steady_state(floquet_solution(p, grid=512), p, FIG_BATH)
    assert ss.degenerate and math.isnan(ss.rho_pp)


def test_excitation_energy_static_cases():
    p = DriveParams(1, 1, 0, 0.4, "cosine_y")
    sol = floquet_solution(p, grid=64)
    ground = int(np.argmin([np.real(np.vdot(m, np.array([[1, -1j], [1j, -1]]) @ m))
                            for m in sol.modes_t0]))
    empty = SteadyState(0.0, 1.0, 8, True, upper=1 - ground)
    assert steady_excitation_energy(empty, sol, p) == pytest.approx(0.0, abs=1e-12)
    mixed = SteadyState(0.5, 0.5, 8, True)
    assert steady_excitation_energy(mixed, sol, p) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_sweep_single_point_and_ordering():
    p = DriveParams(1, 1, 2, 1.0, "cosine_y")
    rows = sweep_steady_state(p, FIG_BATH, [0.2])
    assert len(rows) == 1 and rows[0].error is None
    grid = [0.25, 0.2, 0.3]
    serial = sweep_steady_state(p, FIG_BATH, grid)
    parallel = sweep_steady_state(p, FIG_BATH, grid, threads=2)
    assert [r.omega0 for r in serial] == [0.2, 0.25, 0.3]
    assert serial == parallel


def test_sweep_records_failures_and_continues(monkeypatch):
    real = dissipation.floquet_solution

    def flaky(params, grid):
        if params.omega0 == 0.25:
            raise FloatingPointError("injected")
        return real(params, grid=grid)

    monkeypatch.setattr(dissipation, "floquet_solution", flaky)
    rows = sweep_steady_state(DriveParams(1, 1, 2, 1.0, "cosine_y"), FIG_BATH, [0.2, 0.25, 0.3])
    assert [r.error is None for r in rows] == [True, False, True]
    assert "injected" in rows[1].error and math.isnan(rows[1].e_ex_per)


def test_sweep_refines_around_gap_minima():
    p = DriveParams(1, 1, 2, 1.0, "cosine_y")
    grid = np.linspace(0.19, 0.2, 5)
    rows = sweep_steady_state(p, FIG_BATH, grid, refine=3)
    assert len(rows) > 5
    assert all(a.omega0 < b.omega0 for a, b in zip(rows, rows[1:]))
