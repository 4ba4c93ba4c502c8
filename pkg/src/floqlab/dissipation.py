"""Ohmic bath and the rotating-wave steady state in the Floquet basis."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import DriveParams, expectation, hamiltonian_at, instantaneous_spectrum
from .floquet import FloquetSolution, floquet_solution, folded_gap_from_mu

CONVERGENCE_TOL = 1e-8
STEADY_GRID = 512


@dataclass(frozen=True)
class BathParams:
    """Ohmic bath: coupling ``gamma``, Lorentzian cutoff, temperature (k_B = 1)."""

    gamma: float
    cutoff: float
    temperature: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "cutoff", "temperature"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.cutoff <= 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


def spectral_density(omega, bath: BathParams) -> np.ndarray:
    """J(w) = (2 gamma / pi) w cutoff^2 / (w^2 + cutoff^2); odd in w."""
    w = np.asarray(omega, dtype=float)
    c2 = bath.cutoff**2
    return (2.0 * bath.gamma / math.pi) * w * c2 / (w * w + c2)


def _bose_positive(x: np.ndarray) -> np.ndarray:
    # 1/(e^x - 1) for x > 0 without overflow
    return np.exp(-x) / -np.expm1(-x)


def bose_factor(omega, bath: BathParams) -> np.ndarray:
    """N(w) = 1/(e^{w/T} - 1) for w > 0, extended by N(-w) = -(N(w) + 1).

    At T = 0: N = 0 for w > 0 and -1 for w < 0.  N(0) diverges for T > 0
    (``inf``) and is undefined at T = 0 (``nan``).
    """
    w = np.asarray(omega, dtype=float)
    out = np.empty_like(w)
    pos, neg, zero = w > 0, w < 0, w == 0
    if bath.temperature == 0.0:
        out[pos] = 0.0
        out[neg] = -1.0
        out[zero] = np.nan
    else:
        x = np.abs(w) / bath.temperature
        n = _bose_positive(np.where(zero, 1.0, x))
        out[pos] = n[pos]
        out[neg] = -(n[neg] + 1.0)
        out[zero] = np.inf
    return out if out.ndim else float(out)


def bath_kernel(omega, bath: BathParams):
    """``(J(w), N(w))``; see :func:`kernel_products` for the finite products at w = 0."""
    j = spectral_density(omega, bath)
    return (j if np.ndim(j) else float(j)), bose_factor(omega, bath)


def kernel_products(omega, bath: BathParams) -> tuple[np.ndarray, np.ndarray]:
    """``J N`` and ``J (2N + 1)``, with their limits substituted at w = 0.

    For T > 0, J N -> (2 gamma / pi) T and J (2N + 1) -> 2 (2 gamma / pi) T
    as w -> 0; at T = 0 both vanish.
    """
    w = np.asarray(omega, dtype=float)
    zero = w == 0
    safe = np.where(zero, 1.0, w)
    j = spectral_density(safe, bath)
    n = bose_factor(safe, bath)
    jn = j * n
    j2n1 = j * (2.0 * n + 1.0)
    limit = 2.0 * bath.gamma / math.pi * bath.temperature
    jn = np.where(zero, limit, jn)
    j2n1 = np.where(zero, 2.0 * limit, j2n1)
    return jn, j2n1


def sigma_z_fourier(sol: FloquetSolution, params: DriveParams, n_max: int) -> np.ndarray:
    """Fourier coefficients of f(t) = <Phi+(t)|sigma^z|Phi-(t)>.

    Returns ``c`` of length ``2 n_max + 1`` with ``c[n_max + n]`` the
    coefficient (1/tau) int_0^tau e^{i n w t} f(t) dt, n = -n_max..n_max.
    Needs at least ``4 n_max`` mode samples per period.
    """
    grid = sol.grid
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if 4 * n_max > grid:
        raise ValueError(f"n_max={n_max} needs >= {4 * n_max} samples per period, "
                         f"the solution has {grid}")
    plus, minus = sol.mode_samples
    f = np.conj(plus[:, 0]) * minus[:, 0] - np.conj(plus[:, 1]) * minus[:, 1]
    # (1/M) sum_j f_j e^{+2 pi i n j / M} is numpy's inverse DFT
    coeffs = np.fft.ifft(f)
    return coeffs[np.arange(-n_max, n_max + 1) % grid]


def _mode_energies(sol: FloquetSolution, params: DriveParams) -> np.ndarray:
    """<Phi(0)|H(0)|Phi(0)> for the "+" and "-" modes."""
    h0 = hamiltonian_at(params, 0.0)
    return np.array([expectation(sol.modes_t0[0], h0), expectation(sol.modes_t0[1], h0)])


@dataclass(frozen=True)
class SteadyState:
    """Floquet-diagonal steady populations.

    ``upper`` is the index (0 for the mode with positive folded quasi-energy,
    1 for the other) of the mode called "+" here, i.e. the one whose
    population is ``rho_pp``.  It is chosen so that the net bath-induced
    transitions run out of it, which keeps ``rho_pp <= 1/2``.
    """

    rho_pp: float
    rho_mm: float
    n_max_used: int
    converged: bool
    upper: int = 0
    degenerate: bool = False
    sums: tuple[float, float] = field(default=(math.nan, math.nan), repr=False)


def _population_sums(coeffs: np.ndarray, mu: float, omega0: float, bath: BathParams):
    n_max = (coeffs.size - 1) // 2
    n = np.arange(-n_max, n_max + 1)
    freqs = n * omega0 + 2.0 * mu
    weight = np.abs(coeffs[::-1]) ** 2  # |sigma^z_{-n}|^2
    jn, j2n1 = kernel_products(freqs, bath)
    return float(np.sum(jn * weight)), float(np.sum(j2n1 * weight))


def _ratio(num: float, den: float) -> tuple[float, int]:
    # den - num weights transitions out of the positive-mu mode; label the
    # less populated mode "+" so the answer is covariant under relabelling
    rho = num / den
    return (rho, 0) if rho <= 0.5 else (1.0 - rho, 1)


def steady_state(
    sol: FloquetSolution,
    params: DriveParams,
    bath: BathParams,
    n_max: int = 64,
    tol: float = CONVERGENCE_TOL,
) -> SteadyState:
    """Steady populations from the golden-rule rates between the Floquet modes.

    rho = sum_n J N |s_{-n}|^2 / sum_n J (2N + 1) |s_{-n}|^2 at the transition
    frequencies n w + 2 mu.  The truncation is accepted when adding eight
    harmonics changes rho by less than ``tol`` (relative); otherwise n_max
    is doubled while the mode sampling allows it.
    """
    limit = sol.grid // 4 - 8
    if limit < 1:
        raise ValueError(f"{sol.grid} mode samples per period are too few for the steady state")
    n = min(n_max, limit)
    while True:
        coeffs = sigma_z_fourier(sol, params, n + 8)
        num, den = _population_sums(coeffs[8:-8], sol.mu_pos, sol.omega0, bath)
        num_w, den_w = _population_sums(coeffs, sol.mu_pos, sol.omega0, bath)
        sums = (num_w, den_w)
        if not den_w > 0.0 or not den > 0.0:
            return SteadyState(math.nan, math.nan, n + 8, False, 0, True, sums)
        rho, upper = _ratio(num_w, den_w)
        change = abs(rho - _ratio(num, den)[0])
        converged = change <= tol * rho or change < 1e-15
        if converged or n >= limit:
            return SteadyState(rho, 1.0 - rho, n + 8, bool(converged), upper, False, sums)
        n = min(2 * n, limit)


def steady_excitation_energy(ss: SteadyState, sol: FloquetSolution, params: DriveParams) -> float:
    """Stroboscopic excitation energy sum_a rho_aa <Phi_a(0)|H(0)|Phi_a(0)> - E_g(0)."""
    energies = _mode_energies(sol, params)
    pops = np.empty(2)
    pops[ss.upper] = ss.rho_pp
    pops[1 - ss.upper] = ss.rho_mm
    return float(pops @ energies - instantaneous_spectrum(params, 0.0).ground_energy)


@dataclass(frozen=True)
class SweepRow:
    omega0: float
    folded_gap: float
    rho_pp: float
    e_ex_per: float
    error: Optional[str] = None


def _sweep_point(params: DriveParams, omega0: float, baths: Sequence[BathParams],
                 n_max: int) -> list[SweepRow]:
    try:
        p = params.with_omega0(omega0)
        sol = floquet_solution(p, grid=STEADY_GRID)
        gap = folded_gap_from_mu(sol.mu_pos, omega0)
    except Exception as exc:  # a failed row must not abort the sweep
        return [SweepRow(omega0, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
                for _ in baths]
    rows = []
    for bath in baths:
        try:
            ss = steady_state(sol, p, bath, n_max)
            if ss.degenerate:
                raise FloatingPointError("all transition weights vanish")
            error = None if ss.converged else "Fourier truncation not converged"
            rows.append(SweepRow(omega0, gap, ss.rho_pp, steady_excitation_energy(ss, sol, p), error))
        except Exception as exc:
            rows.append(SweepRow(omega0, gap, math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
    return rows


def _evaluate(params, omegas, baths, n_max, threads) -> list[list[SweepRow]]:
    omegas = [float(w) for w in omegas]
    if threads > 1 and len(omegas) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            # map preserves grid order whatever the completion order
            return list(pool.map(_sweep_point, [params] * len(omegas), omegas,
                                 [tuple(baths)] * len(omegas), [n_max] * len(omegas),
                                 chunksize=max(1, len(omegas) // (4 * threads))))
    return [_sweep_point(params, w, baths, n_max) for w in omegas]


def _gap_minima(gaps: np.ndarray) -> list[int]:
    return [i for i in range(1, gaps.size - 1)
            if gaps[i] <= gaps[i - 1] and gaps[i] < gaps[i + 1]]


def sweep_temperatures(
    params: DriveParams,
    baths: Sequence[BathParams],
    omega0_grid,
    n_max: int = 64,
    refine: int = 0,
    threads: int = 1,
) -> list[list[SweepRow]]:
    """Steady-state sweeps sharing one Floquet solution per frequency.

    Returns one table per bath, rows in increasing omega0.  With
    ``refine > 0``, that many extra points are inserted into each grid
    interval adjacent to a local minimum of the folded gap.
    """
    baths = list(baths)
    if not baths:
        raise ValueError("at least one bath is required")
    omegas = np.unique(np.asarray(omega0_grid, dtype=float))
    if omegas.size == 0 or omegas[0] <= 0:
        raise ValueError("omega0 grid must be non-empty and positive")
    threads = max(1, int(threads or os.cpu_count() or 1))
    results = _evaluate(params, omegas, baths, n_max, threads)
    if refine > 0 and omegas.size >= 3:
        gaps = np.array([r[0].folded_gap for r in results])
        extra = []
        for i in _gap_minima(np.nan_to_num(gaps, nan=np.inf)):
            for a, b in ((omegas[i - 1], omegas[i]), (omegas[i], omegas[i + 1])):
                extra.extend(np.linspace(a, b, refine + 2)[1:-1])
        if extra:
            extra = np.setdiff1d(np.unique(extra), omegas)
            results += _evaluate(params, extra, baths, n_max, threads)
            order = np.argsort([r[0].omega0 for r in results], kind="stable")
            results = [results[k] for k in order]
    return [[point[j] for point in results] for j in range(len(baths))]


def sweep_steady_state(
    params: DriveParams,
    bath: BathParams,
    omega0_grid,
    n_max: int = 64,
    refine: int = 0,
    threads: int = 1,
) -> list[SweepRow]:
    """Rows (omega0, folded_gap, rho_pp, e_ex_per, error) over ``omega0_grid``."""
    return sweep_temperatures(params, [bath], omega0_grid, n_max, refine, threads)[0]


def default_sweep_grid(window: tuple[float, float] = (0.15, 0.6), points: int = 600) -> np.ndarray:
    return np.linspace(window[0], window[1], points)
