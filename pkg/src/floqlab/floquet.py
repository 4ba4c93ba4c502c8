"""Floquet spectrum of the driven spin: propagators, quasi-energies, modes, resonances."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .core import (
    DriveParams,
    Form,
    IDENTITY,
    PAULI,
    field_components,
    fix_phase,
    instantaneous_spectrum,
    su2_exp,
)

DEFAULT_STEPS = 4096
MAX_STEPS = 2**20
MU_TOL = 1e-10


class DegeneracyWarning(UserWarning):
    """An eigenbasis was requested where the spectrum is exactly degenerate."""


class ConvergenceWarning(UserWarning):
    pass


class DenseResonanceWarning(UserWarning):
    """Neighbouring gap minima are not resolved by the scan grid."""


def fold(x, omega0: float):
    """Fold quasi-energies into the first Brillouin zone (-omega0/2, omega0/2]."""
    x = np.asarray(x, dtype=float)
    r = -(np.mod(-x + omega0 / 2.0, omega0) - omega0 / 2.0)
    return r if r.ndim else float(r)


def _chain_product(mats: np.ndarray) -> np.ndarray:
    """Time-ordered product M[n-1] ... M[1] M[0] along axis -3."""
    while mats.shape[-3] > 1:
        if mats.shape[-3] % 2:
            pad = np.broadcast_to(IDENTITY, mats.shape[:-3] + (1, 2, 2))
            mats = np.concatenate([mats, pad], axis=-3)
        mats = mats[..., 1::2, :, :] @ mats[..., 0::2, :, :]
    return mats[..., 0, :, :]


def _step_propagators(params: DriveParams, t0: float, t1: float, steps: int) -> np.ndarray:
    h = (t1 - t0) / steps
    mid = t0 + (np.arange(steps) + 0.5) * h
    return su2_exp(field_components(params, mid), h)


def propagate(params: DriveParams, t0: float, t1: float, steps: int) -> np.ndarray:
    """U(t1, t0) by the exponential midpoint rule with ``steps`` sub-steps.

    Each factor is the exact SU(2) exponential of H at the sub-step midpoint,
    so the product is unitary to rounding; the global error is O(h^2).
    """
    if not t1 > t0:
        raise ValueError("propagate needs t1 > t0")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return _chain_product(_step_propagators(params, t0, t1, int(steps)))


def propagator_grid(params: DriveParams, grid: int, steps: int) -> np.ndarray:
    """U(t_j, 0) for t_j = j tau / grid, j = 0..grid (shape ``(grid+1, 2, 2)``).

    ``steps`` sub-steps per period; must be a multiple of ``grid``.
    """
    if steps % grid:
        raise ValueError(f"steps ({steps}) must be a multiple of grid ({grid})")
    tau = params.period
    parts = _step_propagators(params, 0.0, tau, steps).reshape(grid, steps // grid, 2, 2)
    segments = _chain_product(parts)
    out = np.empty((grid + 1, 2, 2), dtype=complex)
    out[0] = IDENTITY
    for j in range(grid):
        out[j + 1] = segments[j] @ out[j]
    return out


@dataclass(frozen=True)
class FloquetSolution:
    """Folded quasi-energy and Floquet modes of one drive.

    ``modes_t0[0]`` is the "+" mode, whose folded quasi-energy is ``mu_pos``;
    the "-" mode carries ``fold(-mu_pos)``.  ``mode_samples`` has shape
    ``(2, grid, 2)``: mode index, time ``t_j = j tau / grid``, spinor.
    """

    mu_pos: float
    modes_t0: np.ndarray = field(repr=False)
    mode_samples: np.ndarray = field(repr=False)
    omega0: float
    degenerate: bool = False
    steps: int = DEFAULT_STEPS

    @property
    def grid(self) -> int:
        return self.mode_samples.shape[1]

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega0

    @property
    def sample_times(self) -> np.ndarray:
        return np.arange(self.grid) * self.period / self.grid

    @property
    def quasienergies(self) -> np.ndarray:
        return np.array([self.mu_pos, fold(-self.mu_pos, self.omega0)])


def _eigen_su2(u: np.ndarray):
    """Eigen-decomposition of a 2x2 unitary as e^{-i chi} (c0 I - i c.sigma).

    Returns phases ``(phi_a, phi_b)`` with eigenvalues ``exp(-i phi)``, the
    matching orthonormal eigenvectors as columns, and the splitting |sin|.
    """
    det = np.linalg.det(u)
    chi = -0.5 * np.angle(det)
    v = u * np.exp(1j * chi)  # det(v) = 1
    c0 = 0.5 * np.trace(v).real
    c = np.array([0.5j * np.trace(v @ p) for p in PAULI]).real
    sin_alpha = float(np.linalg.norm(c))
    alpha = math.atan2(sin_alpha, c0)
    if sin_alpha < 1e-14:
        vecs = np.eye(2, dtype=complex)
    else:
        _, vecs = np.linalg.eigh(np.einsum("k,kij->ij", c / sin_alpha, PAULI))
        vecs = vecs[:, ::-1]  # +1 eigenvector first: eigenvalue exp(-i alpha)
    return (chi + alpha, chi - alpha), vecs, sin_alpha


def _solution_from_grid(props: np.ndarray, params: DriveParams, steps: int) -> FloquetSolution:
    tau = params.period
    (phi_a, phi_b), vecs, split = _eigen_su2(props[-1])
    mu_a = fold(phi_a / tau, params.omega0)
    mu_b = fold(phi_b / tau, params.omega0)
    degenerate = 2.0 * split < 1e-14
    if mu_b > mu_a:
        mu_a, mu_b = mu_b, mu_a
        vecs = vecs[:, ::-1]
    modes = np.array([fix_phase(vecs[:, 0]), fix_phase(vecs[:, 1])])
    grid = props.shape[0] - 1
    times = np.arange(grid) * tau / grid
    evolved = np.einsum("tij,mj->mti", props[:-1], modes)
    phases = np.exp(1j * np.outer([mu_a, mu_b], times))
    samples = evolved * phases[:, :, None]
    return FloquetSolution(
        mu_pos=float(mu_a),
        modes_t0=modes,
        mode_samples=samples,
        omega0=params.omega0,
        degenerate=bool(degenerate),
        steps=steps,
    )


def floquet_diagonalize(
    u_period: np.ndarray, params: DriveParams, grid: int = 256, steps: int = DEFAULT_STEPS
) -> FloquetSolution:
    """Quasi-energies and modes from a one-period propagator.

    The mode samples are rebuilt by re-propagating over one period with
    ``steps`` midpoint sub-steps (use the count that produced ``u_period``).
    """
    steps = int(math.ceil(steps / grid) * grid)
    props = propagator_grid(params, grid, steps)
    props[-1] = np.asarray(u_period, dtype=complex)
    sol = _solution_from_grid(props, params, steps)
    if sol.degenerate:
        warnings.warn("one-period propagator has coinciding eigenvalues; "
                      "Floquet mode basis is arbitrary", DegeneracyWarning, stacklevel=2)
    return sol


def floquet_solution(
    params: DriveParams,
    grid: int = 256,
    steps: Optional[int] = None,
    tol: float = MU_TOL,
) -> FloquetSolution:
    """Propagate over one period and diagonalize.

    With ``steps=None`` the sub-step count starts at 4096 and is doubled
    until the quasi-energy moves by less than ``tol``.
    """
    if steps is not None:
        steps = int(math.ceil(steps / grid) * grid)
        return _solution_from_grid(propagator_grid(params, grid, steps), params, steps)
    steps = max(DEFAULT_STEPS, grid)
    sol = _solution_from_grid(propagator_grid(params, grid, steps), params, steps)
    while steps < MAX_STEPS:
        steps *= 2
        new = _solution_from_grid(propagator_grid(params, grid, steps), params, steps)
        change = abs(fold(new.mu_pos - sol.mu_pos, params.omega0))
        sol = new
        if change < tol:
            break
    else:
        warnings.warn(f"quasi-energy not converged to {tol:g} at {steps} steps",
                      ConvergenceWarning, stacklevel=2)
    return sol


def quasienergy(params: DriveParams, steps: Optional[int] = None) -> float:
    """Positive folded quasi-energy (propagator route)."""
    if steps is None:
        return floquet_solution(params, grid=1).mu_pos
    u = propagate(params, 0.0, params.period, steps)
    (phi_a, _), _, _ = _eigen_su2(u)
    return abs(fold(phi_a / params.period, params.omega0))


def adiabatic_quasienergy(params: DriveParams, folded: bool = True) -> float:
    """Period average of the instantaneous excited-state energy."""
    tau = params.period

    def excited(t):
        return float(np.linalg.norm(field_components(params, t)))

    value, _ = integrate.quad(excited, 0.0, tau, epsabs=1e-12 * tau, epsrel=1e-13, limit=200)
    mean = value / tau
    return fold(mean, params.omega0) if folded else mean


def ground_overlap(sol: FloquetSolution, params: DriveParams) -> float:
    """|<Phi+(0)|g(0)>|^2 for the positive-quasi-energy mode."""
    spec = instantaneous_spectrum(params, 0.0)
    if sol.degenerate or spec.degenerate:
        warnings.warn("overlap evaluated on a degenerate basis", DegeneracyWarning, stacklevel=2)
    if spec.ground is None:
        return float("nan")
    return float(abs(np.vdot(sol.modes_t0[0], spec.ground)) ** 2)


def folded_gap_from_mu(mu: float, omega0: float) -> float:
    """min_k |2 mu - k omega0|."""
    r = np.mod(2.0 * mu, omega0)
    return float(min(r, omega0 - r))


def folded_gap(params: DriveParams, steps: Optional[int] = None) -> float:
    return folded_gap_from_mu(quasienergy(params, steps), params.omega0)


@dataclass(frozen=True)
class Resonance:
    omega0_star: float
    folded_gap: float
    bracket: tuple[float, float]


def locate_resonances(
    params: DriveParams,
    window: tuple[float, float],
    scan_points: int = 101,
    threshold: Optional[float] = None,
    xtol: float = 1e-8,
    steps: Optional[int] = 2**15,
) -> list[Resonance]:
    """Quasi-degeneracies of the folded gap inside ``window``.

    ``params.omega0`` is ignored.  Each local minimum of the coarse scan is
    refined by golden-section search; minima with gap below ``threshold``
    (default omega0*/50) are returned in increasing frequency.
    """
    if scan_points < 3:
        raise ValueError("scan_points must be >= 3")
    lo, hi = map(float, window)
    if not 0 < lo < hi:
        raise ValueError(f"invalid window {window}")
    omegas = np.linspace(lo, hi, scan_points)

    def gap(w):
        return folded_gap(params.with_omega0(w), steps)

    gaps = np.array([gap(w) for w in omegas])
    idx = [i for i in range(1, scan_points - 1)
           if gaps[i] <= gaps[i - 1] and gaps[i] < gaps[i + 1]]
    if any(b - a <= 2 for a, b in zip(idx, idx[1:])):
        warnings.warn("adjacent folded-gap minima are closer than the scan resolution; "
                      "increase scan_points", DenseResonanceWarning, stacklevel=2)
    found = []
    for i in idx:
        a, b, c = omegas[i - 1], omegas[i], omegas[i + 1]
        res = optimize.minimize_scalar(gap, bracket=(a, b, c), method="golden",
                                       tol=xtol / (2.0 * b))
        w_star = float(res.x) if a <= res.x <= c else float(b)
        g_star = min(float(res.fun), gaps[i]) if a <= res.x <= c else float(gaps[i])
        limit = w_star / 50.0 if threshold is None else threshold
        if g_star < limit:
            found.append(Resonance(w_star, g_star, (float(a), float(c))))
    return found


def shirley_matrix(params: DriveParams, n_max: int) -> np.ndarray:
    """Truncated Floquet Hamiltonian H(t) - i d/dt on harmonics -n_max..n_max.

    Basis order: (harmonic n, spin), n ascending.  Only the first harmonics
    of the drive are nonzero.
    """
    h0 = np.einsum("k,kij->ij", _static_part(params), PAULI)
    h_minus = _first_harmonic(params)  # block (n, n+1)
    size = 2 * n_max + 1
    k = np.zeros((2 * size, 2 * size), dtype=complex)
    for i, n in enumerate(range(-n_max, n_max + 1)):
        s = slice(2 * i, 2 * i + 2)
        k[s, s] = h0 - n * params.omega0 * IDENTITY
        if i + 1 < size:
            t = slice(2 * i + 2, 2 * i + 4)
            k[s, t] = h_minus
            k[t, s] = h_minus.conj().T
    return k


def _static_part(params: DriveParams) -> np.ndarray:
    h = np.zeros(3)
    if params.form is Form.SINE_X:
        h[0] = params.delta
    else:
        h[1] = params.delta
    h[2] = params.epsilon
    return h


def _first_harmonic(params: DriveParams) -> np.ndarray:
    """H_{-1} = (1/tau) int H(t) e^{-i w t} dt, the (n, n+1) coupling block."""
    if params.form is Form.SINE_X:
        return params.amplitude / 2j * PAULI[2]
    return params.amplitude / 2.0 * PAULI[2]


def _central_mu(params: DriveParams, n_max: int) -> float:
    k = shirley_matrix(params, n_max)
    vals, vecs = np.linalg.eigh(k)
    weights = np.abs(vecs) ** 2
    harmonics = np.repeat(np.arange(-n_max, n_max + 1), 2)
    centroid = harmonics @ weights
    j = int(np.argmin(np.abs(centroid)))
    return abs(fold(vals[j], params.omega0))


def shirley_quasienergies(params: DriveParams, n_max: int = 64, tol: float = 1e-8) -> np.ndarray:
    """Folded quasi-energy pair (mu, fold(-mu)) from the truncated Floquet matrix.

    A :class:`ConvergenceWarning` is raised when enlarging the truncation by
    four harmonics moves the folded value by more than ``tol``.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    mu = _central_mu(params, n_max)
    check = _central_mu(params, n_max + 4)
    if abs(fold(check - mu, params.omega0)) > tol:
        warnings.warn(f"Shirley truncation n_max={n_max} not converged "
                      f"(change {abs(check - mu):.2e})", ConvergenceWarning, stacklevel=2)
    return np.array([mu, fold(-mu, params.omega0)])


def shirley_mu(params: DriveParams, tol: float = 1e-11, n_start: int = 16, n_limit: int = 512) -> float:
    """Positive folded quasi-energy from a Floquet matrix grown until stable."""
    n = n_start
    mu = _central_mu(params, n)
    while n < n_limit:
        n += 16
        new = _central_mu(params, n)
        if abs(fold(new - mu, params.omega0)) < tol:
            return new
        mu = new
    warnings.warn("Shirley quasi-energy did not converge", ConvergenceWarning, stacklevel=2)
    return mu
