"""Real-time dynamics: unitary spin evolution, beat analysis, and damped classical precession."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba as nb
import numpy as np
from scipy import signal

from .core import DriveParams, Form, bloch_vector, field_components
from .floquet import propagator_grid


@dataclass(frozen=True)
class Trajectory:
    """Sampled unitary evolution.

    Intra-period samples are at ``times`` (``samples_per_period`` per period);
    stroboscopic samples at t = n tau, n = 0..n_periods, are kept separately.
    """

    times: np.ndarray
    states: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)   # (..., 3) Bloch vector
    e_ex: np.ndarray = field(repr=False)
    strobe_times: np.ndarray = field(repr=False)
    strobe_states: np.ndarray = field(repr=False)
    strobe_e_ex: np.ndarray = field(repr=False)
    period: float = 0.0


def excitation_energy(params: DriveParams, t, psi) -> np.ndarray:
    """<psi|H(t)|psi> - E_g(t) for batches of times and states."""
    h = field_components(params, t)
    return np.einsum("...k,...k->...", h, bloch_vector(psi)) + np.linalg.norm(h, axis=-1)


def evolve_unitary(
    params: DriveParams,
    psi0: np.ndarray,
    n_periods: int,
    steps_per_period: int = 4096,
    samples_per_period: int = 64,
) -> Trajectory:
    """Evolve ``psi0`` from t = 0 over ``n_periods`` drive periods.

    The midpoint sub-step propagators repeat every period, so U(t_j, 0) is
    built once on the sampling grid and the state is advanced period by
    period with the one-period propagator.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0).real - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalised")
    steps = int(math.ceil(steps_per_period / samples_per_period) * samples_per_period)
    props = propagator_grid(params, samples_per_period, steps)
    u_period = props[-1]
    strobe = np.empty((n_periods + 1, 2), dtype=complex)
    strobe[0] = psi0
    for n in range(n_periods):
        strobe[n + 1] = u_period @ strobe[n]
    tau = params.period
    states = np.einsum("jab,nb->nja", props[:-1], strobe[:-1]).reshape(-1, 2)
    local = np.arange(samples_per_period) * tau / samples_per_period
    times = (np.arange(n_periods)[:, None] * tau + local[None, :]).ravel()
    strobe_times = np.arange(n_periods + 1) * tau
    return Trajectory(
        times=times,
        states=states,
        sigma=bloch_vector(states),
        e_ex=excitation_energy(params, times, states),
        strobe_times=strobe_times,
        strobe_states=strobe,
        strobe_e_ex=excitation_energy(params, strobe_times, strobe),
        period=tau,
    )


def beat_frequency(
    series: np.ndarray,
    dt: float,
    min_amplitude: float = 1e-3,
    pad_factor: int = 16,
) -> Optional[float]:
    """Dominant nonzero angular frequency of a uniformly sampled series.

    Zero-padded DFT of the mean-removed series, refined by a parabola through
    the peak bin and its neighbours.  Returns ``None`` when the peak does not
    exceed ten times the noise floor, taken as the larger of the median
    spectral amplitude and ``min_amplitude``.
    """
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    n = x.size
    if n < 8:
        raise ValueError("series too short for spectral analysis")
    nfft = pad_factor * (1 << (n - 1).bit_length())
    amp = np.abs(np.fft.rfft(x, nfft)) * 2.0 / n
    floor = max(float(np.median(np.abs(np.fft.rfft(x)) * 2.0 / n)), min_amplitude)
    # skip the DC lobe: first zero of the rectangular window sits at nfft/n bins
    start = int(math.ceil(nfft / n))
    k = start + int(np.argmax(amp[start:-1]))
    if amp[k] < 10.0 * floor:
        return None
    a, b, c = amp[k - 1], amp[k], amp[k + 1]
    denom = a - 2.0 * b + c
    offset = 0.5 * (a - c) / denom if denom != 0 else 0.0
    return 2.0 * math.pi * (k + offset) / (nfft * dt)


# --- classical precession with Gilbert damping -------------------------------------


@dataclass(frozen=True)
class ClassicalTrajectory:
    times: np.ndarray
    M: np.ndarray = field(repr=False)
    e_ex: np.ndarray = field(repr=False)
    gilbert: float = 0.0
    period: float = 0.0
    samples_per_period: int = 64

    def per_period(self) -> np.ndarray:
        """e_ex reshaped to (period, sample within period)."""
        return self.e_ex[:-1].reshape(-1, self.samples_per_period)


@nb.njit(cache=True)
def _field(form_sine, delta, eps, amp, w, t):
    # B = -h
    if form_sine:
        return -delta, 0.0, -(eps + amp * math.sin(w * t))
    return 0.0, -delta, -(eps + amp * math.cos(w * t))


@nb.njit(cache=True)
def _rotate(mx, my, mz, bx, by, bz, h):
    # exact precession dM/dt = 2 M x B over h: rotation about B by angle -2|B|h
    b = math.sqrt(bx * bx + by * by + bz * bz)
    if b == 0.0:
        return mx, my, mz
    kx, ky, kz = bx / b, by / b, bz / b
    ang = -2.0 * b * h
    c, s = math.cos(ang), math.sin(ang)
    dot = kx * mx + ky * my + kz * mz
    cx = ky * mz - kz * my
    cy = kz * mx - kx * mz
    cz = kx * my - ky * mx
    return (mx * c + cx * s + kx * dot * (1 - c),
            my * c + cy * s + ky * dot * (1 - c),
            mz * c + cz * s + kz * dot * (1 - c))


@nb.njit(cache=True)
def _damp(mx, my, mz, bx, by, bz, lam, h):
    # exact flow of dM/dt = 2 lam (B - M (M.B)) for frozen B:
    # tan(theta/2) shrinks by exp(-2 lam |B| h), theta the angle to B
    b = math.sqrt(bx * bx + by * by + bz * bz)
    if b == 0.0 or lam == 0.0:
        return mx, my, mz
    kx, ky, kz = bx / b, by / b, bz / b
    cos_t = kx * mx + ky * my + kz * mz
    px, py, pz = mx - cos_t * kx, my - cos_t * ky, mz - cos_t * kz
    sin_t = math.sqrt(px * px + py * py + pz * pz)
    if sin_t < 1e-300:
        return mx, my, mz
    theta = math.atan2(sin_t, cos_t)
    theta_new = 2.0 * math.atan(math.tan(0.5 * theta) * math.exp(-2.0 * lam * b * h))
    ux, uy, uz = px / sin_t, py / sin_t, pz / sin_t
    c, s = math.cos(theta_new), math.sin(theta_new)
    return kx * c + ux * s, ky * c + uy * s, kz * c + uz * s


@nb.njit(cache=True)
def _llg_kernel(m0, lam, form_sine, delta, eps, amp, w, n_periods, steps, stride):
    tau = 2.0 * math.pi / w
    h = tau / steps
    n_out = n_periods * (steps // stride) + 1
    out = np.empty((n_out, 3))
    mx, my, mz = m0[0], m0[1], m0[2]
    out[0, 0], out[0, 1], out[0, 2] = mx, my, mz
    k = 1
    for n in range(n_periods):
        for s in range(steps):
            t = (n * steps + s + 0.5) * h
            bx, by, bz = _field(form_sine, delta, eps, amp, w, t)
            mx, my, mz = _damp(mx, my, mz, bx, by, bz, lam, 0.5 * h)
            mx, my, mz = _rotate(mx, my, mz, bx, by, bz, h)
            mx, my, mz = _damp(mx, my, mz, bx, by, bz, lam, 0.5 * h)
            # guard the unit length against rounding drift
            r = math.sqrt(mx * mx + my * my + mz * mz)
            mx, my, mz = mx / r, my / r, mz / r
            if (s + 1) % stride == 0:
                out[k, 0], out[k, 1], out[k, 2] = mx, my, mz
                k += 1
    return out


def classical_llg(
    params: DriveParams,
    m0: np.ndarray,
    gilbert: float,
    n_periods: int,
    steps_per_period: int = 4096,
    samples_per_period: int = 64,
) -> ClassicalTrajectory:
    """Integrate dM/dt = 2 M x B - 2 lambda M x (M x B) from ``m0``.

    Strang splitting of the exact precession (a rotation about B) and the
    exact damping flow, both with B frozen at the sub-step midpoint.  Second
    order, and |M| = 1 holds by construction.  The excitation energy is the
    classical counterpart of the quantum one, e_ex = |B| - M.B.
    """
    if gilbert < 0:
        raise ValueError("Gilbert parameter must be >= 0")
    m0 = np.asarray(m0, dtype=float)
    if abs(np.linalg.norm(m0) - 1.0) > 1e-12:
        raise ValueError("m0 must be a unit vector")
    stride = steps_per_period // samples_per_period
    if stride * samples_per_period != steps_per_period:
        raise ValueError("steps_per_period must be a multiple of samples_per_period")
    out = _llg_kernel(m0, float(gilbert), params.form is Form.SINE_X, params.delta,
                      params.epsilon, params.amplitude, params.omega0,
                      int(n_periods), int(steps_per_period), int(stride))
    times = np.arange(out.shape[0]) * params.period / samples_per_period
    b = -field_components(params, times)
    e_ex = np.linalg.norm(b, axis=-1) - np.einsum("ij,ij->i", out, b)
    return ClassicalTrajectory(times, out, e_ex, float(gilbert), params.period, samples_per_period)


def settling_period(traj: ClassicalTrajectory, tol: float = 1e-6) -> Optional[int]:
    """First period index after which e_ex repeats from period to period within ``tol``."""
    e = traj.per_period()
    diff = np.max(np.abs(np.diff(e, axis=0)), axis=1)
    bad = np.nonzero(diff >= tol)[0]
    if bad.size == 0:
        return 0
    n = int(bad[-1]) + 1
    return n if n < diff.size else None


def envelope_maxima(envelope: np.ndarray, prominence: float = 0.1) -> np.ndarray:
    """Indices of envelope maxima whose prominence exceeds a fraction of the envelope range."""
    env = np.asarray(envelope, dtype=float)
    span = float(env.max() - env.min())
    if span == 0.0:
        return np.array([], dtype=int)
    peaks, _ = signal.find_peaks(env, prominence=prominence * span)
    return peaks
