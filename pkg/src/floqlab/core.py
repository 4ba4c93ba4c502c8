"""Drive parameters and the instantaneous two-level Hamiltonian.

States are plain ``complex128`` arrays of shape ``(2,)`` in the sigma^z
eigenbasis; propagators are ``(2, 2)`` arrays.  The Hamiltonian is always
written as ``H(t) = h(t) . sigma`` with a real 3-vector ``h``; the physical
magnetic field is ``B = -h``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])


class Form(enum.Enum):
    """Which of the two equivalent drive conventions is in use."""

    COSINE_Y = "cosine_y"  # Delta sigma^y + (eps + A cos w t) sigma^z
    SINE_X = "sine_x"      # (eps + A sin w t) sigma^z + Delta sigma^x

    @classmethod
    def parse(cls, value: "Form | str") -> "Form":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for member in cls:
            if member.value == key or member.name.lower() == key:
                return member
        raise ValueError(f"unknown drive form: {value!r}")


@dataclass(frozen=True)
class DriveParams:
    """Spin-1/2 drive: transverse field, static longitudinal field, amplitude, frequency."""

    delta: float
    epsilon: float
    amplitude: float
    omega0: float
    form: Form = Form.SINE_X

    def __post_init__(self):
        object.__setattr__(self, "form", Form.parse(self.form))
        for name in ("delta", "epsilon", "amplitude", "omega0"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.omega0 <= 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega0

    @property
    def energy(self) -> float:
        """sqrt(eps^2 + Delta^2), the undriven level energy."""
        return math.hypot(self.epsilon, self.delta)

    def with_omega0(self, omega0: float) -> "DriveParams":
        return replace(self, omega0=omega0)

    def with_form(self, form: Form | str) -> "DriveParams":
        return replace(self, form=Form.parse(form))


def field_components(params: DriveParams, t) -> np.ndarray:
    """Return h(t) with H(t) = h . sigma; vectorised over ``t`` (last axis = xyz)."""
    t = np.asarray(t, dtype=float)
    h = np.zeros(t.shape + (3,))
    if params.form is Form.SINE_X:
        h[..., 0] = params.delta
        h[..., 2] = params.epsilon + params.amplitude * np.sin(params.omega0 * t)
    else:
        h[..., 1] = params.delta
        h[..., 2] = params.epsilon + params.amplitude * np.cos(params.omega0 * t)
    return h


def magnetic_field(params: DriveParams, t) -> np.ndarray:
    """The field B(t) of H = -B . sigma."""
    return -field_components(params, t)


def hamiltonian_at(params: DriveParams, t: float) -> np.ndarray:
    h = field_components(params, t)
    return np.einsum("k,kij->ij", h, PAULI)


def su2_exp(h: np.ndarray, dt) -> np.ndarray:
    """exp(-i dt h.sigma) in closed form; ``h`` may carry leading batch axes."""
    h = np.asarray(h, dtype=float)
    norm = np.sqrt(np.sum(h * h, axis=-1))
    theta = norm * dt
    c = np.cos(theta)
    # sin(|h| dt)/|h| -> dt as |h| -> 0
    s = dt * np.sinc(theta / np.pi)
    out = np.empty(h.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = c - 1j * s * h[..., 2]
    out[..., 1, 1] = c + 1j * s * h[..., 2]
    out[..., 0, 1] = -1j * s * (h[..., 0] - 1j * h[..., 1])
    out[..., 1, 0] = -1j * s * (h[..., 0] + 1j * h[..., 1])
    return out


def fix_phase(vec: np.ndarray) -> np.ndarray:
    """Make the first nonzero component real and positive."""
    vec = np.asarray(vec, dtype=complex)
    idx = int(np.argmax(np.abs(vec) > 1e-14))
    a = vec[idx]
    return vec * (abs(a) / a) if a != 0 else vec


@dataclass(frozen=True)
class InstantSpectrum:
    ground_energy: float
    excited_energy: float
    ground: Optional[np.ndarray] = field(repr=False)
    excited: Optional[np.ndarray] = field(repr=False)
    degenerate: bool = False

    @property
    def gap(self) -> float:
        return self.excited_energy - self.ground_energy


def instantaneous_spectrum(params: DriveParams, t: float) -> InstantSpectrum:
    """Eigenpairs of H(t).

    When the field vanishes the eigenbasis is undefined; the result is
    flagged ``degenerate`` and carries no eigenvectors.
    """
    h = field_components(params, t)
    norm = float(np.linalg.norm(h))
    if norm == 0.0:
        return InstantSpectrum(0.0, 0.0, None, None, degenerate=True)
    _, vecs = np.linalg.eigh(hamiltonian_at(params, t))
    return InstantSpectrum(
        ground_energy=-norm,
        excited_energy=norm,
        ground=fix_phase(vecs[:, 0]),
        excited=fix_phase(vecs[:, 1]),
    )


def expectation(psi: np.ndarray, op: np.ndarray) -> np.ndarray:
    """<psi|op|psi> for a batch of states ``psi[..., 2]``."""
    return np.real(np.einsum("...i,ij,...j->...", psi.conj(), op, psi))


def bloch_vector(psi: np.ndarray) -> np.ndarray:
    """(<sx>, <sy>, <sz>) for a batch of states."""
    psi = np.asarray(psi, dtype=complex)
    a, b = psi[..., 0], psi[..., 1]
    cross = 2.0 * np.conj(a) * b
    return np.stack([cross.real, cross.imag, np.abs(a) ** 2 - np.abs(b) ** 2], axis=-1)


def state_from_bloch(m: np.ndarray) -> np.ndarray:
    """A pure state whose Bloch vector is the unit vector ``m``."""
    m = np.asarray(m, dtype=float)
    m = m / np.linalg.norm(m)
    theta = math.acos(max(-1.0, min(1.0, m[2])))
    phi = math.atan2(m[1], m[0])
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


def unitarity_defect(u: np.ndarray) -> float:
    """Frobenius norm of U^dagger U - I."""
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - IDENTITY))


# exp(-i pi/4 sigma^z) maps sigma^x onto sigma^y
_QUARTER_TURN_Z = np.diag([np.exp(-0.25j * np.pi), np.exp(0.25j * np.pi)])


def sine_x_equivalent(params: DriveParams) -> tuple[DriveParams, float, np.ndarray]:
    """Map a cosine-y drive onto the sine-x convention.

    Returns ``(sine_params, time_shift, rotation)`` such that
    ``H_cos(t) = R H_sin(t + time_shift) R^dagger``.  Sine-x input is
    returned unchanged with zero shift and identity rotation.
    """
    if params.form is Form.SINE_X:
        return params, 0.0, IDENTITY.copy()
    return params.with_form(Form.SINE_X), params.period / 4.0, _QUARTER_TURN_Z.copy()
