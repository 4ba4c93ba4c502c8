"""Driven spin-1/2: Floquet spectrum, adiabaticity breaking and dissipation."""

__version__ = "0.1.0"

from .core import DriveParams, Form, hamiltonian_at, instantaneous_spectrum, sine_x_equivalent
from .dissipation import (
    BathParams,
    SteadyState,
    bath_kernel,
    sigma_z_fourier,
    steady_excitation_energy,
    steady_state,
    sweep_steady_state,
    sweep_temperatures,
)
from .dynamics import beat_frequency, classical_llg, evolve_unitary, excitation_energy
from .floquet import (
    FloquetSolution,
    adiabatic_quasienergy,
    floquet_diagonalize,
    floquet_solution,
    fold,
    folded_gap,
    ground_overlap,
    locate_resonances,
    propagate,
    shirley_quasienergies,
)
from .ladder import (
    LeakageError,
    evolve_ladder,
    fit_rabi_frequency,
    ladder_hamiltonian,
    predict_resonance,
    reconstruct_physical_state,
    semiclassical_energy,
)

__all__ = [
    "BathParams",
    "DriveParams",
    "FloquetSolution",
    "Form",
    "LeakageError",
    "SteadyState",
    "adiabatic_quasienergy",
    "bath_kernel",
    "beat_frequency",
    "classical_llg",
    "evolve_ladder",
    "evolve_unitary",
    "excitation_energy",
    "fit_rabi_frequency",
    "floquet_diagonalize",
    "floquet_solution",
    "fold",
    "folded_gap",
    "ground_overlap",
    "hamiltonian_at",
    "instantaneous_spectrum",
    "ladder_hamiltonian",
    "locate_resonances",
    "predict_resonance",
    "propagate",
    "reconstruct_physical_state",
    "semiclassical_energy",
    "shirley_quasienergies",
    "sigma_z_fourier",
    "sine_x_equivalent",
    "steady_excitation_energy",
    "steady_state",
    "sweep_steady_state",
    "sweep_temperatures",
]
