"""NV spin/photo-physics engine."""

from .evolve import (EvolveResult, emission_rate, emission_trace, evolve,
                     evolve_with_photons, liouvillian, polarize, propagator,
                     POLARIZATION_TARGET)
from .model import (ControlSegment, NVParameters, NVState, OpticalRates,
                    PhysicsError, ZERO_TO_MINUS, ZERO_TO_PLUS,
                    drive_generator, ground_hamiltonian,
                    rotating_frame_hamiltonian)
from .spin import IDX_MINUS, IDX_PLUS, IDX_ZERO, Spin1Operators, spin1_matrices

__all__ = [
    "ControlSegment", "EvolveResult", "NVParameters", "NVState",
    "OpticalRates", "PhysicsError", "Spin1Operators",
    "IDX_MINUS", "IDX_PLUS", "IDX_ZERO",
    "ZERO_TO_MINUS", "ZERO_TO_PLUS", "POLARIZATION_TARGET",
    "drive_generator", "emission_rate", "emission_trace", "evolve",
    "evolve_with_photons", "ground_hamiltonian", "liouvillian", "polarize",
    "propagator", "rotating_frame_hamiltonian", "spin1_matrices",
]
