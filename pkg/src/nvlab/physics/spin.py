"""Spin-1 operator algebra in the {|+1>, |0>, |-1>} basis."""

from dataclasses import dataclass

import numpy as np

# Ground-triplet basis ordering used throughout the package.
IDX_PLUS = 0
IDX_ZERO = 1
IDX_MINUS = 2

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Spin1Operators:
    """The three dimensionless spin-1 matrices."""

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


def spin1_matrices() -> Spin1Operators:
    """Return the standard spin-1 matrices in the {|+1>, |0>, |-1>} basis."""
    sx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQRT2
    sy = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQRT2
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return Spin1Operators(sx=sx, sy=sy, sz=sz)
