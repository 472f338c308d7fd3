"""Symmetrical-component transformation between sequence and phase frames."""

from __future__ import annotations

import cmath
import math

import numpy as np

from .model import SequenceImpedance

ALPHA = cmath.exp(2j * math.pi / 3)


def fortescue_matrix() -> np.ndarray:
    """A with ``V_abc = A @ V_012``; rows [1,1,1], [1,a^2,a], [1,a,a^2]."""
    a, a2 = ALPHA, ALPHA**2
    return np.array([[1, 1, 1], [1, a2, a], [1, a, a2]], dtype=complex)


def fortescue_inverse() -> np.ndarray:
    a, a2 = ALPHA, ALPHA**2
    return np.array([[1, 1, 1], [1, a, a2], [1, a2, a]], dtype=complex) / 3.0


def sequence_to_phase(z: SequenceImpedance) -> np.ndarray:
    """Phase-frame impedance ``A diag(z0, z1, z2) A^-1``."""
    diag = np.diag([z.z0, z.z1, z.negative])
    return fortescue_matrix() @ diag @ fortescue_inverse()


def phase_to_sequence(z_abc: np.ndarray) -> SequenceImpedance:
    """Inverse of :func:`sequence_to_phase` for sequence-decoupled matrices."""
    z012 = fortescue_inverse() @ np.asarray(z_abc, dtype=complex) @ fortescue_matrix()
    return SequenceImpedance(complex(z012[0, 0]), complex(z012[1, 1]), complex(z012[2, 2]))


def sequence_components(v_abc) -> np.ndarray:
    """Zero, positive and negative sequence phasors of a phase triple."""
    return fortescue_inverse() @ np.asarray(v_abc, dtype=complex)
