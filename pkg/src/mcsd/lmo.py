"""Linear minimization oracles over unit norm balls, and dual norms.

lmo(norm, s) returns argmin ⟨s, d⟩ over ‖d‖ ≤ 1; the attained value is
−‖s‖_* where ‖·‖_* is the dual norm. Frobenius is self-dual with oracle
−s/‖s‖_F; the dual of spectral is nuclear, with oracle −msign(s).
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import ZeroGradient
from .linalg import EXACT, PolarMode, as_matrix, svd


class NormKind(enum.Enum):
    FROBENIUS = "frobenius"
    SPECTRAL = "spectral"

    @property
    def dual_name(self) -> str:
        return "frobenius" if self is NormKind.FROBENIUS else "nuclear"


def zero_tolerance(n: int, p: int) -> float:
    """Frobenius-norm threshold below which the LMO input counts as zero."""
    return 1e-14 * math.sqrt(n * p)


def lmo(norm: NormKind, s, polar_mode: PolarMode = EXACT) -> np.ndarray:
    """Minimizer of ⟨s, d⟩ over the unit ball of `norm`.

    Raises ZeroGradient when ‖s‖_F is below zero_tolerance: every unit-ball
    element is then optimal and callers decide what that means (optimizers
    treat it as converged / hold position).
    """
    s = as_matrix(s, "lmo input")
    fro = float(np.sqrt(np.sum(s * s)))
    if fro <= zero_tolerance(*s.shape):
        raise ZeroGradient
    if norm is NormKind.FROBENIUS:
        return -s / fro
    return -polar_mode.apply(s)


def dual_norm(norm: NormKind, s) -> float:
    """Dual norm ‖s‖_* = sup{⟨s, d⟩ : ‖d‖ ≤ 1} of the chosen norm."""
    s = as_matrix(s, "dual-norm input")
    if norm is NormKind.FROBENIUS:
        return float(np.sqrt(np.sum(s * s)))
    return float(np.sum(svd(s).s))


def norm_equiv_constant(norm: NormKind, n: int, p: int) -> float:
    """Smallest N with ‖x‖_F ≤ N·‖x‖ on n×p matrices.

    Frobenius: 1. Spectral: sqrt(min(n, p)), tight for matrices with
    min(n, p) equal singular values.
    """
    if norm is NormKind.FROBENIUS:
        return 1.0
    return math.sqrt(min(n, p))
