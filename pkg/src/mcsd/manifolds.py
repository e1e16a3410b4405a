"""The Stiefel manifold St(n, p): points, projection, tangent-space calculus.

St(n, p) is the set of n×p matrices with orthonormal columns (XᵀX = I).
The unit sphere is the p = 1 case. The Euclidean projection of a
full-column-rank ambient matrix onto St(n, p) is its polar factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FeasibilityError, NumericError, RankDeficiencyError
from .linalg import EXACT, PolarMode, as_matrix, sym


@dataclass(frozen=True)
class StiefelManifold:
    """Descriptor of St(n, p) with the feasibility tolerance its points obey."""

    n: int
    p: int
    feas_tol: float = 1e-8

    def __post_init__(self):
        if self.p < 1 or self.n < self.p:
            raise ConfigurationError(f"St(n, p) needs 1 <= p <= n, got n={self.n}, p={self.p}")
        if self.feas_tol <= 0:
            raise ConfigurationError("feas_tol must be positive")


class StiefelPoint:
    """An n×p matrix certified to satisfy ‖xᵀx − I‖_F ≤ feas_tol.

    The stored array is a read-only copy, so points can be shared freely.
    """

    __slots__ = ("x", "manifold")

    def __init__(self, x, manifold: StiefelManifold):
        x = as_matrix(x, "Stiefel point")
        if x.shape != (manifold.n, manifold.p):
            raise ConfigurationError(
                f"point shape {x.shape} does not match St({manifold.n}, {manifold.p})"
            )
        violation = feasibility_violation(x)
        if violation > manifold.feas_tol:
            raise FeasibilityError(
                f"matrix violates the orthonormality constraint: "
                f"|x'x - I|_F = {violation:.3e} > {manifold.feas_tol:.1e}"
            )
        x = x.copy()
        x.flags.writeable = False
        self.x = x
        self.manifold = manifold

    def feasibility(self) -> float:
        return feasibility_violation(self.x)

    def __repr__(self):
        m = self.manifold
        return f"StiefelPoint(St({m.n}, {m.p}))"


def feasibility_violation(x) -> float:
    """‖xᵀx − I_p‖_F, the orthonormality-constraint violation."""
    x = as_matrix(x, "matrix")
    g = x.T @ x
    return float(np.linalg.norm(g - np.eye(x.shape[1])))


def project(m: StiefelManifold, y, mode: PolarMode = EXACT) -> StiefelPoint:
    """Euclidean projection of a full-column-rank matrix onto St(n, p).

    The projection is the polar factor of y, computed exactly or iteratively
    per `mode`. Rank-deficient input raises RankDeficiencyError.
    """
    y = as_matrix(y, "projection input")
    if y.shape != (m.n, m.p):
        raise ConfigurationError(f"input shape {y.shape} does not match St({m.n}, {m.p})")
    return StiefelPoint(mode.apply(y), m)


def tangent_project(x: StiefelPoint, g) -> np.ndarray:
    """Orthogonal projection of g onto the tangent space at x.

    Returns g − x·sym(xᵀg); the result z satisfies xᵀz + zᵀx = 0.
    """
    g = as_matrix(g, "tangent-projection input")
    if g.shape != x.x.shape:
        raise ConfigurationError(f"gradient shape {g.shape} does not match point shape {x.x.shape}")
    return g - x.x @ sym(x.x.T @ g)


def riemannian_grad(x: StiefelPoint, euclid_grad) -> np.ndarray:
    """Riemannian gradient: the tangent projection of the Euclidean gradient."""
    return tangent_project(x, euclid_grad)


def random_point(m: StiefelManifold, rng: np.random.Generator) -> StiefelPoint:
    """Haar-uniform point on St(n, p): polar factor of a Gaussian draw.

    Deterministic for a given generator state. Retries once in the
    astronomically improbable event of a rank-deficient draw.
    """
    for attempt in range(2):
        y = rng.standard_normal((m.n, m.p))
        try:
            return project(m, y)
        except RankDeficiencyError:
            continue
    raise NumericError("two consecutive Gaussian draws were rank-deficient")
