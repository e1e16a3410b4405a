"""Objectives on the Stiefel manifold: the weighted-PCA (Brockett) family.

The instance minimizes f(W) = −½ tr(WᵀCWD) over St(n, p), where C = XXᵀ is
the Gram matrix of an n×d Gaussian data matrix and D is a fixed diagonal
weight matrix with distinct decreasing entries. Distinct weights make the
minimizer unique up to column signs: the top-p eigenvectors of C ordered by
decreasing eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ConfigurationError
from .linalg import as_matrix, frob_inner, sym
from .manifolds import StiefelManifold, StiefelPoint

EIGENGAP_WARN_FACTOR = 1e-8


@runtime_checkable
class Objective(Protocol):
    """Minimal objective surface the optimizers consume."""

    def value(self, x: np.ndarray) -> float: ...

    def euclid_grad(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class NoiseConfig:
    """Stochastic-gradient model: additive Gaussian entries or a column minibatch."""

    kind: str  # "gaussian" | "minibatch"
    sigma_entry: float = 0.0
    batch_size: int = 0

    @classmethod
    def additive_gaussian(cls, sigma_entry: float) -> "NoiseConfig":
        if sigma_entry < 0:
            raise ConfigurationError("sigma_entry must be nonnegative")
        return cls(kind="gaussian", sigma_entry=sigma_entry)

    @classmethod
    def minibatch(cls, batch_size: int) -> "NoiseConfig":
        if batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")
        return cls(kind="minibatch", batch_size=batch_size)

    def gradient_noise_std(self, n: int, p: int) -> float:
        """σ with E‖g − ∇f‖_F² ≤ σ² for the Gaussian model."""
        if self.kind != "gaussian":
            raise ConfigurationError("analytic noise bound is only available for the Gaussian model")
        return self.sigma_entry * np.sqrt(n * p)


@dataclass(frozen=True)
class SmoothnessConstants:
    """Certified bounds for the gradient on the manifold.

    grad_lipschitz bounds ‖∇f(u) − ∇f(v)‖_F / ‖u − v‖_F; grad_norm_bound
    bounds ‖∇f‖_F on the manifold; composed_lipschitz is the smoothness
    constant 4·grad_lipschitz + 25·grad_norm_bound of f composed with the
    projection, valid on a spectral-norm tube of radius 0.2 around St(n, p).
    """

    grad_lipschitz: float
    grad_norm_bound: float
    composed_lipschitz: float


@dataclass(frozen=True)
class BrockettInstance:
    """Weighted-PCA problem data with its known optimum.

    Fields are immutable after construction; evaluation methods are pure, so
    instances can be shared across concurrent runs.
    """

    n: int
    p: int
    d: int
    data_seed: int
    samples: np.ndarray  # n×d data matrix X
    c: np.ndarray  # Gram matrix XXᵀ, exactly symmetric
    dmat: np.ndarray  # diagonal weights, decreasing
    w_star: StiefelPoint
    eigenvalues: np.ndarray  # full spectrum of c, descending
    warnings: tuple[str, ...] = field(default=())

    def value(self, x: np.ndarray) -> float:
        return brockett_value(self, x)

    def euclid_grad(self, x: np.ndarray) -> np.ndarray:
        return brockett_grad(self, x)

    def stochastic_grad(self, x, rng, noise_cfg: NoiseConfig) -> np.ndarray:
        return stochastic_grad(self, x, rng, noise_cfg)

    def optimum_value(self) -> float:
        """f at the known minimizer, −½ Σ dᵢ λᵢ."""
        return -0.5 * float(np.dot(self.dmat, self.eigenvalues[: self.p]))

    def key(self) -> tuple[int, int, int, int]:
        return (self.n, self.p, self.d, self.data_seed)


def make_brockett(n: int, p: int, d: int, data_seed: int) -> BrockettInstance:
    """Build an instance from an n×d standard-normal data matrix.

    Weights are (p, p−1, …, 1). The reference optimum holds the top-p
    eigenvectors of C with the sign of each column fixed so its
    largest-magnitude entry is positive. A near-degenerate eigengap
    λ_p − λ_{p+1} < 1e-8·λ_1 is recorded as a warning on the instance.
    """
    if not (1 <= p <= n <= d):
        raise ConfigurationError(f"need 1 <= p <= n <= d, got n={n}, p={p}, d={d}")
    rng = np.random.default_rng(data_seed)
    samples = rng.standard_normal((n, d))
    c = sym(samples @ samples.T)
    dmat = np.arange(p, 0, -1, dtype=np.float64)

    evals, evecs = np.linalg.eigh(c)
    evals = evals[::-1].copy()
    evecs = evecs[:, ::-1].copy()
    for k in range(p):
        j = int(np.argmax(np.abs(evecs[:, k])))
        if evecs[j, k] < 0:
            evecs[:, k] = -evecs[:, k]

    warnings: tuple[str, ...] = ()
    if p < n and evals[p - 1] - evals[p] < EIGENGAP_WARN_FACTOR * evals[0]:
        warnings = (
            f"eigengap {evals[p - 1] - evals[p]:.3e} below {EIGENGAP_WARN_FACTOR:.0e}*lambda_1; "
            "convergence to the reference subspace may be slow",
        )

    manifold = StiefelManifold(n, p)
    w_star = StiefelPoint(evecs[:, :p], manifold)
    return BrockettInstance(
        n=n, p=p, d=d, data_seed=data_seed,
        samples=samples, c=c, dmat=dmat, w_star=w_star,
        eigenvalues=evals, warnings=warnings,
    )


def brockett_value(inst: BrockettInstance, w) -> float:
    """−½ tr(wᵀ C w D)."""
    w = as_matrix(w, "objective input")
    cw = inst.c @ w
    return -0.5 * frob_inner(cw * inst.dmat[None, :], w)


def brockett_grad(inst: BrockettInstance, w) -> np.ndarray:
    """Euclidean gradient −C w D."""
    w = as_matrix(w, "gradient input")
    return -(inst.c @ w) * inst.dmat[None, :]


def smoothness_constants(inst: BrockettInstance) -> SmoothnessConstants:
    """Certified smoothness bounds from the instance spectrum.

    ‖C(U−V)D‖_F ≤ ‖C‖₂·max(d)·‖U−V‖_F gives the gradient Lipschitz bound,
    and ‖CWD‖_F ≤ ‖C‖₂·max(d)·‖W‖_F = ‖C‖₂·max(d)·√p on the manifold gives
    the gradient norm bound.
    """
    top = float(inst.eigenvalues[0])
    dmax = float(inst.dmat.max())
    grad_lipschitz = top * dmax
    grad_norm_bound = grad_lipschitz * np.sqrt(inst.p)
    return SmoothnessConstants(
        grad_lipschitz=grad_lipschitz,
        grad_norm_bound=grad_norm_bound,
        composed_lipschitz=4.0 * grad_lipschitz + 25.0 * grad_norm_bound,
    )


def subspace_error(inst: BrockettInstance, w) -> float:
    """‖wwᵀ − w*w*ᵀ‖_F, a rotation-invariant column-space distance."""
    w = as_matrix(w, "subspace input")
    ws = inst.w_star.x
    return float(np.linalg.norm(w @ w.T - ws @ ws.T))


def stochastic_grad(inst: BrockettInstance, w, rng: np.random.Generator, noise_cfg: NoiseConfig) -> np.ndarray:
    """Unbiased stochastic estimate of the Euclidean gradient.

    Gaussian: exact gradient plus iid N(0, sigma_entry²) entries. Minibatch:
    the gradient of the objective restricted to a uniform column sample,
    rescaled by d/batch so its expectation is the full gradient.
    """
    w = as_matrix(w, "gradient input")
    if noise_cfg.kind == "gaussian":
        g = brockett_grad(inst, w)
        if noise_cfg.sigma_entry > 0.0:
            g = g + noise_cfg.sigma_entry * rng.standard_normal(w.shape)
        return g
    if noise_cfg.kind == "minibatch":
        batch = noise_cfg.batch_size
        if not (1 <= batch <= inst.d):
            raise ConfigurationError(f"batch_size {batch} outside [1, {inst.d}]")
        if batch == inst.d:
            return brockett_grad(inst, w)
        idx = rng.choice(inst.d, size=batch, replace=False)
        xb = inst.samples[:, idx]
        return -(inst.d / batch) * (xb @ (xb.T @ w)) * inst.dmat[None, :]
    raise ConfigurationError(f"unknown noise kind {noise_cfg.kind!r}")


def save_instance(inst: BrockettInstance, path) -> None:
    """Persist an instance so runs can reload it without regenerating data."""
    np.savez(
        path,
        n=inst.n, p=inst.p, d=inst.d, data_seed=inst.data_seed,
        samples=inst.samples, c=inst.c, dmat=inst.dmat,
        w_star=inst.w_star.x, eigenvalues=inst.eigenvalues,
        warnings=np.array(inst.warnings, dtype=object),
    )


def load_instance(path, expect_key: tuple[int, int, int, int] | None = None) -> BrockettInstance:
    """Load a saved instance, optionally verifying its (n, p, d, data_seed) key."""
    path = Path(path)
    with np.load(path, allow_pickle=True) as z:
        key = (int(z["n"]), int(z["p"]), int(z["d"]), int(z["data_seed"]))
        if expect_key is not None and key != tuple(expect_key):
            raise ConfigurationError(f"instance file {path} has key {key}, expected {tuple(expect_key)}")
        n, p, d, data_seed = key
        manifold = StiefelManifold(n, p)
        return BrockettInstance(
            n=n, p=p, d=d, data_seed=data_seed,
            samples=z["samples"], c=z["c"], dmat=z["dmat"],
            w_star=StiefelPoint(z["w_star"], manifold),
            eigenvalues=z["eigenvalues"],
            warnings=tuple(str(w) for w in z["warnings"]),
        )
