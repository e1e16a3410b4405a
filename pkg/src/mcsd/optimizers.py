"""Optimizers over a common stepping interface.

Four methods share the projected-update template x ← P_M(x + α·direction):

* MCSD picks the direction with a norm-ball LMO applied to the Riemannian
  gradient; the spectral-norm case on the Stiefel manifold is SPEL,
  msign(x − α·msign(∇_M f)).
* RGD is MCSD with the Frobenius norm (the normalized-gradient step); it
  shares the MCSD code path rather than duplicating it.
* Stochastic MCSD adds heavy-ball momentum over sampled gradients and
  applies the LMO to the tangent-projected momentum.
* Manifold Muon solves the tangent-constrained spectral LMO with a dual
  subgradient ascent inner loop, then hard-projects the direction so the
  executed step is always feasible.

Step sizes come from StepSchedule: constants, periodic decay, or the
horizon-dependent prescriptions matching the deterministic and stochastic
convergence bounds (which also pins the momentum β = 1 − T^(−1/2)).
"""

from __future__ import annotations

import math
import time
import warnings as _warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ConfigurationError, FeasibilityError, ZeroGradient
from .linalg import EXACT, PolarMode, as_matrix, frob_inner, spectral_norm, sym
from .lmo import NormKind, dual_norm, lmo, zero_tolerance
from .manifolds import StiefelPoint, feasibility_violation, project, riemannian_grad, tangent_project
from .objectives import NoiseConfig
from .trace import TraceRecord

# Spectral-norm tube radius around the Stiefel manifold on which the
# composed-smoothness constant is valid; bound-matching schedules cap their
# steps at this value.
STEP_RADIUS = 0.2

# Multiple of the manifold feasibility tolerance above which a run aborts.
FEASIBILITY_ABORT_FACTOR = 100.0


# ---------------------------------------------------------------------------
# Step-size schedules


@dataclass(frozen=True)
class StepSchedule:
    """Deterministic step-size sequence α_t.

    kinds: "constant", "periodic_decay", "deterministic_bound",
    "stochastic_bound". The bound kinds produce the constant step matching
    the corresponding convergence guarantee for a horizon of `horizon`
    steps; the stochastic kind additionally pins the momentum parameter.
    """

    kind: str
    base: float
    factor: float = 1.0
    period: int = 0
    horizon: int = 0
    beta: float | None = None
    cap: float | None = None

    def alpha(self, t: int) -> float:
        if self.kind == "periodic_decay":
            return self.base * self.factor ** (t // self.period)
        return self.base

    @property
    def momentum_beta(self) -> float:
        if self.beta is None:
            raise ConfigurationError(f"schedule kind {self.kind!r} does not define a momentum parameter")
        return self.beta

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.base:g}"
        if self.kind == "periodic_decay":
            return f"periodic_decay:{self.base:g},{self.factor:g},{self.period}"
        return f"{self.kind}:T={self.horizon}"


def constant_schedule(alpha: float) -> StepSchedule:
    if alpha <= 0:
        raise ConfigurationError("step size must be positive")
    return StepSchedule(kind="constant", base=alpha)


def periodic_decay_schedule(alpha0: float, factor: float, period: int) -> StepSchedule:
    if alpha0 <= 0 or factor <= 0 or period < 1:
        raise ConfigurationError("periodic decay needs alpha0 > 0, factor > 0, period >= 1")
    return StepSchedule(kind="periodic_decay", base=alpha0, factor=factor, period=period)


def deterministic_bound_schedule(
    gap: float, lipschitz: float, norm_equiv: float, horizon: int, radius: float = STEP_RADIUS
) -> StepSchedule:
    """Constant step sqrt(2Δ/(T·L·N²)), valid once T ≥ 2Δ/(r²LN²)."""
    _require_positive(gap=gap, lipschitz=lipschitz, norm_equiv=norm_equiv, radius=radius)
    t_min = 2.0 * gap / (radius**2 * lipschitz * norm_equiv**2)
    if horizon < t_min:
        raise ConfigurationError(
            f"horizon T={horizon} below the minimum {t_min:.6g} required for the step to stay within {radius}"
        )
    alpha = math.sqrt(2.0 * gap / (horizon * lipschitz * norm_equiv**2))
    return StepSchedule(kind="deterministic_bound", base=alpha, horizon=horizon, cap=radius)


def stochastic_bound_schedule(
    gap: float, lipschitz: float, norm_equiv: float, horizon: int, radius: float = STEP_RADIUS
) -> StepSchedule:
    """Constant step sqrt(2Δ/(L·N²·T·(8√T−7))) with β = 1 − T^(−1/2)."""
    _require_positive(gap=gap, lipschitz=lipschitz, norm_equiv=norm_equiv, radius=radius)
    t_min = max(4.0, (gap / (2.0 * lipschitz * norm_equiv**2 * radius**2)) ** (2.0 / 3.0))
    if horizon < t_min:
        raise ConfigurationError(
            f"horizon T={horizon} below the minimum {t_min:.6g} required by the stochastic step rule"
        )
    root_t = math.sqrt(horizon)
    alpha = math.sqrt(2.0 * gap / (lipschitz * norm_equiv**2 * horizon * (8.0 * root_t - 7.0)))
    return StepSchedule(
        kind="stochastic_bound", base=alpha, horizon=horizon, beta=1.0 - 1.0 / root_t, cap=radius
    )


_SCHEDULE_FACTORIES: dict[str, Callable[..., StepSchedule]] = {
    "constant": constant_schedule,
    "periodic_decay": periodic_decay_schedule,
    "deterministic_bound": deterministic_bound_schedule,
    "stochastic_bound": stochastic_bound_schedule,
}


def make_schedule(kind: str, **params) -> StepSchedule:
    try:
        factory = _SCHEDULE_FACTORIES[kind]
    except KeyError:
        raise ConfigurationError(f"unknown schedule kind {kind!r}") from None
    return factory(**params)


def _require_positive(**named) -> None:
    for name, value in named.items():
        if value <= 0:
            raise ConfigurationError(f"{name} must be positive, got {value}")


# ---------------------------------------------------------------------------
# Method configurations


@dataclass(frozen=True)
class Mcsd:
    """Deterministic LMO steepest descent under the chosen norm."""

    norm: NormKind = NormKind.SPECTRAL


@dataclass(frozen=True)
class Rgd:
    """Riemannian gradient descent: the Frobenius-norm MCSD step."""


@dataclass(frozen=True)
class StochasticMcsd:
    """Stochastic MCSD with heavy-ball momentum."""

    norm: NormKind
    beta: float
    noise: NoiseConfig

    def __post_init__(self):
        if not (0.0 <= self.beta < 1.0):
            raise ConfigurationError(f"momentum beta must lie in [0, 1), got {self.beta}")


@dataclass(frozen=True)
class ManifoldMuon:
    """Tangent-constrained spectral LMO with a dual-ascent inner solver."""

    inner_iters: int = 10
    inner_lr: float = 0.1
    quality_tol: float = 1e-3

    def __post_init__(self):
        if self.inner_iters < 1:
            raise ConfigurationError("inner_iters must be at least 1")
        if self.inner_lr <= 0 or self.quality_tol <= 0:
            raise ConfigurationError("inner_lr and quality_tol must be positive")


Method = Union[Mcsd, Rgd, StochasticMcsd, ManifoldMuon]


def method_norm(method: Method) -> NormKind:
    """Norm whose dual is reported for a method's Riemannian gradient."""
    if isinstance(method, (Mcsd, StochasticMcsd)):
        return method.norm
    if isinstance(method, Rgd):
        return NormKind.FROBENIUS
    return NormKind.SPECTRAL


# ---------------------------------------------------------------------------
# Run state and steps


@dataclass
class OptimizerRun:
    """Single-owner state of one optimization trajectory.

    A (seed, config) pair yields a bitwise-identical trajectory when stepped
    sequentially; distinct runs own distinct RNG streams and may execute on
    distinct workers.
    """

    method: Method
    schedule: StepSchedule
    x: StiefelPoint
    rng: np.random.Generator | None = None
    polar_mode: PolarMode = EXACT
    momentum: np.ndarray | None = None
    t: int = 0
    converged: bool = False
    fallback_count: int = 0

    @property
    def manifold(self):
        return self.x.manifold


@dataclass(frozen=True)
class StepInfo:
    """What a single step did: its size, inner work, and special outcomes."""

    alpha: float
    inner_iters: int = 0
    held: bool = False
    fallback: bool = False


def step(run: OptimizerRun, objective) -> StepInfo:
    """Advance the run by one iteration, dispatching on its method."""
    if isinstance(run.method, Mcsd):
        return mcsd_step(run, objective)
    if isinstance(run.method, Rgd):
        return rgd_step(run, objective)
    if isinstance(run.method, StochasticMcsd):
        return stochastic_mcsd_step(run, objective)
    if isinstance(run.method, ManifoldMuon):
        return manifold_muon_step(run, objective)
    raise ConfigurationError(f"unknown method {run.method!r}")


def mcsd_step(run: OptimizerRun, objective) -> StepInfo:
    """x ← P_M(x + α·LMO(∇_M f(x))); a zero gradient holds position."""
    if not isinstance(run.method, Mcsd):
        raise ConfigurationError("mcsd_step requires an Mcsd method")
    return _descent_step(run, objective, run.method.norm)


def rgd_step(run: OptimizerRun, objective) -> StepInfo:
    """x ← P_M(x − α·∇_M f/‖∇_M f‖_F); the Frobenius-norm MCSD step."""
    if not isinstance(run.method, Rgd):
        raise ConfigurationError("rgd_step requires an Rgd method")
    return _descent_step(run, objective, NormKind.FROBENIUS)


def _descent_step(run: OptimizerRun, objective, norm: NormKind) -> StepInfo:
    alpha = run.schedule.alpha(run.t)
    g = riemannian_grad(run.x, objective.euclid_grad(run.x.x))
    try:
        d = lmo(norm, g, run.polar_mode)
    except ZeroGradient:
        run.converged = True
        run.t += 1
        return StepInfo(alpha=alpha, held=True)
    _move(run, alpha, d)
    return StepInfo(alpha=alpha)


def stochastic_mcsd_step(run: OptimizerRun, objective) -> StepInfo:
    """Sample a gradient, update momentum (m₀ = g₀), step along the LMO of
    the tangent-projected momentum."""
    method = run.method
    if not isinstance(method, StochasticMcsd):
        raise ConfigurationError("stochastic_mcsd_step requires a StochasticMcsd method")
    if run.rng is None:
        raise ConfigurationError("stochastic runs need an RNG stream")
    alpha = run.schedule.alpha(run.t)
    g = objective.stochastic_grad(run.x.x, run.rng, method.noise)
    if run.momentum is None:
        run.momentum = g.copy()
    else:
        run.momentum = method.beta * run.momentum + (1.0 - method.beta) * g
    projected = tangent_project(run.x, run.momentum)
    try:
        d = lmo(method.norm, projected, run.polar_mode)
    except ZeroGradient:
        run.t += 1
        return StepInfo(alpha=alpha, held=True)
    _move(run, alpha, d)
    return StepInfo(alpha=alpha)


@dataclass(frozen=True)
class MuonDirectionResult:
    """Outcome of the tangent-constrained LMO inner solve."""

    direction: np.ndarray
    inner_iters: int
    fallback: bool
    raw_tangency: float  # ‖sym(xᵀd)‖_F before hard projection
    quality_gap: float  # ⟨g, d⟩ − (−‖g‖_F²/‖g‖₂); ≤ quality_tol·‖g‖_F when accepted


def manifold_muon_direction(
    x: StiefelPoint,
    g_m: np.ndarray,
    inner_iters: int,
    inner_lr: float,
    quality_tol: float = 1e-3,
    polar_mode: PolarMode = EXACT,
) -> MuonDirectionResult:
    """Approximately minimize ⟨g_m, d⟩ over {‖d‖₂ ≤ 1} ∩ T_x.

    Dual subgradient ascent on the symmetric multiplier Λ:
    d ← −msign(g_m + xΛ), Λ ← Λ − lr·sym(xᵀd). The final d is then
    hard-projected (tangent projection followed by a spectral-norm clip) so
    the returned direction is always feasible. It must beat the always
    feasible direction −g_m/‖g_m‖₂ up to quality_tol·‖g_m‖_F; otherwise
    that fallback is returned and flagged.
    """
    if inner_iters < 1:
        raise ConfigurationError("inner_iters must be at least 1")
    g_m = as_matrix(g_m, "Riemannian gradient")
    lam = np.zeros((x.manifold.p, x.manifold.p))
    d = None
    for _ in range(inner_iters):
        d = -polar_mode.apply(g_m + x.x @ lam)
        lam = lam - inner_lr * sym(x.x.T @ d)

    raw_tangency = float(np.linalg.norm(sym(x.x.T @ d)))
    d = tangent_project(x, d)
    d = d / max(1.0, spectral_norm(d))

    g_fro = float(np.linalg.norm(g_m))
    g_spec = spectral_norm(g_m)
    target = -(g_fro**2) / g_spec
    value = frob_inner(g_m, d)
    if value <= target + quality_tol * g_fro:
        return MuonDirectionResult(d, inner_iters, False, raw_tangency, value - target)
    fallback = -g_m / g_spec
    return MuonDirectionResult(fallback, inner_iters, True, raw_tangency, 0.0)


def manifold_muon_step(run: OptimizerRun, objective) -> StepInfo:
    """x ← P_M(x + α·d) with d from the tangent-constrained inner solver."""
    method = run.method
    if not isinstance(method, ManifoldMuon):
        raise ConfigurationError("manifold_muon_step requires a ManifoldMuon method")
    alpha = run.schedule.alpha(run.t)
    g = riemannian_grad(run.x, objective.euclid_grad(run.x.x))
    if float(np.linalg.norm(g)) <= zero_tolerance(*g.shape):
        run.converged = True
        run.t += 1
        return StepInfo(alpha=alpha, inner_iters=method.inner_iters, held=True)
    result = manifold_muon_direction(
        run.x, g, method.inner_iters, method.inner_lr, method.quality_tol, run.polar_mode
    )
    if result.fallback:
        run.fallback_count += 1
        _warnings.warn(
            f"inner solver missed the direction-quality contract at iteration {run.t}; "
            "using the normalized-gradient fallback",
            RuntimeWarning,
            stacklevel=2,
        )
    _move(run, alpha, result.direction)
    return StepInfo(alpha=alpha, inner_iters=method.inner_iters, fallback=result.fallback)


def _move(run: OptimizerRun, alpha: float, direction: np.ndarray) -> None:
    """Projected update plus the post-step feasibility re-check."""
    try:
        run.x = project(run.manifold, run.x.x + alpha * direction, run.polar_mode)
    except FeasibilityError as exc:
        raise FeasibilityError(f"iteration {run.t}: {exc}") from exc
    violation = run.x.feasibility()
    if violation > FEASIBILITY_ABORT_FACTOR * run.manifold.feas_tol:
        raise FeasibilityError(
            f"iteration {run.t}: feasibility violation {violation:.3e} exceeds "
            f"{FEASIBILITY_ABORT_FACTOR:g} x feas_tol"
        )
    run.t += 1


# ---------------------------------------------------------------------------
# Trace driver


def run_trace(
    run: OptimizerRun,
    objective,
    steps: int,
    subspace_fn: Callable[[np.ndarray], float] | None = None,
) -> list[TraceRecord]:
    """Step `steps` times, recording metrics at every iterate x_0 … x_T.

    Metric evaluation (objective value, subspace error, feasibility, dual
    norm of the true Riemannian gradient) happens outside the timed region;
    elapsed_s accumulates wall time of the optimizer steps only, so per-step
    costs of different methods compare cleanly.

    On a feasibility abort the raised FeasibilityError carries the records
    accumulated so far in its `records` attribute, so callers can flush a
    partial trace.
    """
    norm = method_norm(run.method)
    records: list[TraceRecord] = []
    elapsed = 0.0
    for t in range(steps):
        rec = _metric_record(run, objective, norm, subspace_fn, t, elapsed)
        rec.step_size = run.schedule.alpha(run.t)
        records.append(rec)
        tic = time.perf_counter()
        try:
            info = step(run, objective)
        except FeasibilityError as exc:
            exc.records = records
            raise
        elapsed += time.perf_counter() - tic
        rec.inner_iters = info.inner_iters
    records.append(_metric_record(run, objective, norm, subspace_fn, steps, elapsed))
    return records


def _metric_record(run, objective, norm, subspace_fn, t, elapsed) -> TraceRecord:
    x = run.x.x
    g = riemannian_grad(run.x, objective.euclid_grad(x))
    return TraceRecord(
        iter=t,
        objective=objective.value(x),
        subspace_error=subspace_fn(x) if subspace_fn is not None else float("nan"),
        orth_violation=feasibility_violation(x),
        grad_dual_norm=dual_norm(norm, g),
        step_size=0.0,
        inner_iters=0,
        elapsed_s=elapsed,
    )
