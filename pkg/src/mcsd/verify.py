"""Run-time verification of the optimizer's descent and convergence bounds.

Each checker reduces to a single inequality lhs ≤ rhs + slack packaged as a
BoundReport: the per-step descent inequality sampled over random points and
directions, the telescoped trace audit, the min-gradient rate bounds under
the matching step schedules, and a brute-force net cross-validation of the
LMO. Checkers are read-only consumers of traces and are reproducible from
their (seed, config) inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .linalg import frob_inner, msign_exact, spectral_norm
from .lmo import NormKind, lmo
from .manifolds import StiefelManifold, random_point, riemannian_grad
from .objectives import BrockettInstance, smoothness_constants
from .optimizers import STEP_RADIUS, StepSchedule
from .trace import TraceRecord


@dataclass
class BoundReport:
    """One verified inequality: passed ⇔ lhs ≤ rhs + slack."""

    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    constants: dict[str, float] = field(default_factory=dict)
    detail: str = ""
    witness: tuple | None = None

    def machine_line(self) -> str:
        return f"{self.name},{self.lhs:.17g},{self.rhs:.17g},{self.slack:.17g},{str(self.passed).lower()}"

    def human_lines(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        consts = ", ".join(f"{k}={v:.6g}" for k, v in self.constants.items())
        lines = [
            f"[{status}] {self.name}: lhs={self.lhs:.6e} <= rhs={self.rhs:.6e} + slack={self.slack:.3e}"
        ]
        if consts:
            lines.append(f"       constants: {consts}")
        if self.detail:
            lines.append(f"       {self.detail}")
        return "\n".join(lines)


def gap_with_headroom(inst: BrockettInstance, x0: np.ndarray) -> float:
    """Objective gap f(x0) − f(w*) with 10% headroom.

    The Brockett infimum is known exactly from the eigendecomposition, so
    any inflation keeps the gap a valid upper bound.
    """
    return 1.1 * (inst.value(x0) - inst.optimum_value())


def check_descent_lemma(
    inst: BrockettInstance,
    samples: int,
    radius: float = STEP_RADIUS,
    rng: np.random.Generator | None = None,
    slack: float = 1e-8,
) -> BoundReport:
    """Sample the per-step descent inequality of the projected update.

    Draws Haar-random x and directions d with ‖d‖₂ uniform in (0, radius]
    (Gaussian direction rescaled to a uniform spectral radius) and checks
    f(P_M(x+d)) ≤ f(x) + ⟨∇_M f(x), d⟩ + (L/2)‖d‖_F² with the certified
    composed-smoothness constant L. Reports the worst margin; a violation
    beyond `slack` fails the report and carries the witness (x, d).
    """
    if radius > STEP_RADIUS:
        raise ConfigurationError(f"radius must not exceed {STEP_RADIUS}")
    if samples < 1:
        raise ConfigurationError("samples must be at least 1")
    if rng is None:
        rng = np.random.default_rng(0)
    manifold = StiefelManifold(inst.n, inst.p)
    lip = smoothness_constants(inst).composed_lipschitz

    worst = None
    worst_margin = -math.inf
    for k in range(samples):
        x = random_point(manifold, rng)
        g = rng.standard_normal((inst.n, inst.p))
        rho = radius * (1.0 - rng.uniform(0.0, 1.0))  # uniform in (0, radius]
        d = g * (rho / spectral_norm(g))
        lhs = inst.value(msign_exact(x.x + d))
        rhs = inst.value(x.x) + frob_inner(riemannian_grad(x, inst.euclid_grad(x.x)), d) + (
            0.5 * lip * float(np.sum(d * d))
        )
        margin = lhs - rhs
        if margin > worst_margin:
            worst_margin = margin
            worst = (x.x, d, lhs, rhs, k)

    x_w, d_w, lhs_w, rhs_w, idx = worst
    passed = worst_margin <= slack
    return BoundReport(
        name="descent_lemma",
        lhs=lhs_w,
        rhs=rhs_w,
        slack=slack,
        passed=passed,
        constants={"L": lip, "r": radius},
        detail=f"worst margin {worst_margin:.3e} over {samples} samples (sample {idx})",
        witness=None if passed else (x_w, d_w),
    )


def audit_deterministic_bound(
    records: list[TraceRecord],
    lipschitz: float,
    norm_equiv: float,
    slack_per_step: float = 1e-6,
) -> BoundReport:
    """Telescoped audit of a deterministic MCSD trace.

    Recomputes Σ α_t·‖∇_M f(x_t)‖_* ≤ f(x_0) − f(x_T) + (LN²/2)·Σ α_t² from
    the trace rows, with slack 1e-6·T for floating-point accumulation.
    """
    _require_dual_norms(records)
    horizon = len(records) - 1
    steps = records[:horizon]
    lhs = sum(r.step_size * r.grad_dual_norm for r in steps)
    sq = sum(r.step_size**2 for r in steps)
    rhs = records[0].objective - records[horizon].objective + 0.5 * lipschitz * norm_equiv**2 * sq
    slack = slack_per_step * horizon
    return BoundReport(
        name="telescoped_descent",
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        passed=lhs <= rhs + slack,
        constants={"L": lipschitz, "N": norm_equiv, "T": float(horizon)},
    )


def audit_per_step_descent(
    records: list[TraceRecord],
    lipschitz: float,
    norm_equiv: float,
    slack: float = 1e-8,
) -> BoundReport:
    """Worst single-step check of f(x_{t+1}) ≤ f(x_t) − α_t‖∇_M f‖_* + (L/2)α_t²N²."""
    _require_dual_norms(records)
    worst_margin = -math.inf
    worst_t = 0
    lhs_w = rhs_w = 0.0
    for t in range(len(records) - 1):
        r = records[t]
        lhs = records[t + 1].objective
        rhs = r.objective - r.step_size * r.grad_dual_norm + 0.5 * lipschitz * r.step_size**2 * norm_equiv**2
        if lhs - rhs > worst_margin:
            worst_margin = lhs - rhs
            worst_t, lhs_w, rhs_w = t, lhs, rhs
    return BoundReport(
        name="per_step_descent",
        lhs=lhs_w,
        rhs=rhs_w,
        slack=slack,
        passed=worst_margin <= slack,
        constants={"L": lipschitz, "N": norm_equiv},
        detail=f"worst step t={worst_t}, margin {worst_margin:.3e}",
    )


def check_min_grad_rate(
    traces: list[list[TraceRecord]],
    gap: float,
    lipschitz: float,
    norm_equiv: float,
    schedule: StepSchedule,
    sigma: float = 0.0,
) -> BoundReport:
    """Rate check on the smallest recorded gradient dual norm.

    Deterministic schedule: min_t ‖∇_M f(x_t)‖_* ≤ sqrt(2ΔLN²/T) + 1e-6 on a
    single trace. Stochastic schedule: the seed-mean of per-seed minima must
    stay below 4N(√(LΔ)+σ)·T^(−1/4) plus a 3-standard-error Monte-Carlo
    slack, over at least 20 seeds (the guarantee bounds an expectation).
    """
    if schedule.kind not in ("deterministic_bound", "stochastic_bound"):
        raise ConfigurationError(f"rate check requires a bound-matching schedule, got {schedule.kind!r}")
    horizon = schedule.horizon
    for tr in traces:
        _require_dual_norms(tr)
        if len(tr) - 1 != horizon:
            raise ConfigurationError(
                f"trace length {len(tr) - 1} does not match the schedule horizon {horizon}"
            )

    if schedule.kind == "deterministic_bound":
        if len(traces) != 1:
            raise ConfigurationError("deterministic rate check takes exactly one trace")
        lhs = min(r.grad_dual_norm for r in traces[0][:horizon])
        rhs = math.sqrt(2.0 * gap * lipschitz * norm_equiv**2 / horizon)
        slack = 1e-6
        name = "min_grad_rate_deterministic"
        detail = ""
    else:
        if len(traces) < 20:
            raise ConfigurationError(f"stochastic rate check needs >= 20 seeds, got {len(traces)}")
        minima = np.array([min(r.grad_dual_norm for r in tr[:horizon]) for tr in traces])
        lhs = float(minima.mean())
        rhs = 4.0 * norm_equiv * (math.sqrt(lipschitz * gap) + sigma) * horizon**-0.25
        slack = 3.0 * float(minima.std(ddof=1)) / math.sqrt(len(minima))
        name = "min_grad_rate_stochastic"
        detail = f"{len(traces)} seeds, per-seed minima in [{minima.min():.4g}, {minima.max():.4g}]"

    return BoundReport(
        name=name,
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        passed=lhs <= rhs + slack,
        constants={"gap": gap, "L": lipschitz, "N": norm_equiv, "T": float(horizon), "sigma": sigma},
        detail=detail,
    )


def brute_force_lmo_check(
    norm: NormKind,
    dims: tuple[int, int],
    net_size: int,
    rng: np.random.Generator,
    inputs: int = 20,
    tol_factor: float = 1e-2,
) -> BoundReport:
    """Cross-validate the LMO value against a random net of the unit ball.

    For each random input s, samples `net_size` unit-norm directions and
    asserts ⟨s, lmo(s)⟩ ≤ net minimum + tol_factor·‖s‖_F. The net minimum is
    an upper bound on the true optimum, so this certifies the oracle is at
    least as good as brute force.
    """
    if dims[0] > 3 or dims[1] > 3:
        raise ConfigurationError("net oracle is only tractable for dims up to 3x3")
    if net_size < 10**5:
        raise ConfigurationError("net_size must be at least 1e5 for meaningful resolution")

    worst_gap = -math.inf
    worst = (0.0, 0.0, 0.0, 0)
    for k in range(inputs):
        s = rng.standard_normal(dims)
        s_fro = float(np.linalg.norm(s))
        direction = lmo(norm, s)
        oracle_value = frob_inner(s, direction)
        net_min = _net_minimum(norm, s, net_size, rng)
        tol = tol_factor * s_fro
        gap = oracle_value - net_min
        if gap > worst_gap:
            worst_gap = gap
            worst = (oracle_value, net_min, tol, k)

    lhs, rhs, slack, idx = worst
    return BoundReport(
        name=f"lmo_net_{norm.value}",
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        passed=lhs <= rhs + slack,
        constants={"net_size": float(net_size), "inputs": float(inputs)},
        detail=f"worst input {idx}: oracle {lhs:.6g} vs net {rhs:.6g}",
    )


def _net_minimum(norm: NormKind, s: np.ndarray, net_size: int, rng: np.random.Generator) -> float:
    best = math.inf
    chunk = 200_000
    remaining = net_size
    while remaining > 0:
        size = min(chunk, remaining)
        remaining -= size
        g = rng.standard_normal((size,) + s.shape)
        if norm is NormKind.FROBENIUS:
            scale = np.sqrt(np.sum(g * g, axis=(1, 2)))
        elif s.shape == (2, 2):
            scale = _spectral_norms_2x2(g)
        else:
            scale = np.linalg.svd(g, compute_uv=False)[:, 0]
        d = g / scale[:, None, None]
        vals = np.tensordot(d, s, axes=([1, 2], [0, 1]))
        best = min(best, float(vals.min()))
    return best


def _spectral_norms_2x2(g: np.ndarray) -> np.ndarray:
    """Closed-form largest singular value of stacked 2x2 matrices."""
    a, b = g[:, 0, 0], g[:, 0, 1]
    c, d = g[:, 1, 0], g[:, 1, 1]
    q1 = np.sqrt((a + d) ** 2 + (b - c) ** 2)
    q2 = np.sqrt((a - d) ** 2 + (b + c) ** 2)
    return 0.5 * (q1 + q2)


def _require_dual_norms(records: list[TraceRecord]) -> None:
    if not records:
        raise ConfigurationError("empty trace")
    if any(not math.isfinite(r.grad_dual_norm) for r in records):
        raise ConfigurationError("trace is missing gradient dual-norm values")
