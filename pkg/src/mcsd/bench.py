"""Benchmark orchestration: configs, comparative runs, CSV/SVG/summary output.

A benchmark compares several methods on one weighted-PCA instance. Every
method within a repeat starts from the same Haar-random initial point
(asserted by hashing the initial matrix), each run owns an independent RNG
stream, and wall time is accounted around the step loop only, so per-method
timings are comparable. Repeats and methods can execute on parallel worker
processes (MCSD_WORKERS); results and CSV contents are independent of the
worker count, except that elapsed-time columns reflect real execution.
"""

from __future__ import annotations

import concurrent.futures
import configparser
import hashlib
import json
import os
import statistics
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FeasibilityError
from .linalg import PolarMode
from .lmo import NormKind, norm_equiv_constant
from .manifolds import StiefelManifold, StiefelPoint, random_point
from .objectives import BrockettInstance, NoiseConfig, make_brockett, smoothness_constants, subspace_error
from .optimizers import (
    ManifoldMuon,
    Mcsd,
    Method,
    OptimizerRun,
    Rgd,
    StepSchedule,
    StochasticMcsd,
    constant_schedule,
    deterministic_bound_schedule,
    periodic_decay_schedule,
    run_trace,
    stochastic_bound_schedule,
)
from .svgchart import Series, write_chart
from .trace import TraceRecord, write_trace_csv
from .verify import (
    BoundReport,
    audit_deterministic_bound,
    audit_per_step_descent,
    brute_force_lmo_check,
    check_descent_lemma,
    check_min_grad_rate,
    gap_with_headroom,
)

ENV_OUTPUT_DIR = "MCSD_OUTPUT_DIR"
ENV_WORKERS = "MCSD_WORKERS"

ORTH_VIOLATION_LIMIT = 1e-6


@dataclass(frozen=True)
class MethodSpec:
    label: str
    method: Method
    schedule: StepSchedule


@dataclass(frozen=True)
class BenchConfig:
    n: int
    p: int
    d: int
    data_seed: int
    methods: tuple[MethodSpec, ...]
    steps: int
    init_seed: int
    polar_mode: PolarMode
    output_dir: Path
    repeats: int = 3

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigurationError("steps must be nonnegative")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be at least 1")
        if not self.methods:
            raise ConfigurationError("at least one method is required")


@dataclass
class RunResult:
    label: str
    repeat: int
    init_hash: str
    records: list[TraceRecord]
    aborted: bool = False
    abort_message: str = ""

    @property
    def initial_subspace_error(self) -> float:
        return self.records[0].subspace_error

    @property
    def final_subspace_error(self) -> float:
        return self.records[-1].subspace_error

    @property
    def step_wall_s(self) -> float:
        return self.records[-1].elapsed_s


def default_pca_config(output_dir, n: int = 200) -> BenchConfig:
    """The stock comparison: RGD at its grid-searched constant step against
    the spectral method and Manifold Muon under the shared decay schedule."""
    decay = periodic_decay_schedule(0.1, 0.5, 30)
    return BenchConfig(
        n=n, p=5, d=1000, data_seed=7,
        methods=(
            MethodSpec("rgd", Rgd(), constant_schedule(0.001)),
            MethodSpec("spel", Mcsd(norm=NormKind.SPECTRAL), decay),
            MethodSpec("mm", ManifoldMuon(inner_iters=10, inner_lr=0.1), decay),
        ),
        steps=300,
        init_seed=11,
        polar_mode=PolarMode.iterative(8),
        output_dir=Path(output_dir),
        repeats=3,
    )


# ---------------------------------------------------------------------------
# Config file parsing (INI grammar; see README for the full description)


def load_config(path) -> BenchConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc

    try:
        inst = parser["instance"]
        run = parser["run"]
        n = inst.getint("n")
        p = inst.getint("p")
        d = inst.getint("d")
        data_seed = inst.getint("data_seed", 7)
        steps = run.getint("steps", 300)
        init_seed = run.getint("init_seed", 11)
        repeats = run.getint("repeats", 3)
        polar_mode = _parse_polar_mode(run.get("polar_mode", "iterative:8"))
        output_dir = Path(run.get("output_dir", "bench-out"))
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"invalid config {path}: {exc}") from exc

    methods = []
    for section in parser.sections():
        if not section.startswith("method:"):
            continue
        label = _sanitize_label(section.split(":", 1)[1])
        methods.append(_parse_method(label, parser[section]))
    if not methods:
        raise ConfigurationError(f"config {path} defines no [method:...] sections")

    env_dir = os.environ.get(ENV_OUTPUT_DIR)
    if env_dir:
        output_dir = Path(env_dir)

    return BenchConfig(
        n=n, p=p, d=d, data_seed=data_seed,
        methods=tuple(methods), steps=steps, init_seed=init_seed,
        polar_mode=polar_mode, output_dir=output_dir, repeats=repeats,
    )


def _sanitize_label(label: str) -> str:
    cleaned = "".join(ch if ch.isalnum() or ch in "_-." else "_" for ch in label.strip())
    if not cleaned:
        raise ConfigurationError("empty method label")
    return cleaned


def _parse_polar_mode(text: str) -> PolarMode:
    text = text.strip().lower()
    if text == "exact":
        return PolarMode.exact()
    if text.startswith("iterative"):
        parts = text.split(":")
        iters = int(parts[1]) if len(parts) > 1 else 8
        return PolarMode.iterative(iters)
    raise ConfigurationError(f"unknown polar_mode {text!r} (use 'exact' or 'iterative:<k>')")


def _parse_norm(text: str) -> NormKind:
    try:
        return NormKind(text.strip().lower())
    except ValueError:
        raise ConfigurationError(f"unknown norm {text!r} (use 'frobenius' or 'spectral')") from None


def _parse_schedule(text: str) -> StepSchedule:
    head, _, tail = text.strip().partition(":")
    args = [a for a in tail.split(",") if a]
    try:
        if head == "constant":
            return constant_schedule(float(args[0]))
        if head == "periodic_decay":
            return periodic_decay_schedule(float(args[0]), float(args[1]), int(args[2]))
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"invalid schedule {text!r}: {exc}") from exc
    raise ConfigurationError(
        f"unknown schedule {text!r} (config files accept 'constant:a' or 'periodic_decay:a0,factor,period')"
    )


def _parse_noise(text: str) -> NoiseConfig:
    head, _, tail = text.strip().partition(":")
    try:
        if head == "gaussian":
            return NoiseConfig.additive_gaussian(float(tail))
        if head == "minibatch":
            return NoiseConfig.minibatch(int(tail))
    except ValueError as exc:
        raise ConfigurationError(f"invalid noise {text!r}: {exc}") from exc
    raise ConfigurationError(f"unknown noise {text!r} (use 'gaussian:<sigma>' or 'minibatch:<size>')")


def _parse_method(label: str, section) -> MethodSpec:
    kind = section.get("kind", "").strip().lower()
    schedule = _parse_schedule(section.get("schedule", ""))
    if kind == "rgd":
        method: Method = Rgd()
    elif kind == "mcsd":
        method = Mcsd(norm=_parse_norm(section.get("norm", "spectral")))
    elif kind == "stochastic_mcsd":
        method = StochasticMcsd(
            norm=_parse_norm(section.get("norm", "spectral")),
            beta=section.getfloat("beta", 0.9),
            noise=_parse_noise(section.get("noise", "gaussian:0.0")),
        )
    elif kind == "manifold_muon":
        method = ManifoldMuon(
            inner_iters=section.getint("inner_iters", 10),
            inner_lr=section.getfloat("inner_lr", 0.1),
        )
    else:
        raise ConfigurationError(f"method {label!r} has unknown kind {kind!r}")
    return MethodSpec(label, method, schedule)


def worker_count() -> int:
    raw = os.environ.get(ENV_WORKERS, "1")
    try:
        count = int(raw)
    except ValueError:
        raise ConfigurationError(f"{ENV_WORKERS} must be an integer, got {raw!r}") from None
    return max(1, count)


# ---------------------------------------------------------------------------
# Run execution


def initial_points(cfg: BenchConfig, manifold: StiefelManifold) -> list[StiefelPoint]:
    """One Haar-random initial point per repeat, deterministic in init_seed."""
    points = []
    for repeat in range(cfg.repeats):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.init_seed, spawn_key=(repeat,)))
        points.append(random_point(manifold, rng))
    return points


def matrix_hash(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x).tobytes()).hexdigest()


def _run_task(cfg: BenchConfig, inst: BrockettInstance, index: int, repeat: int,
              x0: StiefelPoint, expected_hash: str) -> RunResult:
    spec = cfg.methods[index]
    got = matrix_hash(x0.x)
    if got != expected_hash:
        raise ConfigurationError(
            f"method {spec.label!r} repeat {repeat} received a different initial point "
            f"(hash {got[:12]} != {expected_hash[:12]})"
        )
    rng = np.random.default_rng(np.random.SeedSequence(cfg.init_seed, spawn_key=(repeat, index + 1)))
    run = OptimizerRun(
        method=spec.method,
        schedule=spec.schedule,
        x=x0,
        rng=rng,
        polar_mode=cfg.polar_mode,
    )
    try:
        records = run_trace(run, inst, cfg.steps, subspace_fn=lambda w: subspace_error(inst, w))
    except FeasibilityError as exc:
        return RunResult(
            label=spec.label, repeat=repeat, init_hash=got,
            records=getattr(exc, "records", []),
            aborted=True, abort_message=f"method {spec.label!r}: {exc}",
        )
    return RunResult(label=spec.label, repeat=repeat, init_hash=got, records=records)


def execute_runs(cfg: BenchConfig) -> tuple[BrockettInstance, list[RunResult]]:
    """Run every (method, repeat) pair; returns results ordered by (method, repeat)."""
    inst = make_brockett(cfg.n, cfg.p, cfg.d, cfg.data_seed)
    manifold = StiefelManifold(cfg.n, cfg.p)
    points = initial_points(cfg, manifold)
    hashes = [matrix_hash(x0.x) for x0 in points]

    tasks = [
        (cfg, inst, index, repeat, points[repeat], hashes[repeat])
        for index in range(len(cfg.methods))
        for repeat in range(cfg.repeats)
    ]
    workers = worker_count()
    if workers == 1:
        results = [_run_task(*t) for t in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, *zip(*tasks)))
    return inst, results


def _write_traces(cfg: BenchConfig, results: list[RunResult], prefix: str = "") -> None:
    for res in results:
        write_trace_csv(cfg.output_dir / f"{prefix}{res.label}_{res.repeat}.csv", res.records)


def _method_stats(cfg: BenchConfig, results: list[RunResult]) -> dict:
    by_label: dict[str, list[RunResult]] = {}
    for res in results:
        by_label.setdefault(res.label, []).append(res)
    stats = {}
    for spec in cfg.methods:
        runs = sorted(by_label[spec.label], key=lambda r: r.repeat)
        finals = [r.final_subspace_error for r in runs if not r.aborted]
        walls = [r.step_wall_s for r in runs if not r.aborted]
        stats[spec.label] = {
            "schedule": spec.schedule.describe(),
            "final_subspace_error": finals,
            "mean_final_subspace_error": statistics.fmean(finals) if finals else None,
            "median_final_subspace_error": statistics.median(finals) if finals else None,
            "step_wall_s": walls,
            "mean_step_wall_s": statistics.fmean(walls) if walls else None,
            "median_step_wall_s": statistics.median(walls) if walls else None,
            "aborted": [r.aborted for r in runs],
            "abort_messages": [r.abort_message for r in runs if r.aborted],
        }
    return stats


def run_pca_bench(cfg: BenchConfig) -> dict:
    """Full comparison: per-run CSVs, a log-scale subspace-error chart, and a
    summary keyed by method with per-repeat and aggregate figures."""
    inst, results = execute_runs(cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_traces(cfg, results)

    stats = _method_stats(cfg, results)
    initial = [r.initial_subspace_error for r in results if r.repeat == 0]
    summary = {
        "instance": {"n": cfg.n, "p": cfg.p, "d": cfg.d, "data_seed": cfg.data_seed},
        "steps": cfg.steps,
        "repeats": cfg.repeats,
        "polar_mode": cfg.polar_mode.describe(),
        "init_seed": cfg.init_seed,
        "init_hashes": [next(r.init_hash for r in results if r.repeat == repeat) for repeat in range(cfg.repeats)],
        "initial_subspace_error": initial[0] if initial else None,
        "methods": stats,
        "aborted": any(r.aborted for r in results),
    }

    series = [
        Series(
            label=res.label,
            xs=[rec.iter for rec in res.records],
            ys=[rec.subspace_error for rec in res.records],
        )
        for res in results
        if res.repeat == 0 and res.records
    ]
    if series:
        write_chart(
            cfg.output_dir / "subspace_error.svg",
            series,
            title=f"Subspace error, St({cfg.n},{cfg.p}), d={cfg.d}",
            x_label="iteration",
            y_label="subspace error",
            log_y=True,
        )

    _write_summary(cfg.output_dir, summary)
    return summary


def _write_summary(output_dir: Path, summary: dict) -> None:
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / "summary.json").write_text(json.dumps(summary, indent=2, default=str) + "\n")
    lines = [f"instance: {summary['instance']}", f"polar_mode: {summary.get('polar_mode', 'exact')}"]
    for label, st in summary.get("methods", {}).items():
        if st.get("mean_final_subspace_error") is None:
            lines.append(f"{label:>12}: ABORTED ({'; '.join(st['abort_messages'])})")
        else:
            lines.append(
                f"{label:>12}: mean final subspace error {st['mean_final_subspace_error']:.6e}, "
                f"mean step wall time {st['mean_step_wall_s']:.3f} s"
            )
    if summary.get("winner") is not None:
        lines.append(f"winner: {summary['winner']}")
    if summary.get("note"):
        lines.append(summary["note"])
    (output_dir / "summary.txt").write_text("\n".join(lines) + "\n")


def run_rgd_sweep(cfg: BenchConfig, step_sizes: list[float]) -> dict:
    """Constant-step sweep of RGD from a shared initial point.

    Emits one CSV per step size, a combined chart, and a summary flagging
    the step size with the lowest final subspace error.
    """
    if not step_sizes:
        raise ConfigurationError("step-size sweep needs at least one value")
    sweep_methods = tuple(
        MethodSpec(f"rgd_{alpha:g}", Rgd(), constant_schedule(alpha)) for alpha in step_sizes
    )
    sweep_cfg = replace(cfg, methods=sweep_methods, repeats=1)
    inst, results = execute_runs(sweep_cfg)
    sweep_cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_traces(sweep_cfg, results)

    stats = _method_stats(sweep_cfg, results)
    finals = {
        alpha: stats[f"rgd_{alpha:g}"]["final_subspace_error"][0]
        for alpha in step_sizes
        if stats[f"rgd_{alpha:g}"]["final_subspace_error"]
    }
    winner = min(finals, key=finals.get) if finals else None
    summary = {
        "instance": {"n": cfg.n, "p": cfg.p, "d": cfg.d, "data_seed": cfg.data_seed},
        "steps": cfg.steps,
        "polar_mode": cfg.polar_mode.describe(),
        "step_sizes": list(step_sizes),
        "final_subspace_error": {f"{a:g}": v for a, v in finals.items()},
        "winner": winner,
        "note": "the stock comparison pins the RGD constant step at 1e-3",
        "methods": stats,
        "aborted": any(r.aborted for r in results),
    }

    series = [
        Series(label=res.label, xs=[r.iter for r in res.records], ys=[r.subspace_error for r in res.records])
        for res in results
        if res.records
    ]
    if series:
        write_chart(
            sweep_cfg.output_dir / "rgd_sweep.svg",
            series,
            title=f"RGD constant-step sweep, St({cfg.n},{cfg.p})",
            x_label="iteration",
            y_label="subspace error",
            log_y=True,
        )
    _write_summary(sweep_cfg.output_dir, summary)
    return summary


def run_orth_violation(cfg: BenchConfig) -> dict:
    """Track the orthogonality violation of every method's iterates.

    A breach is any violation above 1e-6 (including runs aborted by the
    feasibility guard); the summary names the offending method and
    iteration.
    """
    inst, results = execute_runs(cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_traces(cfg, results, prefix="orth_")

    breaches = []
    max_violation = 0.0
    for res in results:
        for rec in res.records:
            if rec.orth_violation > max_violation:
                max_violation = rec.orth_violation
            if rec.orth_violation > ORTH_VIOLATION_LIMIT:
                breaches.append(
                    f"method {res.label!r} repeat {res.repeat} iteration {rec.iter}: "
                    f"violation {rec.orth_violation:.3e}"
                )
        if res.aborted:
            breaches.append(res.abort_message)

    series = [
        Series(label=res.label, xs=[r.iter for r in res.records], ys=[r.orth_violation for r in res.records])
        for res in results
        if res.repeat == 0 and res.records
    ]
    if series:
        write_chart(
            cfg.output_dir / "orth_violation.svg",
            series,
            title=f"Orthogonality violation, polar mode {cfg.polar_mode.describe()}",
            x_label="iteration",
            y_label="violation",
            log_y=True,
        )

    summary = {
        "instance": {"n": cfg.n, "p": cfg.p, "d": cfg.d, "data_seed": cfg.data_seed},
        "polar_mode": cfg.polar_mode.describe(),
        "max_violation": max_violation,
        "limit": ORTH_VIOLATION_LIMIT,
        "breaches": breaches,
        "methods": _method_stats(cfg, results),
    }
    _write_summary(cfg.output_dir, summary)
    return summary


# ---------------------------------------------------------------------------
# Verification driver


def run_verify(level: str = "fast") -> list[BoundReport]:
    """Run the verification battery at the requested level.

    fast: descent-lemma sampling (200 draws), a deterministic bound-step run
    audited end to end (telescoped and per-step), its min-gradient rate
    check, and a brute-force LMO net. full: adds a 1000-sample descent
    lemma and the 20-seed stochastic rate check.
    """
    if level not in ("fast", "full"):
        raise ConfigurationError(f"unknown verify level {level!r}")

    inst = make_brockett(50, 3, 200, data_seed=7)
    manifold = StiefelManifold(50, 3)
    consts = smoothness_constants(inst)
    norm_equiv = norm_equiv_constant(NormKind.SPECTRAL, 50, 3)

    reports = [
        check_descent_lemma(inst, samples=200, rng=np.random.default_rng(100)),
        brute_force_lmo_check(
            NormKind.SPECTRAL, (2, 2), net_size=2 * 10**5, rng=np.random.default_rng(101), inputs=5
        ),
        brute_force_lmo_check(
            NormKind.FROBENIUS, (3, 2), net_size=2 * 10**5, rng=np.random.default_rng(102), inputs=5
        ),
    ]

    x0 = random_point(manifold, np.random.default_rng(103))
    gap = gap_with_headroom(inst, x0.x)
    horizon = 100
    schedule = deterministic_bound_schedule(gap, consts.composed_lipschitz, norm_equiv, horizon)
    run = OptimizerRun(method=Mcsd(norm=NormKind.SPECTRAL), schedule=schedule, x=x0)
    records = run_trace(run, inst, horizon, subspace_fn=lambda w: subspace_error(inst, w))
    reports.append(audit_deterministic_bound(records, consts.composed_lipschitz, norm_equiv))
    reports.append(audit_per_step_descent(records, consts.composed_lipschitz, norm_equiv))
    reports.append(
        check_min_grad_rate([records], gap, consts.composed_lipschitz, norm_equiv, schedule)
    )

    if level == "full":
        reports.append(check_descent_lemma(inst, samples=1000, rng=np.random.default_rng(104)))
        reports.append(_stochastic_rate_report(inst, manifold, consts.composed_lipschitz, norm_equiv))

    return reports


def _stochastic_rate_report(inst, manifold, lipschitz, norm_equiv, seeds: int = 20, horizon: int = 400):
    sigma = 1.0
    noise = NoiseConfig.additive_gaussian(sigma / np.sqrt(inst.n * inst.p))
    x0 = random_point(manifold, np.random.default_rng(105))
    gap = gap_with_headroom(inst, x0.x)
    schedule = stochastic_bound_schedule(gap, lipschitz, norm_equiv, horizon)
    method = StochasticMcsd(norm=NormKind.SPECTRAL, beta=schedule.momentum_beta, noise=noise)
    traces = []
    for seed in range(seeds):
        run = OptimizerRun(
            method=method,
            schedule=schedule,
            x=x0,
            rng=np.random.default_rng(np.random.SeedSequence(106, spawn_key=(seed,))),
        )
        traces.append(run_trace(run, inst, horizon))
    return check_min_grad_rate(traces, gap, lipschitz, norm_equiv, schedule, sigma=sigma)
