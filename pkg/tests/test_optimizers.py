import math

import numpy as np
import pytest

from mcsd import (
    ConfigurationError,
    FeasibilityError,
    NoiseConfig,
    NormKind,
    PolarMode,
    StiefelManifold,
    frob_inner,
    msign_exact,
    random_point,
    riemannian_grad,
    spectral_norm,
    subspace_error,
)
from mcsd.optimizers import (
    STEP_RADIUS,
    ManifoldMuon,
    Mcsd,
    OptimizerRun,
    Rgd,
    StochasticMcsd,
    constant_schedule,
    deterministic_bound_schedule,
    make_schedule,
    manifold_muon_direction,
    manifold_muon_step,
    mcsd_step,
    method_norm,
    periodic_decay_schedule,
    rgd_step,
    run_trace,
    step,
    stochastic_bound_schedule,
    stochastic_mcsd_step,
)
from tests.conftest import haar


class ZeroObjective:
    """Constant objective: zero gradient everywhere."""

    def value(self, x):
        return 1.5

    def euclid_grad(self, x):
        return np.zeros_like(x)


class RecordingObjective:
    """Wraps an instance and logs every stochastic gradient drawn."""

    def __init__(self, inst):
        self.inst = inst
        self.drawn = []

    def value(self, x):
        return self.inst.value(x)

    def euclid_grad(self, x):
        return self.inst.euclid_grad(x)

    def stochastic_grad(self, x, rng, noise):
        g = self.inst.stochastic_grad(x, rng, noise)
        self.drawn.append(g.copy())
        return g


class TestSchedules:
    def test_periodic_decay_values(self):
        s = periodic_decay_schedule(0.1, 0.5, 30)
        assert s.alpha(0) == 0.1
        assert s.alpha(29) == 0.1
        assert s.alpha(30) == 0.05
        assert s.alpha(60) == 0.025

    def test_constant(self):
        s = constant_schedule(0.001)
        assert s.alpha(0) == s.alpha(999) == 0.001

    def test_deterministic_bound_step_value(self):
        s = deterministic_bound_schedule(gap=1.0, lipschitz=1.0, norm_equiv=1.0, horizon=50)
        assert abs(s.alpha(0) - math.sqrt(2.0 / 50.0)) < 1e-15
        assert abs(s.alpha(0) - 0.2) < 1e-15

    def test_deterministic_bound_minimum_horizon(self):
        with pytest.raises(ConfigurationError, match="minimum"):
            deterministic_bound_schedule(gap=1.0, lipschitz=1.0, norm_equiv=1.0, horizon=49)

    def test_stochastic_bound_beta(self):
        s = stochastic_bound_schedule(gap=0.01, lipschitz=1.0, norm_equiv=1.0, horizon=4)
        assert abs(s.momentum_beta - 0.5) < 1e-15
        expected = math.sqrt(2 * 0.01 / (1.0 * 4 * (8 * 2 - 7)))
        assert abs(s.alpha(0) - expected) < 1e-15

    def test_stochastic_bound_minimum_horizon(self):
        with pytest.raises(ConfigurationError):
            stochastic_bound_schedule(gap=0.01, lipschitz=1.0, norm_equiv=1.0, horizon=3)

    def test_bound_schedules_respect_radius_cap(self):
        for horizon in (50, 100, 1000):
            s = deterministic_bound_schedule(gap=1.0, lipschitz=1.0, norm_equiv=1.0, horizon=horizon)
            assert 0.0 < s.alpha(0) <= STEP_RADIUS + 1e-15
        s = stochastic_bound_schedule(gap=1.0, lipschitz=1.0, norm_equiv=1.0, horizon=100)
        assert 0.0 < s.alpha(0) <= STEP_RADIUS + 1e-15

    def test_make_schedule_dispatch(self):
        assert make_schedule("constant", alpha=0.1).alpha(5) == 0.1
        with pytest.raises(ConfigurationError):
            make_schedule("nope")

    def test_positive_params_required(self):
        with pytest.raises(ConfigurationError):
            constant_schedule(-1.0)
        with pytest.raises(ConfigurationError):
            periodic_decay_schedule(0.1, 0.5, 0)


class TestMcsdStep:
    def test_zero_gradient_holds(self):
        x0 = haar(6, 2, seed=0)
        run = OptimizerRun(method=Mcsd(NormKind.SPECTRAL), schedule=constant_schedule(0.1), x=x0)
        info = mcsd_step(run, ZeroObjective())
        assert info.held and run.converged
        assert np.array_equal(run.x.x, x0.x)
        assert run.t == 1

    def test_spectral_step_closed_form(self, small_instance):
        # one spectral step must equal msign(x - alpha * msign(grad))
        x0 = haar(50, 3, seed=1)
        alpha = 0.05
        run = OptimizerRun(method=Mcsd(NormKind.SPECTRAL), schedule=constant_schedule(alpha), x=x0)
        mcsd_step(run, small_instance)
        g = riemannian_grad(x0, small_instance.euclid_grad(x0.x))
        expected = msign_exact(x0.x - alpha * msign_exact(g))
        assert np.array_equal(run.x.x, expected)

    def test_sphere_spectral_equals_frobenius_one_step(self, rng):
        from mcsd import make_brockett

        inst = make_brockett(30, 1, 90, data_seed=3)
        x0 = haar(30, 1, seed=2)
        runs = [
            OptimizerRun(method=Mcsd(norm), schedule=constant_schedule(0.01), x=x0)
            for norm in (NormKind.SPECTRAL, NormKind.FROBENIUS)
        ]
        for run in runs:
            mcsd_step(run, inst)
        assert np.abs(runs[0].x.x - runs[1].x.x).max() < 1e-12

    def test_method_type_enforced(self):
        run = OptimizerRun(method=Rgd(), schedule=constant_schedule(0.1), x=haar(5, 2, seed=3))
        with pytest.raises(ConfigurationError):
            mcsd_step(run, ZeroObjective())


class TestRgdStep:
    def test_trajectory_identical_to_frobenius_mcsd(self, small_instance):
        x0 = haar(50, 3, seed=4)
        sched = constant_schedule(0.02)
        r_rgd = OptimizerRun(method=Rgd(), schedule=sched, x=x0)
        r_fro = OptimizerRun(method=Mcsd(NormKind.FROBENIUS), schedule=sched, x=x0)
        for _ in range(100):
            rgd_step(r_rgd, small_instance)
            mcsd_step(r_fro, small_instance)
            assert np.abs(r_rgd.x.x - r_fro.x.x).max() <= 1e-12

    def test_zero_gradient_holds(self):
        run = OptimizerRun(method=Rgd(), schedule=constant_schedule(0.1), x=haar(6, 2, seed=5))
        info = rgd_step(run, ZeroObjective())
        assert info.held and run.converged

    def test_small_constant_step_decreases_subspace_error(self, pca_instance):
        x0 = random_point(StiefelManifold(200, 5), np.random.default_rng(11))
        run = OptimizerRun(method=Rgd(), schedule=constant_schedule(0.001), x=x0)
        recs = run_trace(run, pca_instance, 50, subspace_fn=lambda w: subspace_error(pca_instance, w))
        errs = [r.subspace_error for r in recs]
        assert all(b <= a for a, b in zip(errs, errs[1:]))


class TestStochasticMcsdStep:
    def test_noiseless_memoryless_matches_deterministic(self, small_instance):
        x0 = haar(50, 3, seed=6)
        sched = constant_schedule(0.05)
        noise = NoiseConfig.additive_gaussian(0.0)
        r_sto = OptimizerRun(
            method=StochasticMcsd(NormKind.SPECTRAL, beta=0.0, noise=noise),
            schedule=sched, x=x0, rng=np.random.default_rng(0),
        )
        r_det = OptimizerRun(method=Mcsd(NormKind.SPECTRAL), schedule=sched, x=x0)
        for _ in range(50):
            stochastic_mcsd_step(r_sto, small_instance)
            mcsd_step(r_det, small_instance)
            assert np.abs(r_sto.x.x - r_det.x.x).max() <= 1e-12

    def test_beta_zero_momentum_equals_gradient(self, small_instance):
        inst = RecordingObjective(small_instance)
        run = OptimizerRun(
            method=StochasticMcsd(NormKind.SPECTRAL, beta=0.0, noise=NoiseConfig.additive_gaussian(0.1)),
            schedule=constant_schedule(0.01), x=haar(50, 3, seed=7), rng=np.random.default_rng(1),
        )
        for _ in range(10):
            stochastic_mcsd_step(run, inst)
            assert np.array_equal(run.momentum, inst.drawn[-1])

    def test_momentum_matches_unrolled_sum(self, small_instance):
        # m_t must equal (1-b) * sum b^(t-i) g_i + b^t g_0 from the logged draws
        beta = 0.7
        inst = RecordingObjective(small_instance)
        run = OptimizerRun(
            method=StochasticMcsd(NormKind.SPECTRAL, beta=beta, noise=NoiseConfig.additive_gaussian(0.5)),
            schedule=constant_schedule(0.01), x=haar(50, 3, seed=8), rng=np.random.default_rng(2),
        )
        for t in range(21):
            stochastic_mcsd_step(run, inst)
            g = inst.drawn
            expected = (beta**t) * g[0]
            for i in range(1, t + 1):
                expected = expected + (1 - beta) * beta ** (t - i) * g[i]
            assert np.abs(run.momentum - expected).max() < 1e-10

    def test_momentum_absent_until_first_step(self, small_instance):
        run = OptimizerRun(
            method=StochasticMcsd(NormKind.SPECTRAL, beta=0.9, noise=NoiseConfig.additive_gaussian(0.0)),
            schedule=constant_schedule(0.01), x=haar(50, 3, seed=9), rng=np.random.default_rng(3),
        )
        assert run.momentum is None
        stochastic_mcsd_step(run, small_instance)
        assert run.momentum is not None

    def test_requires_rng(self, small_instance):
        run = OptimizerRun(
            method=StochasticMcsd(NormKind.SPECTRAL, beta=0.9, noise=NoiseConfig.additive_gaussian(0.0)),
            schedule=constant_schedule(0.01), x=haar(50, 3, seed=10),
        )
        with pytest.raises(ConfigurationError):
            stochastic_mcsd_step(run, small_instance)

    def test_beta_validated(self):
        with pytest.raises(ConfigurationError):
            StochasticMcsd(NormKind.SPECTRAL, beta=1.0, noise=NoiseConfig.additive_gaussian(0.0))

    def test_zero_projected_momentum_holds_position(self):
        class ZeroStochastic(ZeroObjective):
            def stochastic_grad(self, x, rng, noise):
                return np.zeros_like(x)

        x0 = haar(6, 2, seed=23)
        run = OptimizerRun(
            method=StochasticMcsd(NormKind.SPECTRAL, beta=0.5, noise=NoiseConfig.additive_gaussian(0.0)),
            schedule=constant_schedule(0.1), x=x0, rng=np.random.default_rng(0),
        )
        info = stochastic_mcsd_step(run, ZeroStochastic())
        assert info.held
        assert np.array_equal(run.x.x, x0.x)
        assert run.momentum is not None and run.t == 1


class TestManifoldMuonDirection:
    def test_square_orthogonal_tangent_after_one_iteration(self):
        # on the square orthogonal manifold the first inner iterate is
        # already tangent (msign of a skew matrix is skew)
        rng = np.random.default_rng(4)
        x = haar(4, 4, seed=11)
        a = rng.standard_normal((4, 4))
        skew = a - a.T
        g = x.x @ skew  # tangent at a square orthogonal point
        res = manifold_muon_direction(x, g, inner_iters=1, inner_lr=0.1)
        assert res.raw_tangency <= 1e-8
        z = res.direction
        assert np.linalg.norm(x.x.T @ z + z.T @ x.x) <= 1e-8

    def test_sphere_direction_is_normalized_gradient(self, rng):
        x = haar(12, 1, seed=12)
        g = rng.standard_normal((12, 1))
        g = g - x.x * float((x.x.T @ g)[0, 0])  # tangent
        res = manifold_muon_direction(x, g, inner_iters=10, inner_lr=0.1)
        expected = -g / np.linalg.norm(g)
        assert np.linalg.norm(res.direction - expected) < 1e-12
        assert not res.fallback

    def test_dominates_normalized_gradient(self, pca_instance, rng):
        m = StiefelManifold(200, 5)
        for _ in range(10):
            x = random_point(m, rng)
            g = riemannian_grad(x, pca_instance.euclid_grad(x.x))
            res = manifold_muon_direction(x, g, inner_iters=10, inner_lr=0.1)
            g_fro = np.linalg.norm(g)
            target = -(g_fro**2) / spectral_norm(g)
            assert frob_inner(g, res.direction) <= target + 1e-3 * g_fro
            assert not res.fallback

    def test_feasible_after_hard_projection(self, small_instance, rng):
        m = StiefelManifold(50, 3)
        x = random_point(m, rng)
        g = riemannian_grad(x, small_instance.euclid_grad(x.x))
        res = manifold_muon_direction(x, g, inner_iters=10, inner_lr=0.1)
        d = res.direction
        assert np.linalg.norm(x.x.T @ d + d.T @ x.x) <= 1e-8
        assert spectral_norm(d) <= 1.0 + 1e-8

    def test_fallback_engages_on_broken_inner_solve(self, small_instance, rng):
        # an absurd inner step size wrecks the multiplier; the guard must
        # substitute the always-feasible normalized gradient
        m = StiefelManifold(50, 3)
        x = random_point(m, rng)
        g = riemannian_grad(x, small_instance.euclid_grad(x.x))
        res = manifold_muon_direction(x, g, inner_iters=3, inner_lr=1e9)
        assert res.fallback
        assert np.allclose(res.direction, -g / spectral_norm(g))


class TestManifoldMuonStep:
    def test_zero_gradient_holds(self):
        run = OptimizerRun(method=ManifoldMuon(), schedule=constant_schedule(0.1), x=haar(6, 2, seed=13))
        info = manifold_muon_step(run, ZeroObjective())
        assert info.held and run.converged

    def test_value_non_increasing_first_20_steps(self, pca_instance):
        x0 = random_point(StiefelManifold(200, 5), np.random.default_rng(11))
        run = OptimizerRun(
            method=ManifoldMuon(), schedule=periodic_decay_schedule(0.1, 0.5, 30), x=x0
        )
        recs = run_trace(run, pca_instance, 20)
        objs = [r.objective for r in recs]
        assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))
        assert run.fallback_count == 0

    def test_inner_iters_in_step_info(self, small_instance):
        run = OptimizerRun(
            method=ManifoldMuon(inner_iters=7), schedule=constant_schedule(0.05), x=haar(50, 3, seed=14)
        )
        info = manifold_muon_step(run, small_instance)
        assert info.inner_iters == 7

    def test_hyperparameters_validated(self):
        with pytest.raises(ConfigurationError):
            ManifoldMuon(inner_iters=0)
        with pytest.raises(ConfigurationError):
            ManifoldMuon(inner_lr=-0.1)


class TestDispatchAndState:
    def test_step_dispatch(self, small_instance):
        for method in (Mcsd(NormKind.SPECTRAL), Rgd(), ManifoldMuon()):
            run = OptimizerRun(method=method, schedule=constant_schedule(0.01), x=haar(50, 3, seed=15))
            info = step(run, small_instance)
            assert run.t == 1 and info.alpha == 0.01

    def test_method_norms(self):
        assert method_norm(Rgd()) is NormKind.FROBENIUS
        assert method_norm(ManifoldMuon()) is NormKind.SPECTRAL
        assert method_norm(Mcsd(NormKind.FROBENIUS)) is NormKind.FROBENIUS

    def test_feasibility_guard_aborts_underresolved_projection(self, small_instance):
        # one polar iteration cannot reach the manifold tolerance
        run = OptimizerRun(
            method=Mcsd(NormKind.SPECTRAL),
            schedule=constant_schedule(0.1),
            x=haar(50, 3, seed=16),
            polar_mode=PolarMode.iterative(1),
        )
        with pytest.raises(FeasibilityError, match="iteration 0"):
            mcsd_step(run, small_instance)


class TestRunTrace:
    def test_record_count_and_monotonicity(self, small_instance):
        run = OptimizerRun(method=Mcsd(NormKind.SPECTRAL), schedule=constant_schedule(0.05), x=haar(50, 3, seed=17))
        recs = run_trace(run, small_instance, 25, subspace_fn=lambda w: subspace_error(small_instance, w))
        assert len(recs) == 26
        assert [r.iter for r in recs] == list(range(26))
        assert all(b.elapsed_s >= a.elapsed_s for a, b in zip(recs, recs[1:]))
        assert recs[-1].step_size == 0.0

    def test_zero_steps_single_record(self, small_instance):
        run = OptimizerRun(method=Rgd(), schedule=constant_schedule(0.05), x=haar(50, 3, seed=18))
        recs = run_trace(run, small_instance, 0)
        assert len(recs) == 1 and recs[0].iter == 0

    def test_step_sizes_follow_schedule(self, small_instance):
        run = OptimizerRun(
            method=Mcsd(NormKind.SPECTRAL), schedule=periodic_decay_schedule(0.1, 0.5, 2), x=haar(50, 3, seed=19)
        )
        recs = run_trace(run, small_instance, 5)
        assert [r.step_size for r in recs[:5]] == [0.1, 0.1, 0.05, 0.05, 0.025]

    def test_deterministic_trace_modulo_timing(self, small_instance):
        def one():
            run = OptimizerRun(
                method=StochasticMcsd(NormKind.SPECTRAL, 0.9, NoiseConfig.additive_gaussian(0.1)),
                schedule=constant_schedule(0.05),
                x=haar(50, 3, seed=20),
                rng=np.random.default_rng(77),
            )
            return run_trace(run, small_instance, 30)

        a, b = one(), one()
        for ra, rb in zip(a, b):
            assert ra.objective == rb.objective
            assert ra.grad_dual_norm == rb.grad_dual_norm
            assert ra.orth_violation == rb.orth_violation

    def test_partial_records_attached_on_abort(self, small_instance):
        run = OptimizerRun(
            method=Mcsd(NormKind.SPECTRAL),
            schedule=constant_schedule(0.1),
            x=haar(50, 3, seed=21),
            polar_mode=PolarMode.iterative(1),
        )
        with pytest.raises(FeasibilityError) as excinfo:
            run_trace(run, small_instance, 10)
        assert len(excinfo.value.records) == 1

    def test_feasibility_of_all_iterates(self, small_instance):
        run = OptimizerRun(
            method=Mcsd(NormKind.SPECTRAL),
            schedule=periodic_decay_schedule(0.1, 0.5, 30),
            x=haar(50, 3, seed=22),
            polar_mode=PolarMode.iterative(8),
        )
        recs = run_trace(run, small_instance, 100)
        assert max(r.orth_violation for r in recs) <= 1e-6
