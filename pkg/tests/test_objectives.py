import numpy as np
import pytest

from giantnet import (
    DimensionMismatch,
    InvalidSpec,
    LogisticObjective,
    ProblemInstance,
    ProblemSpec,
    QuadraticObjective,
    centralized_newton,
    estimate_bounds,
    generate_problem,
)
from giantnet.objectives import finite_difference_gradient, finite_difference_hessian

from conftest import rng_for


def random_objectives(seed=0):
    rng = rng_for(seed)
    a = rng.standard_normal((3, 3))
    quad = QuadraticObjective(a.T @ a + 0.5 * np.eye(3), rng.standard_normal(3), 0.7)
    feats = rng.standard_normal((15, 3))
    labels = np.where(rng.random(15) < 0.5, -1.0, 1.0)
    logi = LogisticObjective(feats, labels, ridge=0.1)
    return quad, logi


class TestQuadratic:
    def test_half_norm_squared(self):
        obj = QuadraticObjective(np.eye(2), np.zeros(2))
        assert obj.value(np.array([3.0, 4.0])) == pytest.approx(12.5)
        assert obj.value(np.zeros(2)) == 0.0

    def test_gradient_is_point_for_identity(self):
        obj = QuadraticObjective(np.eye(2), np.zeros(2))
        assert np.allclose(obj.gradient(np.array([3.0, 4.0])), [3.0, 4.0])

    def test_hessian_constant(self):
        rng = rng_for(2)
        a = np.array([[2.0, 0.3], [0.3, 1.0]])
        obj = QuadraticObjective(a, np.zeros(2))
        for _ in range(5):
            assert np.array_equal(obj.hessian(rng.standard_normal(2)), a)

    def test_dimension_mismatch(self):
        obj = QuadraticObjective(np.eye(2), np.zeros(2))
        with pytest.raises(DimensionMismatch):
            obj.value(np.ones(3))


class TestLogistic:
    def test_value_single_sample_at_origin(self):
        obj = LogisticObjective(np.array([[1.0, 0.0]]), np.array([1.0]), ridge=1.0)
        assert obj.value(np.zeros(2)) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_gradient_single_sample_at_origin(self):
        # expected value frozen from the central-difference oracle on the
        # declared loss: d/dx log(1 + exp(-y a'x)) at 0 is -y a / 2
        obj = LogisticObjective(np.array([[1.0, 0.0]]), np.array([1.0]), ridge=1.0)
        fd = finite_difference_gradient(obj.value, np.zeros(2))
        assert np.allclose(fd, [-0.5, 0.0], atol=1e-9)
        assert np.allclose(obj.gradient(np.zeros(2)), [-0.5, 0.0], atol=1e-12)

    def test_hessian_single_sample_at_origin(self):
        # frozen from the oracle: sigma'(0) a a' + ridge I = 0.25 aa' + I
        obj = LogisticObjective(np.array([[1.0, 0.0]]), np.array([1.0]), ridge=1.0)
        expected = np.array([[1.25, 0.0], [0.0, 1.0]])
        fd = finite_difference_hessian(obj.gradient, np.zeros(2))
        assert np.allclose(fd, expected, atol=1e-7)
        assert np.allclose(obj.hessian(np.zeros(2)), expected, atol=1e-12)

    def test_ridge_floors_hessian_spectrum(self):
        rng = rng_for(3)
        feats = rng.standard_normal((10, 3))
        labels = np.where(rng.random(10) < 0.5, -1.0, 1.0)
        obj = LogisticObjective(feats, labels, ridge=0.1)
        ub = 0.1 + (np.sum(feats**2, axis=1).max()) / 4.0
        for _ in range(10):
            eigs = np.linalg.eigvalsh(obj.hessian(rng.standard_normal(3)))
            assert eigs[0] >= 0.1 - 1e-12
            assert eigs[-1] <= ub + 1e-9

    def test_rejects_bad_labels_and_ridge(self):
        feats = np.ones((2, 2))
        with pytest.raises(InvalidSpec):
            LogisticObjective(feats, np.array([0.0, 1.0]), ridge=0.1)
        with pytest.raises(InvalidSpec):
            LogisticObjective(feats, np.array([1.0, -1.0]), ridge=0.0)


class TestDerivativeConsistency:
    @pytest.mark.parametrize("which", ["quadratic", "logistic"])
    def test_gradient_matches_finite_differences(self, which):
        quad, logi = random_objectives()
        obj = quad if which == "quadratic" else logi
        rng = rng_for(10)
        for _ in range(50):
            x = rng.standard_normal(3)
            fd = finite_difference_gradient(obj.value, x)
            g = obj.gradient(x)
            assert np.linalg.norm(fd - g) / np.linalg.norm(g) <= 1e-5

    @pytest.mark.parametrize("which", ["quadratic", "logistic"])
    def test_hessian_matches_finite_differences(self, which):
        quad, logi = random_objectives()
        obj = quad if which == "quadratic" else logi
        rng = rng_for(11)
        for _ in range(50):
            x = rng.standard_normal(3)
            fd = finite_difference_hessian(obj.gradient, x)
            h = obj.hessian(x)
            assert np.linalg.norm(fd - h) / np.linalg.norm(h) <= 1e-4

    def test_gradient_vanishes_at_own_minimizer(self):
        quad, logi = random_objectives()
        x_quad = np.linalg.solve(quad.a, -quad.b)
        assert np.linalg.norm(quad.gradient(x_quad)) <= 1e-8
        single = ProblemInstance((logi,), mu=0.1, lipschitz=10.0)
        x_logi = centralized_newton(single, np.zeros(3), tol=1e-12)
        assert np.linalg.norm(logi.gradient(x_logi)) <= 1e-8


class TestConvexityProperties:
    @pytest.mark.parametrize("which", ["quadratic", "logistic"])
    def test_convexity(self, which):
        quad, logi = random_objectives()
        obj = quad if which == "quadratic" else logi
        rng = rng_for(12)
        for _ in range(50):
            x, y = rng.standard_normal(3), rng.standard_normal(3)
            t = rng.uniform(0.01, 0.99)
            mix = obj.value(t * x + (1 - t) * y)
            assert mix <= t * obj.value(x) + (1 - t) * obj.value(y) + 1e-12

    def test_strong_convexity_with_declared_mu(self):
        instance = generate_problem(5, ProblemSpec(kind="quadratic", n=4, d=3, heterogeneity=0.5))
        rng = rng_for(13)
        for obj in instance.objectives:
            for _ in range(20):
                x, y = rng.standard_normal(3), rng.standard_normal(3)
                lhs = obj.value(y)
                rhs = (
                    obj.value(x)
                    + obj.gradient(x) @ (y - x)
                    + 0.5 * instance.mu * np.sum((y - x) ** 2)
                )
                assert lhs >= rhs - 1e-10


class TestEstimateBounds:
    def test_uniform_quadratics(self):
        objs = tuple(QuadraticObjective(2.0 * np.eye(2), np.zeros(2)) for _ in range(3))
        instance = ProblemInstance(objs, mu=2.0, lipschitz=2.0)
        mu_hat, l_hat = estimate_bounds(instance, [np.zeros(2), np.ones(2)])
        assert mu_hat == pytest.approx(2.0)
        assert l_hat == pytest.approx(2.0)

    def test_mixed_quadratics(self):
        objs = (
            QuadraticObjective(np.eye(2), np.zeros(2)),
            QuadraticObjective(3.0 * np.eye(2), np.zeros(2)),
        )
        instance = ProblemInstance(objs, mu=1.0, lipschitz=3.0)
        mu_hat, l_hat = estimate_bounds(instance, [np.zeros(2)])
        assert (mu_hat, l_hat) == (pytest.approx(1.0), pytest.approx(3.0))

    def test_logistic_floor(self):
        instance = generate_problem(6, ProblemSpec(kind="logistic", n=3, d=4, ridge=0.2))
        rng = rng_for(14)
        mu_hat, _ = estimate_bounds(instance, [rng.standard_normal(4) for _ in range(5)])
        assert mu_hat >= 0.2 - 1e-12

    def test_empty_samples_rejected(self):
        instance = generate_problem(6, ProblemSpec(kind="quadratic", n=2, d=2))
        with pytest.raises(InvalidSpec):
            estimate_bounds(instance, [])


class TestGenerateProblem:
    def test_deterministic_in_seed(self):
        spec = ProblemSpec(kind="quadratic", n=4, d=3, heterogeneity=0.8)
        a = generate_problem(7, spec)
        b = generate_problem(7, spec)
        for oa, ob in zip(a.objectives, b.objectives):
            assert np.array_equal(oa.a, ob.a)
            assert np.array_equal(oa.b, ob.b)
        assert np.array_equal(a.reference_solution, b.reference_solution)

    def test_logistic_deterministic(self):
        spec = ProblemSpec(kind="logistic", n=3, d=2, samples_per_agent=10)
        a = generate_problem(8, spec)
        b = generate_problem(8, spec)
        for oa, ob in zip(a.objectives, b.objectives):
            assert np.array_equal(oa.features, ob.features)
            assert np.array_equal(oa.labels, ob.labels)

    def test_zero_heterogeneity_gives_identical_agents(self):
        instance = generate_problem(9, ProblemSpec(kind="quadratic", n=5, d=3, heterogeneity=0.0))
        first = instance.objectives[0]
        for obj in instance.objectives[1:]:
            assert np.array_equal(obj.a, first.a)
            assert np.array_equal(obj.b, first.b)

    def test_reference_solves_averaged_normal_equations(self):
        instance = generate_problem(10, ProblemSpec(kind="quadratic", n=4, d=3, heterogeneity=1.0))
        x_star = instance.reference_solution
        # oracle: averaged stationarity residual computed directly
        resid = np.mean([o.a @ x_star + o.b for o in instance.objectives], axis=0)
        assert np.linalg.norm(resid) <= 1e-10
        # and agreement with an independent dense solve
        a_mean = np.mean([o.a for o in instance.objectives], axis=0)
        b_mean = np.mean([o.b for o in instance.objectives], axis=0)
        assert np.allclose(x_star, np.linalg.solve(a_mean, -b_mean), atol=1e-10)

    def test_declared_bounds_hold(self):
        instance = generate_problem(11, ProblemSpec(kind="quadratic", n=6, d=4, heterogeneity=1.0))
        for obj in instance.objectives:
            eigs = np.linalg.eigvalsh(obj.a)
            assert eigs[0] >= instance.mu - 1e-9
            assert eigs[-1] <= instance.lipschitz + 1e-9

    def test_invalid_specs(self):
        with pytest.raises(InvalidSpec):
            ProblemSpec(kind="quadratic", n=0, d=3)
        with pytest.raises(InvalidSpec):
            ProblemSpec(kind="logistic", n=2, d=2, ridge=-1.0)
        with pytest.raises(InvalidSpec):
            ProblemSpec(kind="cubic", n=2, d=2)
