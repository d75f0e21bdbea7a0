"""Unit tests for the pointwise operator calculus."""

import numpy as np
import pytest

from hypocert.certificates.kfp import build_operator, kfp_jacobian, rate_at
from hypocert.core.errors import ContractViolationError
from hypocert.core.operator import (
    DiffusionOperator, MetricForm, apply_operator, bakry_emery_rate, carre_du_champ,
    dual_distance, gamma2_form, gamma_bound, induced_distance, t2_closed_form,
    t2_finite_difference, t2_form, t2_lower_matrix, t2_rate, t_form,
)
from hypocert.functions.testfn import (
    FunctionFamily, Product, RidgePolynomial, sample_ball, sample_function, standard_families,
)
from tests.utils.assertion_helpers import assert_matrix_close


class TestDiffusionOperator:
    """Construction and invariants of DiffusionOperator."""

    def test_linear_operator(self):
        """Linear drift records its matrix and evaluates J z."""
        J = np.array([[0.0, 1.0], [-2.0, -1.0]])
        op = DiffusionOperator.linear(J, np.diag([0.0, 1.0]))

        assert op.is_linear
        assert op.dim == 2
        assert_matrix_close(op.drift(np.array([1.0, 2.0])), J @ [1.0, 2.0])
        assert_matrix_close(op.drift_jacobian(np.zeros(2)), J)

    def test_linear_operator_batches(self):
        """Drift accepts a batch of points."""
        J = np.array([[-1.0, 2.0], [0.0, -1.0]])
        op = DiffusionOperator.linear(J, np.eye(2))
        points = np.arange(6.0).reshape(3, 2)

        assert_matrix_close(op.drift(points), points @ J.T)

    def test_rejects_non_square_drift(self):
        with pytest.raises(ContractViolationError):
            DiffusionOperator.linear(np.ones((2, 3)), np.eye(2))

    def test_rejects_asymmetric_diffusion(self):
        with pytest.raises(ContractViolationError, match="symmetric"):
            DiffusionOperator.linear(-np.eye(2), np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_indefinite_diffusion(self):
        with pytest.raises(ContractViolationError, match="semidefinite"):
            DiffusionOperator.linear(-np.eye(2), np.diag([1.0, -0.5]))

    def test_rejects_wrong_diffusion_shape(self):
        with pytest.raises(ContractViolationError):
            DiffusionOperator.linear(-np.eye(2), np.eye(3))

    def test_kfp_jacobian_matches_finite_differences(self, perturbed_pot):
        """The analytic Jacobian of the kinetic drift agrees with central differences."""
        op = build_operator(perturbed_pot)
        rng = np.random.default_rng(3)
        for x in sample_ball(rng, op.dim, 5.0, 25):
            assert op.jacobian_error(x) < 1e-5

    def test_quadratic_kfp_jacobian(self):
        """omega^2 |x|^2 / 2 gives [[0, I], [-omega^2 I, -I]]."""
        from hypocert.certificates.kfp import quadratic_potential
        op = build_operator(quadratic_potential(2.0, 2))
        expected = np.block([[np.zeros((2, 2)), np.eye(2)], [-4.0 * np.eye(2), -np.eye(2)]])

        assert op.is_linear
        assert_matrix_close(op.linear_matrix, expected)
        assert_matrix_close(op.drift_jacobian(np.ones(4)), expected)


class TestMetricForm:
    """Positive-definite metrics and induced distances."""

    def test_inverse_and_condition(self):
        S = MetricForm(np.array([[2.0, 0.5], [0.5, 1.0]]))

        assert_matrix_close(S.matrix @ S.inverse, np.eye(2), atol=1e-10)
        assert S.cond == pytest.approx(S.eigenvalues.max() / S.eigenvalues.min())
        assert S.dim == 2

    @pytest.mark.parametrize("matrix", [
        [[1.0, 0.0], [0.0, 0.0]],
        [[1.0, 2.0], [2.0, 1.0]],
        [[-1.0, 0.0], [0.0, 1.0]],
    ])
    def test_rejects_non_positive_definite(self, matrix):
        with pytest.raises(ContractViolationError):
            MetricForm(np.array(matrix))

    def test_identity_metric(self):
        S = MetricForm.identity(3)
        assert_matrix_close(S.matrix, np.eye(3))
        assert S.cond == pytest.approx(1.0)

    def test_whitening_reproduces_induced_distance(self):
        """Euclidean distances between whitened points are induced distances."""
        S = MetricForm(np.array([[1.0, -0.4], [-0.4, 2.0]]))
        rng = np.random.default_rng(0)
        x, y = rng.standard_normal((2, 10, 2))
        whitened = np.linalg.norm(S.whiten(x) - S.whiten(y), axis=1)

        assert_matrix_close(whitened, induced_distance(S, x, y), atol=1e-12)

    def test_distance_duality(self):
        """The supremum over linear test functions with T(f) <= 1 equals the induced distance."""
        S = MetricForm(np.array([[1.0, 0.933], [0.933, 2.433]]))
        rng = np.random.default_rng(11)
        for _ in range(5):
            x, y = rng.standard_normal((2, 2))
            primal = induced_distance(S, x, y)
            dual = dual_distance(S, x, y)
            assert dual == pytest.approx(primal, rel=1e-6)

    def test_dual_distance_of_equal_points(self):
        S = MetricForm.identity(2)
        assert dual_distance(S, np.ones(2), np.ones(2)) == 0.0


class TestPointwiseForms:
    """L, Gamma, T and T2 at a point."""

    @pytest.fixture
    def points(self):
        return sample_ball(np.random.default_rng(5), 2, 2.0, 10)

    def test_carre_du_champ_defining_identity(self, kfp_op, points):
        """Gamma(f) = (L(f^2) - 2 f Lf) / 2 equals grad f^T A grad f."""
        for seed in range(5):
            f = sample_function(FunctionFamily("polynomial"), 2, seed)
            for x in points:
                defining = 0.5 * (apply_operator(kfp_op, Product(f, f), x)
                                  - 2.0 * float(f.value(x)) * apply_operator(kfp_op, f, x))
                assert carre_du_champ(kfp_op, f, x) == pytest.approx(defining, rel=1e-9, abs=1e-9)

    def test_apply_operator_on_v_squared(self, kfp_op):
        """L v^2 = 2 + 2 v (-v - x) for V = x^2 / 2."""
        f = RidgePolynomial.from_quadratic(np.diag([0.0, 2.0]))
        x = np.array([0.7, -1.3])
        expected = 2.0 + 2.0 * x[1] * (-x[1] - x[0])

        assert apply_operator(kfp_op, f, x) == pytest.approx(expected)

    def test_t_form_is_bilinear(self):
        S = MetricForm(np.array([[2.0, 0.3], [0.3, 1.0]]))
        f = RidgePolynomial.linear([1.0, 2.0])
        g = RidgePolynomial.linear([-1.0, 0.5])
        x = np.zeros(2)

        assert t_form(S, f, g, x) == pytest.approx(np.array([1.0, 2.0]) @ S.matrix @ [-1.0, 0.5])
        assert t_form(S, f, g, x) == pytest.approx(t_form(S, g, f, x))

    def test_t2_matches_closed_form(self, perturbed_pot, points):
        """The assembled T2 reduces to tr(A H S H) - grad^T S J^T grad for every family."""
        op = build_operator(perturbed_pot)
        S = MetricForm(np.array([[1.0, -0.5], [-0.5, 2.0]]))
        for i, family in enumerate(standard_families()):
            f = sample_function(family, 2, 100 + i)
            for x in points:
                assert t2_form(op, S, f, x) == pytest.approx(t2_closed_form(op, S, f, x),
                                                             rel=1e-9, abs=1e-9)

    def test_t2_matches_finite_difference_oracle(self, perturbed_pot, points):
        """Analytic T2 agrees with the nested finite-difference oracle to 1e-4 relative."""
        op = build_operator(perturbed_pot)
        S = MetricForm(np.array([[1.0, -0.9], [-0.9, 2.4]]))
        for i, family in enumerate(standard_families()):
            f = sample_function(family, 2, 200 + i)
            for x in points:
                analytic = t2_form(op, S, f, x)
                oracle = t2_finite_difference(op, S, f, x)
                t_val = float(f.grad(x) @ S.matrix @ f.grad(x))
                assert abs(analytic - oracle) / (1.0 + abs(analytic) + t_val) < 1e-4

    def test_gamma2_is_t2_with_diffusion_metric(self, ou_op, points):
        """For elliptic operators Gamma_2 is T2 with Sigma = A."""
        A = MetricForm(ou_op.diffusion)
        f = sample_function(FunctionFamily("polynomial"), 2, 9)
        for x in points:
            assert gamma2_form(ou_op, f, x) == pytest.approx(t2_form(ou_op, A, f, x))


class TestLowerBoundMatrix:
    """B = -(J S + S J^T) / 2 and derived rates."""

    def test_negative_identity_drift(self):
        """J = -I, S = I gives B = I."""
        B = t2_lower_matrix(-np.eye(3), MetricForm.identity(3))
        assert_matrix_close(B.matrix, np.eye(3))
        assert t2_rate(-np.eye(3), MetricForm.identity(3)) == pytest.approx(1.0)

    def test_lower_bound_holds_for_quadratics(self):
        """min over random quadratic f of T2(f) - grad f^T B grad f is non-negative."""
        a, b = 0.933013, 2.433013
        op = DiffusionOperator.linear(kfp_jacobian(1.0), np.diag([0.0, 1.0]))
        S = MetricForm(np.array([[1.0, -a], [-a, b]]))
        B = t2_lower_matrix(op.linear_matrix, S)
        rng = np.random.default_rng(1)
        worst = np.inf
        for seed in range(200):
            f = sample_function(FunctionFamily("quadratic"), 2, seed)
            x = sample_ball(rng, 2, 3.0)
            worst = min(worst, t2_form(op, S, f, x) - B.quadratic(f.grad(x)))
        assert worst >= -1e-8

    def test_linear_functions_attain_the_bound(self, kfp_op, kfp_metric):
        """Equality for linear f."""
        B = t2_lower_matrix(kfp_op.linear_matrix, kfp_metric)
        f = RidgePolynomial.linear([0.3, -1.2])
        x = np.array([0.5, 0.5])
        assert t2_form(kfp_op, kfp_metric, f, x) == pytest.approx(B.quadratic(f.grad(x)))

    @pytest.mark.parametrize("lam", [0.8, 1.0, 1.5, 2.25])
    def test_rate_matches_kinetic_pencil(self, lam):
        """t2_rate in the SDE frame equals the smallest eigenvalue of the kinetic pencil."""
        a, b = 0.9, 2.4
        S = MetricForm(np.array([[1.0, -a], [-a, b]]))
        assert t2_rate(kfp_jacobian(lam), S) == pytest.approx(rate_at(a, b, lam), abs=1e-10)

    def test_gamma_bound_for_kinetic_metric(self, kfp_op, kfp_params, kfp_metric):
        """Gamma <= a T with a = 1 / (b - a^2)."""
        assert gamma_bound(kfp_op.diffusion, kfp_metric) == pytest.approx(kfp_params.gamma_bound())

    def test_bakry_emery_rate_elliptic(self, ou_op):
        op = DiffusionOperator.linear(-np.eye(2), np.eye(2))
        assert bakry_emery_rate(op, np.zeros(2)) == pytest.approx(1.0)
        assert bakry_emery_rate(ou_op, np.zeros(2)) < 1.0

    def test_bakry_emery_rejects_degenerate_diffusion(self, kfp_op):
        with pytest.raises(ContractViolationError, match="degenerate"):
            bakry_emery_rate(kfp_op, np.zeros(2))

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolationError):
            t2_lower_matrix(-np.eye(3), MetricForm.identity(2))
