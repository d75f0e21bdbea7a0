"""Unit tests for the closed-form kinetic certificate."""

import math

import numpy as np
import pytest

from hypocert.certificates.kfp import (
    KFP_CONDITION, contraction_rate, cosine_perturbed_potential, kfp_form, kfp_window,
    quadratic_potential, rate_at, rate_profile, solve_kfp_params,
)
from hypocert.core.errors import ContractViolationError, InfeasibleCertificateError


class TestSolveKfpParams:
    """Twist coefficients from Hessian bounds."""

    def test_reference_values_without_slack(self):
        """m = 1, M = 2.25 gives a = (1 + sqrt(3)/2)/2 on the larger root."""
        p = solve_kfp_params(1.0, 2.25, slack=0.0)

        assert p.a == pytest.approx(0.5 * (1.0 + math.sqrt(0.75)), abs=1e-10)
        assert p.a == pytest.approx(0.933013, abs=1e-6)
        assert p.b == pytest.approx(2.433013, abs=1e-6)
        assert p.root == "larger"
        assert p.rho == pytest.approx(0.0, abs=1e-10)

    def test_system_equations(self):
        """a + b - 2a^2 = (m + M)/2 and b - a = sqrt(mM) on the widened bounds."""
        for m, M in [(1.0, 2.25), (0.5, 1.2), (4.0, 6.0), (1.0, 1.0)]:
            p = solve_kfp_params(m, M)
            assert p.kappa == pytest.approx(0.5 * (p.m_eff + p.M_eff), abs=1e-10)
            assert p.theta == pytest.approx(math.sqrt(p.m_eff * p.M_eff), abs=1e-10)
            assert p.a + p.b - 2 * p.a ** 2 == pytest.approx(p.kappa, abs=1e-10)
            assert p.b - p.a == pytest.approx(p.theta, abs=1e-10)

    def test_factorization_reconstructs_metric(self):
        p = solve_kfp_params(1.0, 2.25)

        assert p.alpha * p.beta + p.gamma * p.delta == pytest.approx(p.a)
        assert p.beta ** 2 + p.delta ** 2 == pytest.approx(p.b)
        assert p.b - p.a ** 2 > 0.0
        assert np.linalg.eigvalsh(p.S.matrix).min() > 0.0
        assert p.c1 == pytest.approx(math.sqrt(p.S.cond))

    def test_window_is_widened_interval(self):
        p = solve_kfp_params(1.0, 2.25)
        lo, hi = kfp_window(p)

        assert lo == pytest.approx(p.m_eff, abs=1e-10)
        assert hi == pytest.approx(p.M_eff, abs=1e-10)
        assert p.m_eff == pytest.approx(0.95)
        assert p.M_eff == pytest.approx(2.3625)

    def test_slack_gives_positive_rate(self):
        p = solve_kfp_params(1.0, 2.25, slack=0.05)

        assert p.rho > 0.0
        assert not p.slack_dropped
        assert p.provenance["root_choice"] == p.root

    def test_rate_minimum_sits_at_an_endpoint(self):
        p = solve_kfp_params(1.0, 2.25, slack=0.05)
        grid = np.linspace(p.m, p.M, 201)

        assert rate_profile(p, grid).min() >= contraction_rate(p) - 1e-12
        assert contraction_rate(p) == pytest.approx(min(rate_at(p.a, p.b, p.m), rate_at(p.a, p.b, p.M)))

    def test_form_positive_definite_inside_window(self):
        p = solve_kfp_params(1.0, 2.25, slack=0.05)
        for lam in np.linspace(p.m, p.M, 11):
            assert np.linalg.eigvalsh(kfp_form(p.a, p.b, lam)).min() > 0.0

    def test_equal_bounds(self):
        """A quadratic potential has m = M and a strictly positive rate."""
        p = solve_kfp_params(1.0, 1.0)
        assert p.rho > 0.0

    def test_boundary_is_feasible(self):
        """sqrt(M) - sqrt(m) = 1 exactly: a single root a = 1/2 and rate 0."""
        p = solve_kfp_params(1.0, 4.0, slack=0.0)

        assert p.a == pytest.approx(0.5)
        assert p.b == pytest.approx(2.5)
        assert p.rho == pytest.approx(0.0, abs=1e-10)
        assert list(p.provenance["root_rates"]) == ["larger"]

    def test_infeasible_bounds(self):
        with pytest.raises(InfeasibleCertificateError) as excinfo:
            solve_kfp_params(1.0, 4.1)

        assert excinfo.value.condition == KFP_CONDITION
        assert excinfo.value.values["gap"] > 1.0
        assert KFP_CONDITION in str(excinfo.value)

    def test_slack_dropped_near_boundary(self):
        """Bounds that fit but whose widening does not fall back to zero slack."""
        p = solve_kfp_params(1.0, 3.9, slack=0.05)

        assert p.slack_dropped
        assert p.rho == 0.0
        assert p.m_eff == 1.0
        assert p.M_eff == 3.9

    @pytest.mark.parametrize("m,M", [(0.0, 1.0), (-1.0, 1.0), (2.0, 1.0)])
    def test_invalid_bounds(self, m, M):
        with pytest.raises(ContractViolationError):
            solve_kfp_params(m, M)

    def test_invalid_slack(self):
        with pytest.raises(ContractViolationError):
            solve_kfp_params(1.0, 2.0, slack=1.0)

    def test_higher_dimension(self):
        p = solve_kfp_params(1.0, 2.0, n=3)

        assert p.S.dim == 6
        assert p.sde_metric().dim == 6
        assert np.allclose(p.S.matrix[:3, 3:], p.a * np.eye(3))

    def test_to_dict(self):
        data = solve_kfp_params(1.0, 2.0).to_dict()
        assert {"a", "b", "rho", "S", "root", "slack_dropped"} <= set(data)


class TestPotentials:
    """Potential constructors and their Hessian bounds."""

    def test_quadratic(self):
        pot = quadratic_potential(1.5, 2)

        assert pot.is_quadratic
        assert pot.hessian_bounds == (2.25, 2.25)
        assert pot.v_value(np.array([1.0, 1.0])) == pytest.approx(2.25)

    def test_cosine_perturbed_bounds_hold(self):
        pot = cosine_perturbed_potential(1.0, 0.3, 2)
        points = np.random.default_rng(0).uniform(-5, 5, (100, 2))

        assert pot.hessian_bounds == (pytest.approx(0.7), pytest.approx(1.3))
        assert pot.bound_violation(points) <= 1e-12
        assert not pot.is_quadratic

    def test_cosine_perturbation_too_large(self):
        with pytest.raises(ContractViolationError):
            cosine_perturbed_potential(1.0, 1.0)
