"""Unit tests for the numerical Sigma search."""

import numpy as np
import pytest

from hypocert.certificates.kfp import (
    build_operator, cosine_perturbed_potential, kfp_jacobian, solve_kfp_params,
)
from hypocert.certificates.sigma import (
    InfeasibilityReport, SigmaCertificate, SigmaSearchOptions, certificate_rate, find_sigma,
    poincare_constant, sample_jacobians, sigma_rates, verify_certificate,
)
from hypocert.core.errors import ContractViolationError


@pytest.fixture
def kinetic_jacobians():
    """SDE-frame Jacobians for Hessian eigenvalues spread over [1, 2.25]."""
    return [kfp_jacobian(lam) for lam in np.linspace(1.0, 2.25, 16)]


@pytest.fixture
def random_kinetic_jacobians():
    """Fifty damped oscillators [[0, 1], [-c, -1]] with stiffness c uniform on [1, 3]."""
    stiffness = np.random.default_rng(11).uniform(1.0, 3.0, 50)
    return [np.array([[0.0, 1.0], [-c, -1.0]]) for c in stiffness]


class TestFindSigma:
    """Bisection over the rate with subgradient feasibility steps."""

    def test_expanding_drift_is_infeasible(self):
        result = find_sigma([np.eye(2)])

        assert isinstance(result, InfeasibilityReport)
        assert result.feasible is False
        assert result.best_phi >= 0.0
        assert "feasible" in result.to_dict()

    def test_kinetic_samples_are_feasible(self, kinetic_jacobians):
        result = find_sigma(kinetic_jacobians)

        assert isinstance(result, SigmaCertificate)
        assert result.feasible
        assert result.rate_a > 0.0
        assert result.normalization == pytest.approx(2.0)
        assert np.linalg.eigvalsh(result.sigma).min() > 0.0

    def test_certificate_verifies(self, kinetic_jacobians):
        cert = find_sigma(kinetic_jacobians)
        report = verify_certificate(cert, kinetic_jacobians)

        assert report.passed
        assert report.min_residual >= -1e-8

    def test_rate_close_to_closed_form(self, kinetic_jacobians):
        """The search does at least half as well as the closed-form metric at equal trace."""
        params = solve_kfp_params(1.0, 2.25, slack=0.05)
        S = params.sde_metric().matrix
        reference = sigma_rates(S, kinetic_jacobians).min() * 2.0 / np.trace(S)
        cert = find_sigma(kinetic_jacobians)

        assert reference > 0.0
        assert cert.rate_a >= 0.5 * reference

    def test_stable_ou_samples(self):
        J = np.array([[-1.0, 0.0], [0.0, -2.0]])
        cert = find_sigma([J], SigmaSearchOptions(trace_target=4.0))

        assert cert.normalization == pytest.approx(4.0)
        assert np.all(sigma_rates(cert.sigma, [J]) >= cert.rate_a - 1e-8)

    def test_trace_target_scales_rate_exactly(self, random_kinetic_jacobians):
        unit = find_sigma(random_kinetic_jacobians)
        doubled = find_sigma(random_kinetic_jacobians, SigmaSearchOptions(trace_target=4.0))

        assert doubled.rate_a == pytest.approx(2.0 * unit.rate_a, abs=1e-8)
        np.testing.assert_allclose(doubled.sigma, 2.0 * unit.sigma, atol=1e-12)
        assert doubled.normalization == pytest.approx(4.0)

    def test_more_samples_never_raise_the_rate(self, random_kinetic_jacobians):
        rates = [find_sigma(random_kinetic_jacobians[:k]).rate_a for k in (10, 25, 50)]

        assert rates[1] <= rates[0] + 1e-5
        assert rates[2] <= rates[1] + 1e-5

    def test_rejects_non_positive_trace_target(self, kinetic_jacobians):
        with pytest.raises(ContractViolationError):
            find_sigma(kinetic_jacobians, SigmaSearchOptions(trace_target=0.0))

    def test_rejects_empty_and_ragged_input(self):
        with pytest.raises(ContractViolationError):
            find_sigma([])
        with pytest.raises(ContractViolationError):
            find_sigma([np.ones((2, 3))])


class TestDerivedConstants:
    """Rates and constants implied by a certificate."""

    def test_sampled_rate_dominates_bound(self, kinetic_jacobians):
        cert = find_sigma(kinetic_jacobians)

        assert certificate_rate(cert, kinetic_jacobians) >= certificate_rate(cert) - 1e-10
        assert certificate_rate(cert) > 0.0

    def test_poincare_constant(self, kinetic_jacobians):
        cert = find_sigma(kinetic_jacobians)
        C = poincare_constant(cert, np.diag([0.0, 1.0]), kinetic_jacobians)

        assert np.isfinite(C)
        assert C > 0.0

    def test_sample_jacobians_from_operator(self):
        op = build_operator(cosine_perturbed_potential(np.sqrt(1.625), 0.625))
        points = np.random.default_rng(0).uniform(-3, 3, (10, 2))
        jacobians = sample_jacobians(op.drift_jacobian, points)

        assert len(jacobians) == 10
        for J in jacobians:
            assert 1.0 - 1e-12 <= -J[1, 0] <= 2.25 + 1e-12

    def test_verify_dimension_mismatch(self, kinetic_jacobians):
        cert = find_sigma(kinetic_jacobians)
        with pytest.raises(ContractViolationError):
            verify_certificate(cert, [-np.eye(3)])
