import numpy as np
import pytest

from src.core.kernels import KernelKind, deriv
from src.evaluation.gradcheck import (GRAD_TOLERANCE, check_identities, check_kernels, check_recall_forms,
                                      finite_diff_check, run_battery)
from src.system.errors import EvaluationError


def _quadratic(rng, n=6):
    a = rng.normal(size=(n, n))
    a = a @ a.T
    return (lambda x: 0.5 * x @ a @ x), a


class TestFiniteDifferences:
    def test_quadratic_gradient(self, rng):
        f, a = _quadratic(rng)
        x = rng.normal(size=6)
        assert finite_diff_check(f, x, a @ x).max_rel_error < 1e-8

    def test_corrupted_coordinate_is_reported(self, rng):
        f, a = _quadratic(rng)
        x = rng.normal(size=6)
        grad = a @ x
        grad[4] += 0.5
        result = finite_diff_check(f, x, grad)
        assert result.index == 4
        assert result.max_rel_error > GRAD_TOLERANCE

    def test_subset_of_coordinates(self, rng):
        f, a = _quadratic(rng)
        x = rng.normal(size=6)
        grad = a @ x
        grad[0] = 100.0
        assert finite_diff_check(f, x, grad, coords=np.array([1, 2])).max_rel_error < 1e-8

    def test_invalid_step(self, rng):
        f, a = _quadratic(rng)
        with pytest.raises(EvaluationError):
            finite_diff_check(f, np.zeros(6), np.zeros(6), h=0.0)

    def test_non_finite_function(self):
        with pytest.raises(EvaluationError):
            finite_diff_check(lambda x: np.log(x[0]), np.array([-1.0]), np.array([1.0]))


class TestBattery:
    def test_kernel_checks_pass(self, rng):
        assert all(r.passed for r in check_kernels(rng, points=50))

    def test_corrupted_derivative_is_detected(self, rng):
        def wrong(kernel, x):
            value = deriv(kernel, x)
            return value * 1.01 if kernel.kind is KernelKind.SIGMOID else value

        results = {r.name: r for r in check_kernels(rng, points=50, deriv_fn=wrong)}
        assert not results["kernel:sigmoid"].passed
        assert results["kernel:softplus"].passed

    def test_identities_hold(self, rng):
        failed = [r.name for r in check_identities(rng, instances=20) if not r.passed]
        assert failed == []

    def test_recall_forms(self, rng):
        assert check_recall_forms(rng, matrices=5)[0].passed

    def test_quick_battery_passes(self):
        failed = [(r.name, r.error) for r in run_battery(quick=True) if not r.passed]
        assert failed == []
