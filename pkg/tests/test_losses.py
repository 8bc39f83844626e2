import math

import numpy as np
import pytest
from scipy.special import expit

from src.core.kernels import Kernel, KernelKind
from src.core.losses import (LossFamily, LossSpec, bpr, build_loss_spec, compute_loss, croloss_forward,
                             croloss_lambda_forward, softmax_ce, triplet)
from src.core.ranking import GapBatch, GapVector
from src.core.weighting import make_weighting
from src.system.errors import ConfigError, KernelError


def _batch(rng, positives=8, negatives=20, scale=1.0):
    pos = rng.uniform(-10, 10, size=positives)
    neg = rng.uniform(-10, 10, size=(positives, negatives))
    return GapBatch(neg - pos[:, None], np.ones((positives, negatives), dtype=bool), np.full(positives, scale))


class TestCroLoss:
    @pytest.mark.parametrize("kernel", ["hinge", "sigmoid", "exponential", "softplus"])
    def test_perfectly_ranked_positive_has_zero_loss(self, kernel):
        spec = build_loss_spec("croloss", 9, 1.0, kernel=kernel)
        out = croloss_forward(spec, [GapVector(np.array([-50.0, -50.0]))])
        assert abs(out.value) < 1e-5

    def test_single_tie_with_exponential(self):
        spec = build_loss_spec("croloss", 9, 1.0, kernel="exponential")
        out = croloss_forward(spec, [GapVector(np.array([0.0]))])
        np.testing.assert_allclose(out.value, math.log(2.0) / math.log(10.0), rtol=1e-14)

    def test_gradient_structure(self, rng):
        spec = build_loss_spec("croloss", 1000, 1.0, kernel="softplus")
        out = croloss_forward(spec, _batch(rng))
        np.testing.assert_allclose(out.grad_pos, -out.grad_neg.sum(axis=1), rtol=1e-14)
        assert np.all(out.grad_neg >= 0)

    def test_gradient_matches_finite_differences(self, rng):
        spec = build_loss_spec("croloss", 10_000, 1.0, kernel="softplus")
        batch = _batch(rng, positives=8, negatives=20)
        batch = GapBatch(batch.gaps / 5.0, batch.mask, batch.scales)
        out = croloss_forward(spec, batch)
        h = 1e-5
        flat = batch.gaps.ravel()
        for i in rng.choice(flat.size, size=30, replace=False):
            plus, minus = flat.copy(), flat.copy()
            plus[i] += h
            minus[i] -= h
            fp = croloss_forward(spec, GapBatch(plus.reshape(batch.gaps.shape), batch.mask, batch.scales)).value
            fm = croloss_forward(spec, GapBatch(minus.reshape(batch.gaps.shape), batch.mask, batch.scales)).value
            np.testing.assert_allclose(out.grad_neg.ravel()[i], (fp - fm) / (2 * h), rtol=1e-4, atol=1e-9)

    def test_clamped_rank_saturates_value(self):
        spec = build_loss_spec("croloss", 5, 1.0, kernel="exponential")
        out = croloss_forward(spec, [GapVector(np.array([10.0, 10.0]))])
        assert out.value == 1.0
        assert np.all(np.isfinite(out.grad_neg)) and np.all(out.grad_neg > 0)

    def test_masked_negatives_get_zero_gradient(self):
        batch = GapBatch(np.array([[0.5, 3.0, -1.0]]), np.array([[True, False, True]]), np.array([2.0]))
        out = croloss_forward(build_loss_spec("croloss", 100, 1.0, kernel="sigmoid"), batch)
        assert out.grad_neg[0, 1] == 0.0
        assert out.grad_neg_for(0).shape == (2,)

    def test_rejects_wrong_family(self):
        with pytest.raises(ConfigError):
            croloss_forward(build_loss_spec("softmax", 10, 1.0), [GapVector(np.array([0.0]))])

    def test_non_differentiable_kernel_rejected(self):
        with pytest.raises(KernelError):
            LossSpec(LossFamily.CROLOSS, make_weighting(1.0, 10), kernel=Kernel(KernelKind.UNIT_STEP))


class TestLambda:
    def test_same_kernels_reduce_to_croloss_gradient(self, rng):
        batch = _batch(rng)
        cro = build_loss_spec("croloss", 1000, 1.2, kernel="softplus")
        lam = build_loss_spec("croloss_lambda", 1000, 1.2, kernel1="softplus", kernel2="softplus")
        np.testing.assert_allclose(croloss_lambda_forward(lam, batch).grad_neg,
                                   croloss_forward(cro, batch).grad_neg, rtol=1e-14)

    def test_unit_step_lambda_with_uniform_weighting(self):
        spec = build_loss_spec("croloss_lambda", 9, 0.0, kernel1="unit_step", kernel2="softplus")
        out = croloss_lambda_forward(spec, [GapVector(np.array([1.0, -1.0]))])
        np.testing.assert_allclose(out.grad_neg[0], expit(np.array([1.0, -1.0])) / 9.0, rtol=1e-12)

    def test_value_is_lambda_times_second_rank(self):
        spec = build_loss_spec("croloss_lambda", 100, 1.0, kernel1="sigmoid", kernel2="exponential")
        g = np.array([0.0, -1.0])
        out = croloss_lambda_forward(spec, [GapVector(g)])
        r1 = 1.0 + 0.5 + expit(-1.0)
        lam = 1.0 / (r1 * math.log(101.0))
        r2 = 1.0 + 1.0 + math.exp(-1.0)
        np.testing.assert_allclose(out.value, lam * r2, rtol=1e-12)

    def test_second_kernel_must_be_differentiable(self):
        with pytest.raises(KernelError):
            build_loss_spec("croloss_lambda", 10, 1.0, kernel1="sigmoid", kernel2="unit_step")


class TestBaselines:
    def test_softmax_uniform_logits(self):
        out = softmax_ce([GapVector(np.array([0.0, 0.0]))])
        np.testing.assert_allclose(out.value, math.log(3.0), rtol=1e-15)

    def test_softmax_saturated(self):
        out = softmax_ce([GapVector(np.array([-20.0, -20.0]))])
        assert 0 < out.value < 1e-8
        assert abs(out.grad_pos[0]) < 1e-8

    def test_triplet_examples(self):
        assert triplet([GapVector(np.array([-6.0]))], 5.0).value == 0.0
        assert triplet([GapVector(np.array([0.0]))], 5.0).value == 5.0
        assert triplet([GapVector(np.array([-5.0]))], 5.0).grad_neg[0, 0] == 1.0

    def test_triplet_negative_margin(self):
        with pytest.raises(ConfigError):
            triplet([GapVector(np.array([0.0]))], -1.0)

    def test_bpr_examples(self):
        np.testing.assert_allclose(bpr([GapVector(np.array([0.0]))]).value, math.log(2.0), rtol=1e-15)
        assert bpr([GapVector(np.array([-50.0]))]).value < 1e-20

    def test_dispatch_matches_direct_calls(self, rng):
        batch = _batch(rng)
        np.testing.assert_array_equal(compute_loss(build_loss_spec("bpr", 10, 0.0), batch).grad_neg,
                                      bpr(batch).grad_neg)
        np.testing.assert_array_equal(compute_loss(build_loss_spec("triplet", 10, 0.0, margin=2.0), batch).grad_neg,
                                      triplet(batch, 2.0).grad_neg)

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            build_loss_spec("ranknet", 10, 1.0)


class TestSpecialCases:
    """Identita' con le loss classiche, sul rank non limitato e scale 1."""

    CATALOG = 1000

    def test_exponential_alpha_one_is_softmax(self, rng):
        spec = build_loss_spec("croloss", self.CATALOG, 1.0, kernel="exponential", clamp_rank=False)
        factor = math.log(self.CATALOG + 1.0)
        for _ in range(200):
            batch = _batch(rng)
            a, b = croloss_forward(spec, batch), softmax_ce(batch)
            np.testing.assert_allclose(a.value * factor, b.value, rtol=1e-10)
            np.testing.assert_allclose(a.grad_neg * factor, b.grad_neg, rtol=1e-10)
            np.testing.assert_allclose(a.grad_pos * factor, b.grad_pos, rtol=1e-10)

    def test_hinge_alpha_zero_is_triplet(self, rng):
        spec = build_loss_spec("croloss", self.CATALOG, 0.0, kernel="hinge", margin=5.0, clamp_rank=False)
        for _ in range(200):
            batch = _batch(rng)
            a, b = croloss_forward(spec, batch), triplet(batch, 5.0)
            np.testing.assert_array_equal(a.grad_neg * self.CATALOG, b.grad_neg)
            np.testing.assert_allclose(a.value * self.CATALOG, b.value, rtol=1e-10)

    def test_softplus_alpha_zero_is_bpr(self, rng):
        spec = build_loss_spec("croloss", self.CATALOG, 0.0, kernel="softplus", clamp_rank=False)
        for _ in range(200):
            batch = _batch(rng)
            a, b = croloss_forward(spec, batch), bpr(batch)
            np.testing.assert_array_max_ulp(a.grad_neg * self.CATALOG, b.grad_neg, maxulp=4)
            np.testing.assert_allclose(a.value * self.CATALOG, b.value, rtol=1e-10)


class TestMiningProperty:
    def test_direction_is_alpha_invariant(self, rng):
        flat = build_loss_spec("croloss", 10_000, 0.0, kernel="sigmoid")
        top = build_loss_spec("croloss", 10_000, 1.0, kernel="sigmoid")
        for _ in range(20):
            g = GapVector(rng.uniform(-3, 3, size=12))
            a = croloss_forward(flat, [g]).grad_neg[0]
            b = croloss_forward(top, [g]).grad_neg[0]
            np.testing.assert_allclose(a / a[0], b / b[0], rtol=1e-12)

    def test_better_ranked_positive_gets_larger_scale(self):
        spec = build_loss_spec("croloss", 10_000, 1.0, kernel="sigmoid")
        good = GapVector(np.array([-4.0, -4.0]))
        bad = GapVector(np.array([3.0, 3.0]))
        out = croloss_forward(spec, [good, bad])
        # stesso gap di riferimento: il rapporto isola w_1(R_hat)
        w_good = out.grad_neg[0, 0] / expit(-4.0) / (1 - expit(-4.0))
        w_bad = out.grad_neg[1, 0] / expit(3.0) / (1 - expit(3.0))
        assert w_good > w_bad
