import numpy as np
import pytest

from src.core.kernels import Kernel, KernelKind
from src.core.ranking import (GapBatch, GapVector, UNIT_STEP, as_gap_batch, batch_rank_smooth,
                              batch_rank_smooth_grad, rank_exact, rank_smooth, rank_smooth_grad)
from src.system.errors import KernelError, RankingError, ShapeMismatchError

SIGMOID = Kernel(KernelKind.SIGMOID)


class TestExactRank:
    def test_examples(self):
        assert rank_exact(GapVector(np.array([-1.0, -2.0, -0.5]))) == 1
        assert rank_exact(GapVector(np.array([0.0, 0.0]))) == 3
        assert rank_exact(GapVector(np.array([]))) == 1

    def test_undefined_under_sampling(self):
        with pytest.raises(RankingError):
            rank_exact(GapVector(np.array([1.0]), sample_scale=2.0))

    def test_scale_below_one_rejected(self):
        with pytest.raises(RankingError):
            GapVector(np.array([1.0]), sample_scale=0.5)


class TestSmoothRank:
    def test_sigmoid_at_zero_gap(self):
        assert rank_smooth(GapVector(np.array([0.0])), SIGMOID) == 1.5

    def test_unit_step_equals_exact(self, rng):
        for _ in range(200):
            gaps = rng.uniform(-3, 3, size=int(rng.integers(0, 30)))
            gaps[rng.random(gaps.size) < 0.2] = 0.0
            g = GapVector(gaps)
            assert rank_smooth(g, UNIT_STEP) == rank_exact(g)

    def test_scale_multiplies(self):
        g = GapVector(np.array([0.0, 0.0]), sample_scale=3.0)
        assert rank_smooth(g, SIGMOID) == pytest.approx(6.0)

    def test_gradient(self):
        g = GapVector(np.array([0.0, 2.0]), sample_scale=4.0)
        np.testing.assert_allclose(rank_smooth_grad(g, SIGMOID), 4.0 * np.array([0.25, 0.8807970779778823 * 0.11920292202211755]),
                                   rtol=1e-12)

    def test_gradient_needs_differentiable_kernel(self):
        with pytest.raises(KernelError):
            rank_smooth_grad(GapVector(np.array([1.0])), UNIT_STEP)


class TestGapBatch:
    def test_round_trip_through_vectors(self):
        vectors = [GapVector(np.array([1.0, -1.0, 0.5]), 2.0), GapVector(np.array([0.3]), 1.0)]
        batch = GapBatch.from_vectors(vectors)
        assert batch.gaps.shape == (2, 3)
        assert batch.mask.tolist() == [[True, True, True], [True, False, False]]
        back = batch.to_vectors()
        np.testing.assert_array_equal(back[1].gaps, [0.3])
        assert back[0].sample_scale == 2.0

    def test_masked_cells_never_contribute(self):
        gaps = np.array([[0.0, np.inf], [1.0, np.nan]])
        batch = GapBatch(gaps, np.array([[True, False], [True, False]]), np.ones(2))
        np.testing.assert_allclose(batch_rank_smooth(batch, SIGMOID), [1.5, 1.0 + 0.7310585786300049])
        grads = batch_rank_smooth_grad(batch, SIGMOID)
        assert grads[0, 1] == 0.0 and grads[1, 1] == 0.0

    def test_batch_matches_per_vector(self, rng):
        vectors = [GapVector(rng.normal(size=int(rng.integers(1, 8))), rng.uniform(1, 5)) for _ in range(10)]
        batch = as_gap_batch(vectors)
        expected = [rank_smooth(v, SIGMOID) for v in vectors]
        np.testing.assert_allclose(batch_rank_smooth(batch, SIGMOID), expected, rtol=1e-14)

    def test_shape_checks(self):
        with pytest.raises(ShapeMismatchError):
            GapBatch(np.zeros((2, 3)), np.ones((2, 2), dtype=bool), np.ones(2))
        with pytest.raises(ShapeMismatchError):
            GapBatch(np.zeros((2, 3)), np.ones((2, 3), dtype=bool), np.ones(3))

    def test_as_gap_batch_accepts_single_vector(self):
        batch = as_gap_batch(GapVector(np.array([1.0, 2.0])))
        assert batch.num_positives == 1


class TestSampledEstimator:
    CATALOG = 1000
    SAMPLED = 100  # positivo + 99 negativi, scale = 10
    DRAWS = 2000

    def _mean_estimate(self, rng, true_rank):
        scores = rng.permutation(self.CATALOG).astype(np.float64)
        positive = int(np.argsort(-scores)[true_rank - 1])
        others = np.delete(np.arange(self.CATALOG), positive)
        negatives = rng.choice(others, size=(self.DRAWS, self.SAMPLED - 1), replace=True)
        gaps = scores[negatives] - scores[positive]
        scale = self.CATALOG / self.SAMPLED
        batch = GapBatch(gaps, np.ones_like(gaps, dtype=bool), np.full(self.DRAWS, scale))
        exact = rank_exact(GapVector(np.delete(scores, positive) - scores[positive]))
        assert exact == true_rank
        return batch_rank_smooth(batch, UNIT_STEP).mean(), scale

    @pytest.mark.parametrize("true_rank", [100, 300, 700])
    def test_mean_within_ten_percent_at_large_ranks(self, rng, true_rank):
        mean, _ = self._mean_estimate(rng, true_rank)
        assert abs(mean - true_rank) / true_rank < 0.10

    @pytest.mark.parametrize("true_rank", [1, 20, 100])
    def test_mean_follows_the_biased_expectation(self, rng, true_rank):
        # E = scale * (1 + (|I'|-1) * (R-1) / (|I|-1)): a rank 20 vale circa 28.8
        mean, scale = self._mean_estimate(rng, true_rank)
        expected = scale * (1 + (self.SAMPLED - 1) * (true_rank - 1) / (self.CATALOG - 1))
        np.testing.assert_allclose(mean, expected, rtol=0.05)
