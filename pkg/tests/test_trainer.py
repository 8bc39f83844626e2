import json

import numpy as np
import pytest

from src.core.losses import build_loss_spec
from src.data.behavior import TrainingSample, build_dataset
from src.evaluation.recall import recall_at_n
from src.model.two_tower import TwoTowerModel
from src.system.errors import ConfigError, ShapeMismatchError, TrainingAbortedError
from src.training.trainer import TrainConfig, train


def _cfg(catalog, family="croloss", **overrides):
    options = dict(lr=0.02, n_bs=16, n_rn=4, epochs=2, eval_every=5, pivot_n=5, eval_ns=(5, 10), seed=1)
    options.update(overrides)
    return TrainConfig(loss=build_loss_spec(family, catalog, 1.0, kernel="softplus"), **options)


@pytest.fixture
def dataset(tiny_log):
    return build_dataset(tiny_log, max_len=5, seed=0)


def _model(catalog, seed=0):
    return TwoTowerModel(catalog, 8, 8, 8, seed=seed)


class TestTrainingLoop:
    def test_loss_decreases_and_recall_improves(self, dataset):
        catalog = dataset.catalog_size
        model = _model(catalog)
        before = recall_at_n(model, dataset.train, [5]).recall_at[5]
        result = train(model, dataset.train, _cfg(catalog, lr=0.05, epochs=30, eval_every=1000),
                       progress=False)
        losses = [r["loss"] for r in result.history if "loss" in r]
        assert losses[-1] < losses[0]
        assert recall_at_n(result.final_model, dataset.train, [5]).recall_at[5] > before

    @pytest.mark.parametrize("family", ["croloss", "croloss_lambda", "softmax", "triplet", "bpr"])
    def test_early_descent_for_every_family(self, dataset, family):
        catalog = dataset.catalog_size
        first, last = [], []
        for seed in range(5):
            cfg = _cfg(catalog, family, epochs=100, eval_every=20, max_steps=200, seed=seed)
            result = train(_model(catalog, seed=seed), dataset.train, cfg, progress=False)
            losses = [r["loss"] for r in result.history if "loss" in r]
            assert result.steps == 200
            first.append(losses[0])
            last.append(losses[-1])
        assert np.mean(last) < np.mean(first)

    def test_zero_learning_rate_is_identity(self, dataset):
        model = _model(dataset.catalog_size)
        before = model.flatten_params()
        train(model, dataset.train, _cfg(dataset.catalog_size, lr=0.0), progress=False)
        np.testing.assert_array_equal(model.flatten_params(), before)

    def test_deterministic(self, dataset, tmp_path):
        runs = []
        for name in ("a", "b"):
            model = _model(dataset.catalog_size, seed=4)
            train(model, dataset.train, _cfg(dataset.catalog_size), dataset.valid,
                  history_path=tmp_path / f"{name}.jsonl", progress=False)
            runs.append(model.flatten_params())
        np.testing.assert_array_equal(runs[0], runs[1])
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_batch_stream_does_not_depend_on_loss(self, dataset):
        streams = {}
        for family in ("croloss", "bpr", "softmax"):
            seen = []
            train(_model(dataset.catalog_size), dataset.train, _cfg(dataset.catalog_size, family),
                  progress=False, on_batch=lambda b, seen=seen: seen.append((b.targets.copy(), b.negatives.copy())))
            streams[family] = seen
        for family in ("bpr", "softmax"):
            assert len(streams[family]) == len(streams["croloss"])
            for (t1, n1), (t2, n2) in zip(streams[family], streams["croloss"]):
                np.testing.assert_array_equal(t1, t2)
                np.testing.assert_array_equal(n1, n2)


class TestEarlyStopping:
    def test_patience_stops_a_flat_run(self, dataset):
        cfg = _cfg(dataset.catalog_size, lr=0.0, epochs=5, eval_every=1, patience=1)
        result = train(_model(dataset.catalog_size), dataset.train, cfg, dataset.valid, progress=False)
        assert result.stopped_early
        assert result.steps == 2
        assert result.best_step == 1

    def test_max_steps(self, dataset):
        result = train(_model(dataset.catalog_size), dataset.train,
                       _cfg(dataset.catalog_size, epochs=50, max_steps=3), progress=False)
        assert result.steps == 3

    def test_without_validation_best_is_last(self, dataset):
        result = train(_model(dataset.catalog_size), dataset.train, _cfg(dataset.catalog_size), progress=False)
        np.testing.assert_array_equal(result.best_model.flatten_params(), result.final_model.flatten_params())
        assert result.history[-1]["best_recall"] is None


class TestHistory:
    def test_jsonl_records(self, dataset, tmp_path):
        path = tmp_path / "history.jsonl"
        train(_model(dataset.catalog_size), dataset.train, _cfg(dataset.catalog_size), dataset.valid,
              history_path=path, progress=False)
        records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
        evals, final = records[:-1], records[-1]
        assert evals and all(set(r["recall"]) == {"5", "10"} for r in evals)
        assert [r["step"] for r in evals] == sorted(r["step"] for r in evals)
        assert set(final) == {"best_step", "best_recall", "pivot_n", "steps"}
        assert final["pivot_n"] == 5


class TestFailures:
    def test_non_finite_loss_aborts(self, dataset):
        model = _model(dataset.catalog_size)
        model.params["user_w1"][0, 0] = np.nan
        with pytest.raises(TrainingAbortedError) as err:
            train(model, dataset.train, _cfg(dataset.catalog_size, "bpr"), progress=False)
        assert err.value.block == "loss"
        assert err.value.batch_id == 0

    def test_item_outside_catalog(self):
        samples = [TrainingSample(0, np.array([1]), 12)]
        with pytest.raises(ShapeMismatchError):
            train(_model(10), samples, _cfg(10), progress=False)

    def test_no_samples(self):
        with pytest.raises(ConfigError):
            train(_model(10), [], _cfg(10), progress=False)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            _cfg(10, lr=-1.0)
        with pytest.raises(ConfigError):
            _cfg(10, adam_beta1=1.0)

    def test_recall_ns_include_pivot(self):
        assert _cfg(50, pivot_n=7, eval_ns=(5, 10)).recall_ns == [5, 7, 10]


@pytest.mark.slow
class TestOverfit:
    def test_memorises_a_small_training_set(self):
        catalog = 200
        samples = [TrainingSample(i, np.array([i]), 100 + i) for i in range(64)]
        cfg = TrainConfig(loss=build_loss_spec("croloss", catalog, 1.0, kernel="softplus"), lr=0.05, n_bs=16,
                          n_rn=10, epochs=200, eval_every=8, patience=1000, pivot_n=1, eval_ns=(1,),
                          max_steps=500, seed=0)
        result = train(TwoTowerModel(catalog, 32, 32, 32, seed=0), samples, cfg, samples, progress=False)
        assert result.best_recall >= 0.95
