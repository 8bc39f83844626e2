"""Run lunghe su dati sintetici a cluster (CROLAB_SLOW=1)."""

import copy
import os

import numpy as np
import pytest

from src.experiments.runner import prepare_dataset, run_experiment
from src.experiments.sweep import _mean_recalls, expand_grid, parse_grid, run_cells
from src.system.config import RunConfig, apply_overrides

pytestmark = pytest.mark.slow

JOBS = max(1, min(4, os.cpu_count() or 1))


@pytest.fixture(scope="module")
def desk_cfg():
    return apply_overrides(RunConfig(), [
        "data.source=synthetic", "data.synthetic_users=5000", "data.synthetic_items=2000",
        "data.synthetic_clusters=20", "data.seed=0", "eval.ns=[10, 50, 200]", "train.pivot_n=50",
        "train.epochs=3", "train.eval_every=100", "train.max_steps=600", "eval.max_pairs=3000",
    ])


@pytest.fixture(scope="module")
def desk_data(desk_cfg):
    return prepare_dataset(desk_cfg)


def test_larger_alpha_favours_the_top_of_the_list(desk_cfg, desk_data):
    gaps = []
    for seed in range(5):
        recall = {}
        for alpha in (0.4, 1.2):
            cfg = copy.deepcopy(desk_cfg)
            cfg.loss.kernel, cfg.loss.alpha = "sigmoid", alpha
            cfg.model.seed = cfg.train.seed = seed
            recall[alpha] = run_experiment(cfg, desk_data, progress=False).test_report.recall_at
        gaps.append((recall[1.2][10] - recall[0.4][10], recall[1.2][200] - recall[0.4][200]))
    top, deep = np.array(gaps).T
    assert top.mean() > deep.mean()
    assert np.sum(top > deep) >= 4


def test_best_croloss_keeps_up_with_softmax(desk_cfg, desk_data):
    grid = parse_grid("kernels=hinge,sigmoid,exponential,softplus,lambda:sigmoid+softplus;"
                      "alphas=0.6,1.0,1.4;baselines=softmax;seeds=0,1,2")
    results = run_cells(desk_cfg, expand_grid(desk_cfg, grid), desk_data, jobs=JOBS)
    assert not [r for r in results if r.status != "ok"]
    means = _mean_recalls(results)
    best = max(v[50] for (label, alpha), v in means.items() if alpha is not None)
    assert best >= means[("softmax", None)][50] - 0.005
