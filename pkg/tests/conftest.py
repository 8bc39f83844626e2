"""Fixture condivise della suite CROLAB."""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.data.behavior import BehaviorLog, write_log  # noqa: E402
from src.data.synthetic import make_synthetic_log  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: run statistiche lunghe, attive solo con CROLAB_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("CROLAB_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="imposta CROLAB_SLOW=1 per le run lunghe")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def tiny_log() -> BehaviorLog:
    return make_synthetic_log(users=60, items=40, clusters=4, min_len=3, max_len=8, seed=3)


@pytest.fixture
def tiny_log_file(tmp_path, tiny_log) -> Path:
    return write_log(tiny_log, tmp_path / "behaviors.tsv")


@pytest.fixture
def tiny_config_file(tmp_path, tiny_log_file) -> Path:
    """Configurazione YAML piccola che legge tiny_log_file."""
    path = tmp_path / "run.yaml"
    path.write_text(
        "run_id: tiny\n"
        f"output_dir: {tmp_path / 'runs'}\n"
        "data:\n"
        f"  path: {tiny_log_file}\n"
        "  max_len: 5\n"
        "  n_bs: 16\n"
        "  n_rn: 2\n"
        "model:\n"
        "  embed_dim: 8\n"
        "  hidden_dim: 8\n"
        "  out_dim: 8\n"
        "train:\n"
        "  epochs: 2\n"
        "  eval_every: 5\n"
        "  pivot_n: 5\n"
        "eval:\n"
        "  ns: [5, 10, 20]\n",
        encoding="utf-8",
    )
    return path
