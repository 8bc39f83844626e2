#!/usr/bin/env python3
"""
CROLAB Experiment Runner
Percorso comune a `train` e alle celle di `sweep`: dataset, modello, training,
valutazione sul test e scrittura degli output della run.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from src.data.behavior import DatasetSplit, build_dataset, ingest, write_log
from src.data.synthetic import make_synthetic_log
from src.evaluation.recall import EvalReport, recall_at_n
from src.model.checkpoint import save_checkpoint
from src.system.config import RunConfig, dump_config
from src.system.errors import ConfigError
from src.system.logger import get_logger
from src.training.trainer import TrainConfig, TrainResult, build_model, train

logger = get_logger()

RESOLVED_CONFIG = "resolved_config.yaml"
HISTORY_FILE = "history.jsonl"
CHECKPOINT_FILE = "checkpoint_best.npz"
REPORT_JSON = "report_test.json"
REPORT_TEXT = "report_test.txt"


@dataclass
class ExperimentResult:
    training: TrainResult
    test_report: EvalReport


def load_behavior(cfg: RunConfig):
    """Log da file o sintetico secondo data.source."""
    data = cfg.data
    if data.source == "synthetic":
        return make_synthetic_log(data.synthetic_users, data.synthetic_items, data.synthetic_clusters,
                                  data.synthetic_min_len, data.synthetic_max_len, seed=data.seed)
    if not data.path:
        raise ConfigError("data.path mancante (oppure data.source=synthetic)")
    return ingest(data.path, data.delimiter)


def prepare_dataset(cfg: RunConfig) -> DatasetSplit:
    """Lettura e split, una volta sola per run o per sweep."""
    log = load_behavior(cfg)
    return build_dataset(log, cfg.data.max_len, cfg.data.seed, cfg.data.eval_targets)


def export_dataset(cfg: RunConfig, path: Union[str, Path]) -> Path:
    return write_log(load_behavior(cfg), path, cfg.data.delimiter)


def render_report(report: EvalReport, title: str = "Test") -> str:
    """Tabella leggibile del report, percentuali a 2 decimali."""
    from src.graphics.tables import render_table

    ns = sorted(report.recall_at)
    rows = [[title] + [f"{100.0 * report.recall_at[n]:.2f}" for n in ns]]
    footer = (f"coppie: {report.num_pairs}  modalita': {report.mode}  pareggi: {report.tie_policy}  "
              f"storia esclusa: {'si' if report.exclude_history else 'no'}")
    return render_table(["split"] + [f"R@{n}" for n in ns], rows) + "\n" + footer + "\n"


def run_experiment(cfg: RunConfig, dataset: DatasetSplit, run_dir: Union[str, Path, None] = None,
                   progress: bool = True) -> ExperimentResult:
    """
    Addestra con la configurazione risolta e valuta il modello migliore sul test.
    Con run_dir scrive configurazione risolta, storia, checkpoint e report.
    """
    catalog = dataset.catalog_size
    train_cfg = TrainConfig.from_run_config(cfg, catalog)
    model = build_model(cfg, catalog)

    out: Optional[Path] = Path(run_dir) if run_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        dump_config(cfg, out / RESOLVED_CONFIG)

    result = train(model, dataset.train, train_cfg, dataset.valid,
                   history_path=out / HISTORY_FILE if out is not None else None, progress=progress)
    report = recall_at_n(result.best_model, dataset.test, cfg.eval.ns, cfg.eval.exclude_history,
                         mode=dataset.eval_targets, chunk_size=cfg.eval.chunk_size,
                         max_pairs=cfg.eval.max_pairs)

    if out is not None:
        save_checkpoint(result.best_model, out / CHECKPOINT_FILE)
        with open(out / REPORT_JSON, "w", encoding="utf-8") as f:
            f.write(json.dumps(report.to_record(), sort_keys=True, indent=2) + "\n")
        with open(out / REPORT_TEXT, "w", encoding="utf-8") as f:
            f.write(render_report(report))
        logger.info(f"Output della run scritti in {out}")
    return ExperimentResult(result, report)
