#!/usr/bin/env python3
"""
CROLAB Trainer
Ciclo di training a mini-batch: forward, loss (qualsiasi famiglia), backward,
Adam; valutazione periodica sulla validazione con early stopping.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from config import settings
from src.core.losses import LossSpec, build_loss_spec, compute_loss
from src.data.batching import Batch, make_batches
from src.data.behavior import TrainingSample
from src.evaluation.recall import recall_at_n
from src.model.two_tower import TwoTowerModel
from src.system.errors import ConfigError, ShapeMismatchError, TrainingAbortedError
from src.system.logger import get_logger
from src.training.optimizer import AdamConfig, AdamState, adam_step

logger = get_logger()


@dataclass
class TrainConfig:
    loss: LossSpec
    lr: float = settings.LR
    adam_beta1: float = settings.ADAM_BETA1
    adam_beta2: float = settings.ADAM_BETA2
    eps: float = settings.ADAM_EPS
    epochs: int = 10
    eval_every: int = 200
    patience: int = 5
    seed: int = 0
    n_bs: int = settings.N_BS
    n_rn: int = settings.N_RN
    pivot_n: int = settings.PIVOT_N
    eval_ns: Tuple[int, ...] = settings.RECALL_NS
    average_loss: bool = True
    max_steps: int = 0
    exclude_history: bool = False
    eval_max_pairs: int = 0
    chunk_size: int = settings.EVAL_CHUNK_SIZE

    def __post_init__(self):
        if not self.lr >= 0:
            raise ConfigError(f"lr deve essere >= 0, ricevuto {self.lr}")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ConfigError("beta1 e beta2 devono stare in (0, 1)")
        if self.epochs < 1 or self.eval_every < 1 or self.patience < 1:
            raise ConfigError("epochs, eval_every e patience devono essere >= 1")

    def adam(self) -> AdamConfig:
        return AdamConfig(self.lr, self.adam_beta1, self.adam_beta2, self.eps)

    @property
    def recall_ns(self) -> List[int]:
        return sorted(set(int(n) for n in self.eval_ns) | {int(self.pivot_n)})

    @classmethod
    def from_run_config(cls, run_cfg, catalog_size: int) -> "TrainConfig":
        """Traduce le sezioni loss/train/data/eval di una RunConfig."""
        lc, tc = run_cfg.loss, run_cfg.train
        spec = build_loss_spec(lc.family, catalog_size, lc.alpha, lc.kernel, lc.kernel1, lc.kernel2,
                               lc.margin, lc.clamp_rank)
        return cls(
            loss=spec, lr=tc.lr, adam_beta1=tc.beta1, adam_beta2=tc.beta2, eps=tc.eps,
            epochs=tc.epochs, eval_every=tc.eval_every, patience=tc.patience, seed=tc.seed,
            n_bs=run_cfg.data.n_bs, n_rn=run_cfg.data.n_rn, pivot_n=tc.pivot_n,
            eval_ns=tuple(run_cfg.eval.ns), average_loss=tc.average_loss, max_steps=tc.max_steps,
            exclude_history=run_cfg.eval.exclude_history, eval_max_pairs=run_cfg.eval.max_pairs,
            chunk_size=run_cfg.eval.chunk_size,
        )


@dataclass
class TrainResult:
    """best_model e' la copia con la miglior Recall@pivot in validazione."""
    best_model: TwoTowerModel
    final_model: TwoTowerModel
    history: List[Dict] = field(default_factory=list)
    best_step: int = 0
    best_recall: float = float("-inf")
    steps: int = 0
    stopped_early: bool = False


def build_model(run_cfg, catalog_size: int) -> TwoTowerModel:
    mc = run_cfg.model
    return TwoTowerModel(catalog_size, mc.embed_dim, mc.hidden_dim, mc.out_dim, mc.tau, seed=mc.seed)


def train_step(model: TwoTowerModel, batch: Batch, cfg: TrainConfig, state: AdamState) -> Tuple[float, int]:
    """
    Un passo di ottimizzazione. Restituisce (loss, collisioni mascherate).

    Raises:
        TrainingAbortedError: loss o gradiente non finito
    """
    fwd = model.forward_batch(batch.histories, batch.targets, batch.negatives)
    out = compute_loss(cfg.loss, fwd.gaps)
    if cfg.average_loss:
        out = out.scaled(1.0 / batch.size)

    where = f"epoca {batch.epoch}"
    if not math.isfinite(out.value):
        raise TrainingAbortedError(f"Loss non finita ({where})", batch.batch_id, "loss")
    if not (np.all(np.isfinite(out.grad_pos)) and np.all(np.isfinite(out.grad_neg))):
        raise TrainingAbortedError(f"Gradiente degli score non finito ({where})", batch.batch_id, "scores")

    grads = model.backward(fwd, out.grad_pos, out.grad_neg)
    bad_block = grads.first_nonfinite_block()
    if bad_block is not None:
        raise TrainingAbortedError(f"Gradiente non finito ({where})", batch.batch_id, bad_block)

    adam_step(model.params, grads.grads, state, cfg.adam(), grads.touched_rows)
    return out.value, int(np.count_nonzero(~fwd.gaps.mask))


def _write_history(history: List[Dict], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in history:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    return path


def train(model: TwoTowerModel, train_samples: Sequence[TrainingSample], cfg: TrainConfig,
          valid_samples: Optional[Sequence[TrainingSample]] = None,
          history_path: Union[str, Path, None] = None, progress: bool = True,
          on_batch: Optional[Callable[[Batch], None]] = None) -> TrainResult:
    """
    Addestra il modello in place.

    Ogni eval_every passi e a fine epoca la validazione produce un record
    {"epoch", "step", "loss", "recall"}; il modello con la miglior Recall@pivot_n
    viene copiato. Dopo `patience` valutazioni senza miglioramento, o a max_steps,
    il training si ferma. Senza valid_samples il modello migliore e' l'ultimo.

    La sequenza dei batch dipende solo da (seed, epoca, campioni): cambiare
    famiglia di loss non la modifica.
    """
    if not train_samples:
        raise ConfigError("Nessun campione di training")
    top_item = max(max(s.target, int(np.max(s.history))) for s in train_samples)
    if top_item >= model.catalog_size:
        raise ShapeMismatchError(f"Item {top_item} fuori dal catalogo del modello ({model.catalog_size})")

    ns = cfg.recall_ns
    state = AdamState.zeros_like(model.params)
    result = TrainResult(best_model=model.copy(), final_model=model)
    batches_per_epoch = math.ceil(len(train_samples) / cfg.n_bs)
    window: List[float] = []
    stale = 0
    step = 0
    last_eval_step = -1

    def evaluate(epoch: int) -> bool:
        """Registra una valutazione; True quando scatta l'early stopping."""
        nonlocal stale, last_eval_step
        last_eval_step = step
        record = {"epoch": epoch, "step": step, "loss": float(np.mean(window)) if window else None, "recall": {}}
        window.clear()
        if valid_samples:
            report = recall_at_n(model, valid_samples, ns, cfg.exclude_history, chunk_size=cfg.chunk_size,
                                 max_pairs=cfg.eval_max_pairs)
            record["recall"] = {str(n): report.recall_at[n] for n in ns}
            pivot = report.recall_at[cfg.pivot_n]
            if pivot > result.best_recall:
                result.best_recall, result.best_step = pivot, step
                result.best_model = model.copy()
                stale = 0
            else:
                stale += 1
            logger.info(f"Passo {step}: loss {record['loss']}, Recall@{cfg.pivot_n} {pivot:.4f}")
        result.history.append(record)
        return bool(valid_samples) and stale >= cfg.patience

    logger.info(f"Training {cfg.loss.label}: {len(train_samples)} campioni, {batches_per_epoch} batch/epoca")
    stop = False
    for epoch in range(cfg.epochs):
        collisions = 0
        stream = make_batches(train_samples, cfg.n_bs, cfg.n_rn, model.catalog_size, cfg.seed, epoch)
        for batch in tqdm(stream, total=batches_per_epoch, desc=f"epoca {epoch + 1}/{cfg.epochs}",
                          disable=not progress, leave=False):
            if on_batch is not None:
                on_batch(batch)
            value, dropped = train_step(model, batch, cfg, state)
            collisions += dropped
            window.append(value)
            step += 1
            if step % cfg.eval_every == 0 and evaluate(epoch):
                stop = True
            if cfg.max_steps and step >= cfg.max_steps:
                stop = True
            if stop:
                break
        logger.debug(f"Epoca {epoch}: {collisions} negativi in collisione mascherati")
        if last_eval_step != step and evaluate(epoch):
            stop = True
        if stop:
            result.stopped_early = step < cfg.epochs * batches_per_epoch
            break

    result.steps = step
    if not valid_samples:
        result.best_model, result.best_step = model.copy(), step
    result.history.append({
        "best_step": result.best_step,
        "best_recall": result.best_recall if valid_samples else None,
        "pivot_n": cfg.pivot_n,
        "steps": step,
    })
    if history_path is not None:
        _write_history(result.history, history_path)
    return result
