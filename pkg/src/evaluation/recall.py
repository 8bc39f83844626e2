#!/usr/bin/env python3
"""
CROLAB Recall Evaluation
Recall@N sull'intero catalogo: forma a indicatori sul rank e forma Top_N per
appartenenza all'insieme. Politica dei pareggi: il positivo perde i pareggi,
rank = 1 + #{v_i != v : S(u, v_i) >= S(u, v)}.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from config.settings import EVAL_CHUNK_SIZE
from src.data.behavior import TrainingSample
from src.model.two_tower import TwoTowerModel
from src.system.errors import EvaluationError

TIE_POLICY = "positive-loses-ties"


@dataclass
class EvalReport:
    recall_at: Dict[int, float]
    num_pairs: int
    mode: str = "all"
    tie_policy: str = TIE_POLICY
    exclude_history: bool = False

    def to_record(self) -> Dict:
        """Record serializzabile in JSON (chiavi N come stringhe)."""
        return {
            "recall": {str(n): self.recall_at[n] for n in sorted(self.recall_at)},
            "num_pairs": self.num_pairs,
            "mode": self.mode,
            "tie_policy": self.tie_policy,
            "exclude_history": self.exclude_history,
        }

    def improvement_over(self, baseline: "EvalReport") -> Dict[int, float]:
        """Miglioramento relativo per N rispetto a un report di riferimento."""
        gains = {}
        for n, value in self.recall_at.items():
            base = baseline.recall_at.get(n)
            if base:
                gains[n] = (value - base) / base
        return gains


def _check_ns(ns: Iterable[int], catalog_size: int) -> List[int]:
    ns = sorted({int(n) for n in ns})
    if not ns:
        raise EvaluationError("Nessun N richiesto")
    for n in ns:
        if n < 1 or n > catalog_size:
            raise EvaluationError(f"N={n} fuori da [1, {catalog_size}]")
    return ns


def brute_force_rank(scores: np.ndarray, positive: int) -> int:
    """Rank esatto del positivo in un vettore di score su tutto il catalogo."""
    scores = np.asarray(scores, dtype=np.float64)
    # il confronto include il positivo stesso (>=), che vale 1
    return int(np.count_nonzero(scores >= scores[positive]))


def ranks_from_scores(score_matrix: np.ndarray, positives: np.ndarray) -> np.ndarray:
    """Rank per riga, stessa politica di brute_force_rank."""
    rows = np.arange(score_matrix.shape[0])
    pos_scores = score_matrix[rows, positives]
    return np.count_nonzero(score_matrix >= pos_scores[:, None], axis=1)


def recall_from_ranks(ranks: np.ndarray, ns: Sequence[int]) -> Dict[int, float]:
    """Forma a indicatori: frazione delle coppie con rank <= N."""
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        return {int(n): 0.0 for n in ns}
    return {int(n): float(np.count_nonzero(ranks <= n)) / ranks.size for n in ns}


def recall_topn_membership(score_matrix: np.ndarray, positives: np.ndarray, ns: Sequence[int]) -> Dict[int, float]:
    """
    Forma Top_N: il positivo conta se appartiene ai primi N elementi.
    L'ordinamento stabile mette il positivo dopo ogni item con lo stesso score.
    """
    num_rows, catalog = score_matrix.shape
    hits = {int(n): 0 for n in ns}
    for row in range(num_rows):
        is_positive = np.zeros(catalog, dtype=np.int8)
        is_positive[positives[row]] = 1
        order = np.lexsort((is_positive, -score_matrix[row]))
        for n in hits:
            if positives[row] in set(order[:n].tolist()):
                hits[n] += 1
    return {n: hits[n] / num_rows if num_rows else 0.0 for n in hits}


def _select_pairs(samples: Sequence[TrainingSample], max_pairs: int) -> List[TrainingSample]:
    if max_pairs and len(samples) > max_pairs:
        picks = np.linspace(0, len(samples) - 1, max_pairs).astype(np.int64)
        return [samples[i] for i in picks]
    return list(samples)


def recall_at_n(model: TwoTowerModel, samples: Sequence[TrainingSample], ns: Iterable[int],
                exclude_history: bool = False, mode: str = "all", chunk_size: int = EVAL_CHUNK_SIZE,
                max_pairs: int = 0, item_vectors: Optional[np.ndarray] = None) -> EvalReport:
    """
    Recall@N micro-mediata sulle coppie di valutazione, tutti gli N in un passaggio.
    I vettori item vengono calcolati una volta sola; il modello non viene modificato.
    Con exclude_history gli item della storia (diversi dal target) escono dai candidati.
    """
    ns = _check_ns(ns, model.catalog_size)
    pairs = _select_pairs(samples, max_pairs)
    items = model.item_matrix() if item_vectors is None else item_vectors

    ranks = np.empty(len(pairs), dtype=np.int64)
    for start in range(0, len(pairs), chunk_size):
        chunk = pairs[start:start + chunk_size]
        users = model.user_matrix([s.history for s in chunk])
        scores = model.tau * (users @ items.T)
        targets = np.array([s.target for s in chunk], dtype=np.int64)
        if exclude_history:
            for row, sample in enumerate(chunk):
                hidden = sample.history[sample.history != sample.target]
                scores[row, hidden] = -np.inf
        ranks[start:start + len(chunk)] = ranks_from_scores(scores, targets)

    return EvalReport(recall_from_ranks(ranks, ns), len(pairs), mode, TIE_POLICY, exclude_history)
