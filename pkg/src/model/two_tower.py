#!/usr/bin/env python3
"""
CROLAB Two-Tower Model
Modello di retrieval a due torri: tabella di embedding condivisa, sequenza di
comportamenti mediata, MLP per torre e score coseno scalato.
Forward e backward sono scritti a mano in numpy.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from config.settings import EMBED_DIM, EMBED_INIT_STD, HIDDEN_DIM, NORM_EPS, OUT_DIM, TAU
from src.core.ranking import GapBatch
from src.system.errors import ShapeMismatchError
from src.system.logger import get_logger

logger = get_logger()

PARAM_NAMES = (
    "item_embeddings",
    "user_w1", "user_b1", "user_w2", "user_b2",
    "item_w1", "item_b1", "item_w2", "item_b2",
)


@dataclass
class TowerCache:
    """Attivazioni salvate da una forward di torre."""
    inputs: np.ndarray      # (n, d_e) ingresso dell'MLP
    hidden_pre: np.ndarray  # (n, d_h)
    hidden: np.ndarray      # (n, d_h)
    # Per la torre utente: id piatti della sequenza, segmento e lunghezze
    flat_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    segments: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    lengths: Optional[np.ndarray] = None


@dataclass
class ScoreCache:
    """Vettori normalizzati e norme usati dal coseno."""
    user_unit: np.ndarray
    user_norm: np.ndarray
    pos_unit: np.ndarray
    pos_norm: np.ndarray
    neg_unit: np.ndarray
    neg_norm: np.ndarray


@dataclass
class BatchForward:
    """Tutto cio' che serve alla backward di un batch."""
    gaps: GapBatch
    pos_scores: np.ndarray
    neg_scores: np.ndarray
    user_cache: TowerCache
    item_cache: TowerCache
    item_ids: np.ndarray
    num_targets: int
    scores: ScoreCache


class TwoTowerModel:
    """
    Torre utente: media degli embedding della sequenza -> MLP [d_e -> d_h -> d_out].
    Torre item: embedding dell'item -> MLP [d_e -> d_h -> d_out].
    Score: tau * cos(u, v).
    """
    def __init__(self, catalog_size: int, embed_dim: int = EMBED_DIM, hidden_dim: int = HIDDEN_DIM,
                 out_dim: int = OUT_DIM, tau: float = TAU, seed: int = 0):
        if tau <= 0:
            raise ValueError(f"tau deve essere positivo, ricevuto {tau}")
        self.catalog_size = int(catalog_size)
        self.embed_dim = int(embed_dim)
        self.hidden_dim = int(hidden_dim)
        self.out_dim = int(out_dim)
        self.tau = float(tau)
        self.params: Dict[str, np.ndarray] = self._init_params(np.random.default_rng(seed))

    def _init_params(self, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        def dense(fan_in: int, fan_out: int) -> np.ndarray:
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=(fan_in, fan_out))

        params = {"item_embeddings": rng.normal(0.0, EMBED_INIT_STD, size=(self.catalog_size, self.embed_dim))}
        for tower in ("user", "item"):
            params[f"{tower}_w1"] = dense(self.embed_dim, self.hidden_dim)
            params[f"{tower}_b1"] = np.zeros(self.hidden_dim)
            params[f"{tower}_w2"] = dense(self.hidden_dim, self.out_dim)
            params[f"{tower}_b2"] = np.zeros(self.out_dim)
        return params

    # ------------------------------------------------------------------
    # Parametri
    # ------------------------------------------------------------------
    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: self.params[name].shape for name in PARAM_NAMES}

    def copy(self) -> "TwoTowerModel":
        clone = TwoTowerModel.__new__(TwoTowerModel)
        clone.__dict__.update(self.__dict__)
        clone.params = {name: value.copy() for name, value in self.params.items()}
        return clone

    def flatten_params(self) -> np.ndarray:
        return np.concatenate([self.params[name].ravel() for name in PARAM_NAMES])

    def load_flat(self, vector: np.ndarray) -> None:
        """Scrive un vettore piatto nei parametri (ordine di PARAM_NAMES)."""
        offset = 0
        for name in PARAM_NAMES:
            size = self.params[name].size
            self.params[name] = np.asarray(vector[offset:offset + size], dtype=np.float64).reshape(
                self.params[name].shape).copy()
            offset += size
        if offset != len(vector):
            raise ShapeMismatchError(f"Vettore di {len(vector)} elementi per {offset} parametri")

    # ------------------------------------------------------------------
    # Forward
    # ------------------------------------------------------------------
    def _mlp(self, tower: str, inputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = self.params
        hidden_pre = inputs @ p[f"{tower}_w1"] + p[f"{tower}_b1"]
        hidden = np.maximum(hidden_pre, 0.0)
        return hidden @ p[f"{tower}_w2"] + p[f"{tower}_b2"], hidden_pre, hidden

    def _check_ids(self, ids: np.ndarray) -> None:
        if ids.size and (ids.min() < 0 or ids.max() >= self.catalog_size):
            raise IndexError(f"Indice item fuori intervallo [0, {self.catalog_size})")

    def user_forward_batch(self, histories: Sequence[Sequence[int]]) -> Tuple[np.ndarray, TowerCache]:
        """Vettori utente grezzi (non normalizzati) per una lista di sequenze."""
        lengths = np.array([len(h) for h in histories], dtype=np.int64)
        if lengths.size == 0 or np.any(lengths == 0):
            raise ValueError("Sequenza di comportamenti vuota")
        flat_ids = np.concatenate([np.asarray(h, dtype=np.int64) for h in histories])
        self._check_ids(flat_ids)
        segments = np.repeat(np.arange(len(histories)), lengths)

        pooled = np.zeros((len(histories), self.embed_dim))
        np.add.at(pooled, segments, self.params["item_embeddings"][flat_ids])
        pooled /= lengths[:, None]

        out, hidden_pre, hidden = self._mlp("user", pooled)
        return out, TowerCache(pooled, hidden_pre, hidden, flat_ids, segments, lengths)

    def item_forward_batch(self, item_ids: Sequence[int]) -> Tuple[np.ndarray, TowerCache]:
        """Vettori item grezzi per una lista di id."""
        ids = np.asarray(item_ids, dtype=np.int64).reshape(-1)
        self._check_ids(ids)
        inputs = self.params["item_embeddings"][ids]
        out, hidden_pre, hidden = self._mlp("item", inputs)
        return out, TowerCache(inputs, hidden_pre, hidden, flat_ids=ids)

    def user_forward(self, behavior_ids: Sequence[int]) -> np.ndarray:
        return self.user_forward_batch([behavior_ids])[0][0]

    def item_forward(self, item_id: int) -> np.ndarray:
        return self.item_forward_batch([item_id])[0][0]

    def score(self, u: np.ndarray, v: np.ndarray) -> float:
        """tau * cos(u, v), in [-tau, tau]."""
        u_unit, _ = unit_rows(np.atleast_2d(u))
        v_unit, _ = unit_rows(np.atleast_2d(v))
        return float(self.tau * np.clip(np.sum(u_unit * v_unit), -1.0, 1.0))

    def item_matrix(self, chunk_size: int = 4096) -> np.ndarray:
        """Vettori item normalizzati di tutto il catalogo (per la valutazione)."""
        blocks = []
        for start in range(0, self.catalog_size, chunk_size):
            ids = np.arange(start, min(start + chunk_size, self.catalog_size))
            blocks.append(unit_rows(self.item_forward_batch(ids)[0])[0])
        return np.concatenate(blocks, axis=0)

    def user_matrix(self, histories: Sequence[Sequence[int]]) -> np.ndarray:
        return unit_rows(self.user_forward_batch(histories)[0])[0]

    def forward_batch(self, histories: Sequence[Sequence[int]], targets: np.ndarray,
                      negatives: np.ndarray) -> BatchForward:
        """
        Score di ogni positivo verso il proprio target e verso i negativi condivisi.
        I negativi che coincidono con il target del positivo vengono mascherati e
        sample_scale = |I| / (1 + negativi validi).
        """
        targets = np.asarray(targets, dtype=np.int64)
        negatives = np.asarray(negatives, dtype=np.int64)
        user_raw, user_cache = self.user_forward_batch(histories)
        item_ids = np.concatenate([targets, negatives])
        item_raw, item_cache = self.item_forward_batch(item_ids)

        user_unit, user_norm = unit_rows(user_raw)
        pos_unit, pos_norm = unit_rows(item_raw[:len(targets)])
        neg_unit, neg_norm = unit_rows(item_raw[len(targets):])

        pos_scores = self.tau * np.sum(user_unit * pos_unit, axis=1)
        neg_scores = self.tau * (user_unit @ neg_unit.T)
        mask = negatives[None, :] != targets[:, None]
        scales = self.catalog_size / (1.0 + mask.sum(axis=1))
        gaps = GapBatch(neg_scores - pos_scores[:, None], mask, np.maximum(scales, 1.0))

        return BatchForward(gaps, pos_scores, neg_scores, user_cache, item_cache, item_ids, len(targets),
                            ScoreCache(user_unit, user_norm, pos_unit, pos_norm, neg_unit, neg_norm))

    # ------------------------------------------------------------------
    # Backward
    # ------------------------------------------------------------------
    def _mlp_backward(self, tower: str, cache: TowerCache, d_out: np.ndarray,
                      grads: Dict[str, np.ndarray]) -> np.ndarray:
        p = self.params
        grads[f"{tower}_w2"] += cache.hidden.T @ d_out
        grads[f"{tower}_b2"] += d_out.sum(axis=0)
        d_hidden = (d_out @ p[f"{tower}_w2"].T) * (cache.hidden_pre > 0)
        grads[f"{tower}_w1"] += cache.inputs.T @ d_hidden
        grads[f"{tower}_b1"] += d_hidden.sum(axis=0)
        return d_hidden @ p[f"{tower}_w1"].T

    def backward(self, fwd: BatchForward, grad_pos: np.ndarray, grad_neg: np.ndarray) -> "ModelGradients":
        """
        Regola della catena da dL/dS (positivi e negativi) fino ai parametri.
        Le righe di embedding non toccate dal batch ricevono gradiente zero.
        """
        grad_pos = np.asarray(grad_pos, dtype=np.float64)
        grad_neg = np.asarray(grad_neg, dtype=np.float64)
        num_neg = fwd.scores.neg_unit.shape[0]
        if grad_pos.shape != (fwd.num_targets,) or grad_neg.shape != (fwd.num_targets, num_neg):
            raise ShapeMismatchError(
                f"Gradienti {grad_pos.shape}/{grad_neg.shape} per un batch "
                f"({fwd.num_targets}, {num_neg})"
            )
        sc = fwd.scores
        d_user_unit = self.tau * (grad_pos[:, None] * sc.pos_unit + grad_neg @ sc.neg_unit)
        d_pos_unit = self.tau * grad_pos[:, None] * sc.user_unit
        d_neg_unit = self.tau * (grad_neg.T @ sc.user_unit)

        d_user_raw = unit_rows_backward(sc.user_unit, sc.user_norm, d_user_unit)
        d_item_raw = np.concatenate([
            unit_rows_backward(sc.pos_unit, sc.pos_norm, d_pos_unit),
            unit_rows_backward(sc.neg_unit, sc.neg_norm, d_neg_unit),
        ])

        grads = ModelGradients.zeros_like(self)
        g = grads.grads

        d_pooled = self._mlp_backward("user", fwd.user_cache, d_user_raw, g)
        uc = fwd.user_cache
        per_item = d_pooled[uc.segments] / uc.lengths[uc.segments][:, None]
        np.add.at(g["item_embeddings"], uc.flat_ids, per_item)

        d_item_emb = self._mlp_backward("item", fwd.item_cache, d_item_raw, g)
        np.add.at(g["item_embeddings"], fwd.item_ids, d_item_emb)

        grads.touched_rows = np.unique(np.concatenate([uc.flat_ids, fwd.item_ids]))
        return grads


@dataclass
class ModelGradients:
    """dL/dtheta con le stesse forme del modello."""
    grads: Dict[str, np.ndarray]
    touched_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @classmethod
    def zeros_like(cls, model: TwoTowerModel) -> "ModelGradients":
        return cls({name: np.zeros_like(model.params[name]) for name in PARAM_NAMES})

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.grads[name].ravel() for name in PARAM_NAMES])

    def scale(self, factor: float) -> None:
        for name in PARAM_NAMES:
            self.grads[name] *= factor

    def first_nonfinite_block(self) -> Optional[str]:
        for name in PARAM_NAMES:
            if not np.all(np.isfinite(self.grads[name])):
                return name
        return None


def unit_rows(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Normalizza le righe; norme sotto 1e-12 vengono sostituite da 1e-12."""
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms < NORM_EPS):
        logger.warning(f"{int(np.sum(norms < NORM_EPS))} vettori a norma nulla nel coseno")
    safe = np.maximum(norms, NORM_EPS)
    return x / safe[:, None], safe


def unit_rows_backward(unit: np.ndarray, norms: np.ndarray, d_unit: np.ndarray) -> np.ndarray:
    # d(x/|x|) = (I - x_hat x_hat^T) / |x|
    radial = np.sum(unit * d_unit, axis=1, keepdims=True)
    return (d_unit - unit * radial) / norms[:, None]

