#!/usr/bin/env python3
"""
CROLAB Ranking
Statistiche di ranking: rank esatto R_psi, rank smussato R_phi e stimatore
campionato e riscalato R_hat_phi
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from src.core.kernels import Kernel, KernelKind, deriv, eval_kernel
from src.system.errors import KernelError, RankingError, ShapeMismatchError


@dataclass(frozen=True)
class GapVector:
    """
    Gap g_i = S(u, v_i) - S(u, v) di un positivo verso i suoi negativi.

    Args:
        gaps: vettore dei gap (unita' di score)
        sample_scale: |I| / |I'|, 1 quando i negativi sono tutto il catalogo
    """
    gaps: np.ndarray
    sample_scale: float = 1.0

    def __post_init__(self):
        gaps = np.asarray(self.gaps, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "gaps", gaps)
        if not self.sample_scale >= 1.0:
            raise RankingError(f"sample_scale deve essere >= 1, ricevuto {self.sample_scale}")

    def __len__(self) -> int:
        return self.gaps.shape[0]


@dataclass
class GapBatch:
    """
    Forma matriciale, riempita e mascherata, di una sequenza di GapVector.
    Le righe sono i positivi; le celle con mask=False non contribuiscono mai.
    """
    gaps: np.ndarray    # (B, K)
    mask: np.ndarray    # (B, K) bool
    scales: np.ndarray  # (B,)

    def __post_init__(self):
        self.gaps = np.asarray(self.gaps, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        self.scales = np.asarray(self.scales, dtype=np.float64).reshape(-1)
        if self.gaps.ndim != 2 or self.gaps.shape != self.mask.shape:
            raise ShapeMismatchError(f"gaps {self.gaps.shape} e mask {self.mask.shape} incompatibili")
        if self.scales.shape[0] != self.gaps.shape[0]:
            raise ShapeMismatchError(f"{self.scales.shape[0]} scale per {self.gaps.shape[0]} positivi")
        # I valori mascherati vengono azzerati per non propagare inf/nan
        self.gaps = np.where(self.mask, self.gaps, 0.0)

    @property
    def num_positives(self) -> int:
        return self.gaps.shape[0]

    @classmethod
    def from_vectors(cls, vectors: Sequence[GapVector]) -> "GapBatch":
        width = max((len(v) for v in vectors), default=0)
        gaps = np.zeros((len(vectors), width))
        mask = np.zeros((len(vectors), width), dtype=bool)
        for row, vector in enumerate(vectors):
            gaps[row, :len(vector)] = vector.gaps
            mask[row, :len(vector)] = True
        scales = np.array([v.sample_scale for v in vectors], dtype=np.float64)
        return cls(gaps, mask, scales)

    def to_vectors(self) -> List[GapVector]:
        return [GapVector(self.gaps[row][self.mask[row]], float(self.scales[row]))
                for row in range(self.num_positives)]


def as_gap_batch(batch) -> GapBatch:
    """Accetta un GapBatch, un GapVector o una sequenza di GapVector."""
    if isinstance(batch, GapBatch):
        return batch
    if isinstance(batch, GapVector):
        return GapBatch.from_vectors([batch])
    return GapBatch.from_vectors(list(batch))


def rank_exact(g: GapVector) -> float:
    """
    R_psi = 1 + sum_i psi(g_i); i pareggi (g_i = 0) contano contro il positivo.

    Raises:
        RankingError: se il vettore proviene da un campionamento (scale != 1)
    """
    if g.sample_scale != 1.0:
        raise RankingError("Il rank esatto non e' definito sotto campionamento (sample_scale != 1)")
    return 1.0 + float(np.count_nonzero(g.gaps >= 0))


def rank_smooth(g: GapVector, k: Kernel) -> float:
    """R_hat_phi = scale * (1 + sum_i phi(g_i)); con scale = 1 e' R_phi."""
    total = np.sum(eval_kernel(k, g.gaps)) if len(g) else 0.0
    return g.sample_scale * (1.0 + float(total))


def rank_smooth_grad(g: GapVector, k: Kernel) -> np.ndarray:
    """dR_hat_phi / dg_i = scale * phi'(g_i)."""
    if not k.differentiable:
        raise KernelError("rank_smooth_grad richiede un kernel differenziabile")
    return g.sample_scale * deriv(k, g.gaps)


def batch_rank_smooth(batch: GapBatch, k: Kernel) -> np.ndarray:
    """Versione vettoriale di rank_smooth, una riga per positivo."""
    phi = np.where(batch.mask, eval_kernel(k, batch.gaps), 0.0)
    return batch.scales * (1.0 + phi.sum(axis=1))


def batch_rank_smooth_grad(batch: GapBatch, k: Kernel) -> np.ndarray:
    """Versione vettoriale di rank_smooth_grad; zero nelle celle mascherate."""
    if not k.differentiable:
        raise KernelError("rank_smooth_grad richiede un kernel differenziabile")
    return np.where(batch.mask, deriv(k, batch.gaps), 0.0) * batch.scales[:, None]


UNIT_STEP = Kernel(KernelKind.UNIT_STEP)
