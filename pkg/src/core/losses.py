#!/usr/bin/env python3
"""
CROLAB Losses
Valori delle loss e gradienti analitici rispetto agli score: CROLoss, variante
Lambda e le tre loss di riferimento (softmax cross-entropy, triplet, BPR).

Tutte le loss dipendono dagli score solo attraverso i gap g_i = S(u,v_i) - S(u,v):
il gradiente di ogni gap va con segno + sullo score negativo e con segno - sullo
score positivo.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp, softmax

from src.core.kernels import Kernel
from src.core.ranking import GapBatch, as_gap_batch, batch_rank_smooth, batch_rank_smooth_grad
from src.core.weighting import Weighting, make_weighting
from src.system.errors import ConfigError, KernelError


class LossFamily(Enum):
    CROLOSS = "croloss"
    CROLOSS_LAMBDA = "croloss_lambda"
    SOFTMAX_CE = "softmax"
    TRIPLET = "triplet"
    BPR = "bpr"


@dataclass(frozen=True)
class LossSpec:
    """
    Specifica completa di una loss.

    kernel vale per CROLOSS, kernel1/kernel2 per CROLOSS_LAMBDA, margin per TRIPLET.
    clamp_rank limita R_hat a [1, |I|+1) prima di W e w.
    """
    family: LossFamily
    weighting: Optional[Weighting] = None
    kernel: Optional[Kernel] = None
    kernel1: Optional[Kernel] = None
    kernel2: Optional[Kernel] = None
    margin: float = 0.0
    clamp_rank: bool = True

    def __post_init__(self):
        if self.family is LossFamily.CROLOSS:
            if self.kernel is None or not self.kernel.differentiable:
                raise KernelError("CROLoss richiede un kernel differenziabile")
        if self.family is LossFamily.CROLOSS_LAMBDA:
            if self.kernel1 is None:
                raise KernelError("CROLoss-Lambda richiede kernel1")
            if self.kernel2 is None or not self.kernel2.differentiable:
                raise KernelError("CROLoss-Lambda richiede kernel2 differenziabile")
        if self.family in (LossFamily.CROLOSS, LossFamily.CROLOSS_LAMBDA) and self.weighting is None:
            raise ConfigError("Le famiglie CROLoss richiedono una pesatura (alpha, |I|)")
        if self.family is LossFamily.TRIPLET and self.margin < 0:
            raise ConfigError(f"Margine triplet negativo: {self.margin}")

    @property
    def label(self) -> str:
        """Etichetta breve usata in tabelle e log."""
        if self.family is LossFamily.CROLOSS:
            return str(self.kernel)
        if self.family is LossFamily.CROLOSS_LAMBDA:
            return f"lambda:{self.kernel1}+{self.kernel2}"
        return self.family.value


@dataclass
class LossOutput:
    """
    value: somma sui positivi del batch
    grad_pos: dL/dS(u,v) per positivo, forma (B,)
    grad_neg: dL/dS(u,v_i), forma (B, K), zero nelle celle mascherate
    """
    value: float
    grad_pos: np.ndarray
    grad_neg: np.ndarray
    mask: np.ndarray

    def grad_neg_for(self, index: int) -> np.ndarray:
        return self.grad_neg[index][self.mask[index]]

    def scaled(self, factor: float) -> "LossOutput":
        return LossOutput(self.value * factor, self.grad_pos * factor, self.grad_neg * factor, self.mask)


def _assemble(value: float, grad_gap: np.ndarray, batch: GapBatch) -> LossOutput:
    grad_neg = np.where(batch.mask, grad_gap, 0.0)
    grad_pos = -grad_neg.sum(axis=1)
    return LossOutput(float(value), grad_pos, grad_neg, batch.mask)


def _rank_for_density(spec: LossSpec, ranks: np.ndarray) -> np.ndarray:
    # Sopra |I|+1 la densita' si legge appena sotto il bordo del supporto
    if not spec.clamp_rank:
        return ranks
    edge = np.nextafter(float(spec.weighting.upper), 0.0)
    return np.minimum(ranks, edge)


def croloss_forward(spec: LossSpec, batch_gaps) -> LossOutput:
    """
    L = sum_(u,v) W_alpha(R_hat_phi); dL/dg_i = w_alpha(R_hat_phi) * scale * phi'(g_i).
    """
    if spec.family is not LossFamily.CROLOSS:
        raise ConfigError(f"croloss_forward chiamata con famiglia {spec.family.value}")
    batch = as_gap_batch(batch_gaps)
    w = spec.weighting
    ranks = batch_rank_smooth(batch, spec.kernel)
    value = np.sum(w.cdf(ranks, clamp=spec.clamp_rank))
    lam = w.density(_rank_for_density(spec, ranks), clamp=spec.clamp_rank)
    grad_gap = lam[:, None] * batch_rank_smooth_grad(batch, spec.kernel)
    return _assemble(value, grad_gap, batch)


def croloss_lambda_forward(spec: LossSpec, batch_gaps) -> LossOutput:
    """
    Metodo Lambda: lambda = w_alpha(R_hat_phi1) trattato come costante,
    dL/dg_i = lambda * scale * phi2'(g_i), valore monitorato sum lambda * R_hat_phi2.
    """
    if spec.family is not LossFamily.CROLOSS_LAMBDA:
        raise ConfigError(f"croloss_lambda_forward chiamata con famiglia {spec.family.value}")
    batch = as_gap_batch(batch_gaps)
    w = spec.weighting
    ranks1 = batch_rank_smooth(batch, spec.kernel1)
    lam = w.density(_rank_for_density(spec, ranks1), clamp=spec.clamp_rank)
    ranks2 = batch_rank_smooth(batch, spec.kernel2)
    value = np.sum(lam * ranks2)
    grad_gap = lam[:, None] * batch_rank_smooth_grad(batch, spec.kernel2)
    return _assemble(value, grad_gap, batch)


def softmax_ce(batch_gaps) -> LossOutput:
    """
    -log softmax del positivo su {positivo} U negativi, stabilizzata con log-sum-exp.
    Lo score del positivo e' l'origine dei gap, quindi il suo logit vale 0.
    """
    batch = as_gap_batch(batch_gaps)
    logits = np.concatenate(
        [np.zeros((batch.num_positives, 1)), np.where(batch.mask, batch.gaps, -np.inf)], axis=1
    )
    value = np.sum(logsumexp(logits, axis=1))
    probs = softmax(logits, axis=1)
    return _assemble(value, probs[:, 1:], batch)


def triplet(batch_gaps, margin: float) -> LossOutput:
    """sum (g_i + m)_+ con subgradiente 1 nel punto angoloso."""
    if margin < 0:
        raise ConfigError(f"Margine triplet negativo: {margin}")
    batch = as_gap_batch(batch_gaps)
    hinge = np.where(batch.mask, np.maximum(batch.gaps + margin, 0.0), 0.0)
    grad_gap = (batch.gaps >= -margin).astype(np.float64)
    return _assemble(np.sum(hinge), grad_gap, batch)


def bpr(batch_gaps) -> LossOutput:
    """-sum ln sigma(-g_i) = sum softplus(g_i); gradiente sigma(g_i)."""
    batch = as_gap_batch(batch_gaps)
    value = np.sum(np.where(batch.mask, np.logaddexp(0.0, batch.gaps), 0.0))
    return _assemble(value, expit(batch.gaps), batch)


def compute_loss(spec: LossSpec, batch_gaps) -> LossOutput:
    """Dispatch unico su tutte le famiglie."""
    if spec.family is LossFamily.CROLOSS:
        return croloss_forward(spec, batch_gaps)
    if spec.family is LossFamily.CROLOSS_LAMBDA:
        return croloss_lambda_forward(spec, batch_gaps)
    if spec.family is LossFamily.SOFTMAX_CE:
        return softmax_ce(batch_gaps)
    if spec.family is LossFamily.TRIPLET:
        return triplet(batch_gaps, spec.margin)
    return bpr(batch_gaps)


def build_loss_spec(family: str, catalog_size: int, alpha: float, kernel: str = "softplus",
                    kernel1: str = "sigmoid", kernel2: str = "softplus", margin: float = 5.0,
                    clamp_rank: bool = True) -> LossSpec:
    """
    Costruisce una LossSpec dai valori testuali della configurazione.
    Il margine vale sia per il kernel hinge sia per la triplet.
    """
    try:
        fam = LossFamily(str(family).strip().lower())
    except ValueError:
        valid = ", ".join(f.value for f in LossFamily)
        raise ConfigError(f"Famiglia di loss sconosciuta '{family}' (valide: {valid})") from None

    weighting = make_weighting(alpha, catalog_size)
    if fam is LossFamily.CROLOSS:
        return LossSpec(fam, weighting, kernel=Kernel.from_name(kernel, margin), clamp_rank=clamp_rank)
    if fam is LossFamily.CROLOSS_LAMBDA:
        return LossSpec(fam, weighting, kernel1=Kernel.from_name(kernel1, margin),
                        kernel2=Kernel.from_name(kernel2, margin), clamp_rank=clamp_rank)
    return LossSpec(fam, weighting, margin=float(margin), clamp_rank=clamp_rank)
