#!/usr/bin/env python3
"""
CROLAB Optimizer
Adam con correzione del bias; aggiornamento sparso delle righe di embedding toccate
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from config.settings import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, LR
from src.system.errors import ShapeMismatchError

# Blocchi aggiornati solo sulle righe toccate dal batch
SPARSE_BLOCKS = ("item_embeddings",)


@dataclass
class AdamConfig:
    lr: float = LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS


@dataclass
class AdamState:
    """Momenti primo e secondo (densi) e contatore dei passi."""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: AdamState,
              cfg: AdamConfig, touched_rows: Optional[np.ndarray] = None) -> None:
    """
    Un passo di Adam, in place su params e state.

    Con touched_rows i blocchi in SPARSE_BLOCKS aggiornano solo quelle righe
    (momenti e parametri); il contatore dei passi resta globale.

    Raises:
        ShapeMismatchError: forme incongruenti
        FloatingPointError: NaN/Inf nei gradienti
    """
    for name, grad in grads.items():
        if name not in params or params[name].shape != grad.shape:
            raise ShapeMismatchError(f"Gradiente '{name}' {grad.shape} incompatibile con i parametri")
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"Gradiente non finito nel blocco '{name}'")
    if not state.m:
        fresh = AdamState.zeros_like(params)
        state.m, state.v = fresh.m, fresh.v

    state.step += 1
    correction1 = 1.0 - cfg.beta1 ** state.step
    correction2 = 1.0 - cfg.beta2 ** state.step

    for name, grad in grads.items():
        if touched_rows is not None and name in SPARSE_BLOCKS:
            rows = touched_rows
            g = grad[rows]
            m = cfg.beta1 * state.m[name][rows] + (1.0 - cfg.beta1) * g
            v = cfg.beta2 * state.v[name][rows] + (1.0 - cfg.beta2) * g * g
            state.m[name][rows] = m
            state.v[name][rows] = v
            params[name][rows] -= cfg.lr * (m / correction1) / (np.sqrt(v / correction2) + cfg.eps)
        else:
            m = state.m[name]
            v = state.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * grad
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * grad * grad
            params[name] -= cfg.lr * (m / correction1) / (np.sqrt(v / correction2) + cfg.eps)
