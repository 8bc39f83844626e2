#!/usr/bin/env python3
"""
CROLAB Weighting
Famiglia di pesatura a potenza: densita' w_alpha, CDF W_alpha e normalizzatore Z
sul dominio dei rank [1, |I|+1)
"""

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from config.settings import ALPHA_ONE_TOLERANCE
from src.system.errors import WeightingError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Weighting:
    """
    Coppia (alpha, |I|) con normalizzatore Z derivato.
    Immutabile dopo la costruzione.
    """
    alpha: float
    catalog_size: int
    z: float = field(init=False)

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise WeightingError(f"alpha deve essere >= 0, ricevuto {self.alpha}")
        if int(self.catalog_size) != self.catalog_size or self.catalog_size < 1:
            raise WeightingError(f"catalog_size deve essere un intero >= 1, ricevuto {self.catalog_size}")
        object.__setattr__(self, "catalog_size", int(self.catalog_size))
        object.__setattr__(self, "z", _normalizer(self.alpha, self.upper))

    @property
    def upper(self) -> int:
        """Estremo superiore (escluso) del supporto: |I| + 1."""
        return self.catalog_size + 1

    @property
    def log_branch(self) -> bool:
        return abs(self.alpha - 1.0) < ALPHA_ONE_TOLERANCE

    def density(self, x: ArrayLike, clamp: bool = True) -> ArrayLike:
        return density(self, x, clamp=clamp)

    def cdf(self, n: ArrayLike, clamp: bool = True) -> ArrayLike:
        return cdf(self, n, clamp=clamp)


def _normalizer(alpha: float, upper: int) -> float:
    if alpha == 0.0:
        return float(upper - 1)
    # Z = ((|I|+1)^(1-a) - 1) / (1-a), con expm1 per restare precisi vicino ad a = 1
    log_upper = math.log(upper)
    if abs(alpha - 1.0) < ALPHA_ONE_TOLERANCE:
        return log_upper
    beta = 1.0 - alpha
    return math.expm1(beta * log_upper) / beta


def make_weighting(alpha: float, catalog_size: int) -> Weighting:
    """
    Costruisce la pesatura a potenza.

    Raises:
        WeightingError: se alpha < 0 o catalog_size < 1
    """
    return Weighting(float(alpha), catalog_size)


def _unwrap(result: np.ndarray, x: ArrayLike) -> ArrayLike:
    if np.ndim(x) == 0:
        return float(result)
    return result


def density(w: Weighting, x: ArrayLike, clamp: bool = True) -> ArrayLike:
    """
    w_alpha(x) = x^(-alpha) / Z.

    Con clamp=True: sotto 1 restituisce la densita' in 1, da |I|+1 in poi 0.
    Con clamp=False valuta la forma chiusa anche oltre |I|+1 (continuazione
    analitica, usata dalle identita' con le loss classiche).
    """
    xs = np.asarray(x, dtype=np.float64)
    base = np.maximum(xs, 1.0)
    out = np.exp(-w.alpha * np.log(base)) / w.z
    if clamp:
        out = np.where(xs >= w.upper, 0.0, out)
    return _unwrap(out, x)


def cdf(w: Weighting, n: ArrayLike, clamp: bool = True) -> ArrayLike:
    """
    W_alpha(n) = (n-1)/|I| se alpha = 0, ln(n)/ln(|I|+1) se alpha = 1, altrimenti
    (1 - n^(1-alpha)) / (1 - (|I|+1)^(1-alpha)).

    Vale esattamente 0 per n <= 1; con clamp=True vale esattamente 1 per n >= |I|+1.
    """
    ns = np.asarray(n, dtype=np.float64)
    base = np.maximum(ns, 1.0)
    log_n = np.log(base)
    if w.alpha == 0.0:
        out = (base - 1.0) / w.catalog_size
    elif w.log_branch:
        out = log_n / math.log(w.upper)
    else:
        beta = 1.0 - w.alpha
        out = np.expm1(beta * log_n) / math.expm1(beta * math.log(w.upper))
    out = np.where(ns <= 1.0, 0.0, out)
    if clamp:
        out = np.where(ns >= w.upper, 1.0, out)
    return _unwrap(out, n)
