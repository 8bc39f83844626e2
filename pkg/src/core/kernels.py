#!/usr/bin/env python3
"""
CROLAB Kernels
Famiglia dei kernel di confronto phi (e del gradino unitario psi) con valori e derivate prime
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Union

import numpy as np
from scipy.special import expit

from config.settings import HINGE_MARGIN
from src.system.errors import KernelError

ArrayLike = Union[float, np.ndarray]

# Griglia dei controlli di ammissibilita'
_GRID_LIMIT = 50.0
_GRID_POINTS = 10001


class KernelKind(Enum):
    UNIT_STEP = "unit_step"
    HINGE = "hinge"
    SIGMOID = "sigmoid"
    EXPONENTIAL = "exponential"
    SOFTPLUS = "softplus"


@dataclass(frozen=True)
class Kernel:
    """
    Kernel di confronto. Il margine e' usato solo da HINGE.
    """
    kind: KernelKind
    margin: float = 0.0

    def __post_init__(self):
        if self.kind is KernelKind.HINGE and self.margin < 0:
            raise KernelError(f"Margine hinge negativo: {self.margin}")

    @classmethod
    def from_name(cls, name: str, margin: float = HINGE_MARGIN) -> "Kernel":
        """Costruisce un kernel dal nome usato in configurazione."""
        try:
            kind = KernelKind(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in KernelKind)
            raise KernelError(f"Kernel sconosciuto '{name}' (validi: {valid})") from None
        if kind is not KernelKind.HINGE:
            margin = 0.0
        return cls(kind, float(margin))

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def differentiable(self) -> bool:
        return self.kind is not KernelKind.UNIT_STEP

    def eval(self, x: ArrayLike) -> ArrayLike:
        return eval_kernel(self, x)

    def deriv(self, x: ArrayLike) -> ArrayLike:
        return deriv(self, x)

    def __str__(self) -> str:
        if self.kind is KernelKind.HINGE:
            return f"hinge(m={self.margin:g})"
        return self.name


def _as_float(x: ArrayLike) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unwrap(result: np.ndarray, x: ArrayLike) -> ArrayLike:
    """Restituisce uno scalare Python se l'input era scalare."""
    if np.ndim(x) == 0:
        return float(result)
    return result


def eval_kernel(k: Kernel, x: ArrayLike) -> ArrayLike:
    """
    Valuta phi(x).

    Sigmoid e softplus passano per expit/logaddexp, che non vanno in
    overflow per nessun input finito.
    """
    z = _as_float(x)
    if k.kind is KernelKind.UNIT_STEP:
        out = (z >= 0).astype(np.float64)
    elif k.kind is KernelKind.HINGE:
        out = np.maximum(z + k.margin, 0.0)
    elif k.kind is KernelKind.SIGMOID:
        out = expit(z)
    elif k.kind is KernelKind.EXPONENTIAL:
        out = np.exp(z)
    else:
        out = np.logaddexp(0.0, z)
    return _unwrap(out, x)


def deriv(k: Kernel, x: ArrayLike) -> ArrayLike:
    """
    Derivata prima phi'(x). Nel punto angoloso dell'hinge (x = -m) vale 1.

    Raises:
        KernelError: se il kernel e' il gradino unitario
    """
    if not k.differentiable:
        raise KernelError("Il gradino unitario non e' differenziabile: ammesso solo come phi1 nel metodo Lambda")
    z = _as_float(x)
    if k.kind is KernelKind.HINGE:
        out = (z >= -k.margin).astype(np.float64)
    elif k.kind is KernelKind.SIGMOID:
        s = expit(z)
        out = s * (1.0 - s)
    elif k.kind is KernelKind.EXPONENTIAL:
        out = np.exp(z)
    else:
        out = expit(z)
    return _unwrap(out, x)


@dataclass
class AdmissibilityReport:
    """Esito dei controlli numerici i-v su un kernel."""
    kernel: Kernel
    conditions: Dict[str, bool] = field(default_factory=dict)
    phi_minus: float = 0.0
    phi_zero: float = 0.0
    phi_plus: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())

    def failed(self):
        return [name for name, ok in self.conditions.items() if not ok]


def is_admissible(k: Kernel) -> AdmissibilityReport:
    """
    Verifica numericamente le condizioni di kernel di confronto:
      i   differenziabile quasi ovunque
      ii  monotono non decrescente su [-50, 50]
      iii phi(-50) < 1e-6 * max(1, phi(0))
      iv  0.5 <= phi(0) <= 1
      v   phi(50) >= 1 (con tolleranza 1e-9, la sigmoide tende a 1 dal basso)
    """
    grid = np.linspace(-_GRID_LIMIT, _GRID_LIMIT, _GRID_POINTS)
    values = eval_kernel(k, grid)
    phi_zero = float(eval_kernel(k, 0.0))
    phi_minus = float(values[0])
    phi_plus = float(values[-1])

    if k.differentiable:
        cond_i = bool(np.all(np.isfinite(deriv(k, grid))))
    else:
        # Il gradino e' costante ovunque tranne che in 0
        cond_i = bool(np.all(np.isfinite(values)))

    report = AdmissibilityReport(kernel=k, phi_minus=phi_minus, phi_zero=phi_zero, phi_plus=phi_plus)
    report.conditions = {
        "i": cond_i,
        "ii": bool(np.all(np.diff(values) >= 0)),
        "iii": phi_minus < 1e-6 * max(1.0, phi_zero),
        "iv": 0.5 <= phi_zero <= 1.0,
        "v": phi_plus >= 1.0 - 1e-9,
    }
    return report
