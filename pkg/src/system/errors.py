#!/usr/bin/env python3
"""
CROLAB Errors
Gerarchia delle eccezioni del laboratorio
"""

from typing import Optional


class CrolabError(Exception):
    """Eccezione base di tutto il progetto."""


class ConfigError(CrolabError):
    """Configurazione non valida (chiave sconosciuta, override malformato, valore fuori dominio)."""


class DataFormatError(CrolabError):
    """File di comportamenti illeggibile o malformato."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"riga {line_number}: {message}"
        super().__init__(message)


class KernelError(CrolabError):
    """Kernel sconosciuto o usato dove serve la derivata."""


class WeightingError(CrolabError):
    """Parametri della pesatura fuori dominio."""


class RankingError(CrolabError):
    """Statistica di ranking non definita per l'input dato."""


class ShapeMismatchError(CrolabError):
    """Forme incompatibili tra cache, gradienti o parametri."""


class EvaluationError(CrolabError):
    """Valutazione impossibile (N fuori intervallo, valori non finiti)."""


class TrainingAbortedError(CrolabError):
    """Loss o gradiente non finito durante il training."""

    def __init__(self, message: str, batch_id: int, block: str):
        self.batch_id = batch_id
        self.block = block
        super().__init__(f"{message} (batch {batch_id}, blocco '{block}')")
