#!/usr/bin/env python3
"""
CROLAB Batching
Mini-batch con negativi condivisi: n_rn * n_bs item uniformi per batch,
confrontati con ogni positivo del batch
"""

from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import numpy as np

from src.data.behavior import TrainingSample
from src.system.errors import ConfigError


@dataclass(frozen=True)
class Batch:
    """
    Gruppo di campioni con il loro insieme di negativi condivisi.
    Un negativo uguale al target di un campione vale solo per gli altri campioni.
    """
    batch_id: int
    epoch: int
    histories: Tuple[np.ndarray, ...]
    targets: np.ndarray
    negatives: np.ndarray

    @property
    def size(self) -> int:
        return len(self.targets)


def make_batches(samples: Sequence[TrainingSample], n_bs: int, n_rn: int, catalog_size: int,
                 seed: int, epoch: int = 0) -> Iterator[Batch]:
    """
    Un'epoca di batch: mescolamento con seme (seed, epoch), gruppi consecutivi di
    n_bs campioni (l'ultimo batch parziale resta), negativi con reinserimento.
    """
    if n_bs < 1 or n_rn < 1:
        raise ConfigError(f"n_bs e n_rn devono essere >= 1 (ricevuti {n_bs}, {n_rn})")
    rng = np.random.default_rng([seed, epoch])
    order = rng.permutation(len(samples))
    for batch_id, start in enumerate(range(0, len(order), n_bs)):
        chosen = [samples[i] for i in order[start:start + n_bs]]
        negatives = rng.integers(0, catalog_size, size=n_rn * len(chosen), dtype=np.int64)
        yield Batch(
            batch_id=batch_id,
            epoch=epoch,
            histories=tuple(s.history for s in chosen),
            targets=np.array([s.target for s in chosen], dtype=np.int64),
            negatives=negatives,
        )
