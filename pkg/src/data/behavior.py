#!/usr/bin/env python3
"""
CROLAB Behavior Data
Lettura dei log di comportamento, split per utente e generazione dei campioni
next-item (i primi k comportamenti predicono il (k+1)-esimo)
"""

import gzip
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import SPLIT_RATIOS
from src.system.errors import ConfigError, DataFormatError
from src.system.logger import get_logger

logger = get_logger()

Event = Tuple[str, str, int]

EVAL_TARGET_MODES = ("all", "last")


@dataclass
class BehaviorLog:
    """
    Eventi (user_id, item_id, timestamp) con vocabolari contigui.
    sequences[u] contiene gli indici item dell'utente u ordinati per timestamp
    (a parita' di timestamp vale l'ordine del file).
    """
    events: List[Event]
    user_vocab: Dict[str, int] = field(default_factory=dict)
    item_vocab: Dict[str, int] = field(default_factory=dict)
    sequences: Dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "BehaviorLog":
        events = list(events)
        user_vocab: Dict[str, int] = {}
        item_vocab: Dict[str, int] = {}
        per_user: Dict[int, List[Tuple[int, int]]] = {}
        for user_id, item_id, ts in events:
            u = user_vocab.setdefault(user_id, len(user_vocab))
            i = item_vocab.setdefault(item_id, len(item_vocab))
            per_user.setdefault(u, []).append((ts, i))
        # sorted e' stabile: a parita' di timestamp resta l'ordine del file
        sequences = {
            u: np.array([i for _, i in sorted(rows, key=lambda r: r[0])], dtype=np.int64)
            for u, rows in per_user.items()
        }
        return cls(events, user_vocab, item_vocab, sequences)

    @property
    def catalog_size(self) -> int:
        return len(self.item_vocab)

    @property
    def num_users(self) -> int:
        return len(self.user_vocab)

    def users(self) -> np.ndarray:
        return np.arange(self.num_users, dtype=np.int64)


@dataclass(frozen=True)
class TrainingSample:
    user: int
    history: np.ndarray
    target: int


@dataclass
class UserSplit:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    def as_tuple(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.train, self.valid, self.test


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def ingest(path: Union[str, Path], delimiter: str = "\t", has_header: Optional[bool] = None) -> BehaviorLog:
    """
    Legge un file di righe `user_id <delim> item_id <delim> timestamp`.
    L'intestazione e' opzionale: con has_header=None viene riconosciuta quando il
    terzo campo della prima riga non e' un intero. I file .gz vengono decompressi.

    Raises:
        DataFormatError: riga malformata (con numero di riga) o file vuoto
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"File di dati non trovato: {path}")

    events: List[Event] = []
    with _open_text(path) as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or (line_number == 1 and has_header):
                continue
            fields = line.split(delimiter)
            if len(fields) != 3:
                raise DataFormatError(f"attesi 3 campi, trovati {len(fields)}", line_number)
            user_id, item_id, ts_text = (part.strip() for part in fields)
            try:
                ts = int(ts_text)
            except ValueError:
                if line_number == 1 and has_header is not False:
                    continue
                raise DataFormatError(f"timestamp non intero '{ts_text}'", line_number) from None
            if not user_id or not item_id:
                raise DataFormatError("user_id o item_id vuoto", line_number)
            events.append((user_id, item_id, ts))

    if not events:
        raise DataFormatError(f"Nessun evento in {path}")

    log = BehaviorLog.from_events(events)
    logger.info(f"Letti {len(events)} eventi: {log.num_users} utenti, {log.catalog_size} item")
    return log


def write_log(log: BehaviorLog, path: Union[str, Path], delimiter: str = "\t") -> Path:
    """Scrive il log nel formato di ingest, con intestazione."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8") as f:
        f.write(delimiter.join(("user_id", "item_id", "timestamp")) + "\n")
        for user_id, item_id, ts in log.events:
            f.write(f"{user_id}{delimiter}{item_id}{delimiter}{ts}\n")
    return path


def split_users(log: BehaviorLog, ratios: Sequence[float] = SPLIT_RATIOS, seed: int = 0) -> UserSplit:
    """
    Mescola gli utenti con un seme e li divide nelle proporzioni date (8:1:1).
    Ogni parte riceve almeno un utente.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if len(ratios) != 3 or np.any(ratios <= 0):
        raise ConfigError(f"Servono tre proporzioni positive, ricevute {ratios.tolist()}")
    n = log.num_users
    if n < len(ratios):
        raise DataFormatError(f"{n} utenti non bastano per {len(ratios)} partizioni")

    bounds = np.rint(np.cumsum(ratios) / ratios.sum() * n).astype(np.int64)
    sizes = np.diff(np.concatenate([[0], bounds]))
    while np.any(sizes == 0):
        sizes[np.argmax(sizes)] -= 1
        sizes[np.argmin(sizes)] += 1

    order = np.random.default_rng(seed).permutation(n)
    cuts = np.cumsum(sizes)[:-1]
    train, valid, test = (np.sort(part) for part in np.split(order, cuts))
    return UserSplit(train, valid, test)


def make_samples(log: BehaviorLog, users: Iterable[int], max_len: int,
                 targets: str = "all") -> List[TrainingSample]:
    """
    Per ogni utente con almeno 2 eventi e per ogni k in [1, len-1]:
    storia = ultimi min(k, max_len) eventi prima della posizione k+1, target = evento k+1.
    Con targets="last" viene tenuta solo l'ultima posizione.
    """
    if max_len < 1:
        raise ConfigError(f"max_len deve essere >= 1, ricevuto {max_len}")
    if targets not in EVAL_TARGET_MODES:
        raise ConfigError(f"Modalita' target sconosciuta '{targets}' (valide: all, last)")

    samples: List[TrainingSample] = []
    for user in users:
        seq = log.sequences.get(int(user))
        if seq is None or len(seq) < 2:
            continue
        positions = range(1, len(seq)) if targets == "all" else (len(seq) - 1,)
        for k in positions:
            history = seq[max(0, k - max_len):k]
            samples.append(TrainingSample(int(user), history, int(seq[k])))
    return samples


@dataclass
class DatasetSplit:
    """Campioni di train/validazione/test costruiti una volta e condivisi in sola lettura."""
    log: BehaviorLog
    users: UserSplit
    train: List[TrainingSample]
    valid: List[TrainingSample]
    test: List[TrainingSample]
    eval_targets: str = "all"

    @property
    def catalog_size(self) -> int:
        return self.log.catalog_size


def build_dataset(log: BehaviorLog, max_len: int, seed: int, eval_targets: str = "all",
                  ratios: Sequence[float] = SPLIT_RATIOS) -> DatasetSplit:
    """Split per utente e generazione dei campioni per le tre parti."""
    users = split_users(log, ratios, seed)
    dataset = DatasetSplit(
        log=log,
        users=users,
        train=make_samples(log, users.train, max_len, "all"),
        valid=make_samples(log, users.valid, max_len, eval_targets),
        test=make_samples(log, users.test, max_len, eval_targets),
        eval_targets=eval_targets,
    )
    logger.info(
        f"Campioni: train {len(dataset.train)}, validazione {len(dataset.valid)}, "
        f"test {len(dataset.test)} (target di valutazione: {eval_targets})"
    )
    return dataset
