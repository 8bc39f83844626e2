#!/usr/bin/env python3
"""
CROLAB Synthetic Data
Log di comportamento sintetici a cluster latenti, per esperimenti da scrivania
"""

import numpy as np

from src.data.behavior import BehaviorLog


def make_synthetic_log(users: int = 5000, items: int = 2000, clusters: int = 20,
                       min_len: int = 5, max_len: int = 30, seed: int = 0,
                       noise: float = 0.1, secondary_prob: float = 0.5) -> BehaviorLog:
    """
    Genera un log a cluster:
    - ogni item appartiene a un cluster, con popolarita' Zipf dentro il cluster;
    - ogni utente preferisce un cluster primario e, con probabilita'
      secondary_prob, un secondario (pesi 0.7 / 0.3);
    - una frazione noise degli eventi e' uniforme sul catalogo.
    """
    if clusters < 1 or items < clusters:
        raise ValueError(f"Servono almeno {clusters} item per {clusters} cluster")
    if not 1 <= min_len <= max_len:
        raise ValueError(f"Lunghezze non valide: min_len={min_len}, max_len={max_len}")

    rng = np.random.default_rng(seed)
    assignment = rng.permutation(items) % clusters
    members = [np.flatnonzero(assignment == c) for c in range(clusters)]
    popularity = []
    for group in members:
        weights = 1.0 / np.arange(1, len(group) + 1)
        popularity.append(weights / weights.sum())

    events = []
    for user in range(users):
        primary = rng.integers(clusters)
        if rng.random() < secondary_prob and clusters > 1:
            secondary = (primary + 1 + rng.integers(clusters - 1)) % clusters
            prefs, mix = (primary, secondary), (0.7, 0.3)
        else:
            prefs, mix = (primary,), (1.0,)

        length = int(rng.integers(min_len, max_len + 1))
        for ts in range(length):
            if rng.random() < noise:
                item = int(rng.integers(items))
            else:
                cluster = prefs[rng.choice(len(prefs), p=mix)]
                item = int(rng.choice(members[cluster], p=popularity[cluster]))
            events.append((f"u{user}", f"i{item}", ts))

    return BehaviorLog.from_events(events)
