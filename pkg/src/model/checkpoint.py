#!/usr/bin/env python3
"""
CROLAB Checkpoint
Salvataggio e caricamento del modello a due torri (formato in docs/checkpoint_format.md)
"""

import json
from pathlib import Path
from typing import Union

import numpy as np

from src.model.two_tower import PARAM_NAMES, TwoTowerModel
from src.system.errors import ShapeMismatchError

CHECKPOINT_FORMAT = "crolab-two-tower"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: TwoTowerModel, path: Union[str, Path]) -> Path:
    """
    Scrive il modello in un archivio .npz non compresso.
    I float64 vengono salvati senza conversioni, quindi il round-trip e' bit-exact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "catalog_size": model.catalog_size,
        "embed_dim": model.embed_dim,
        "hidden_dim": model.hidden_dim,
        "out_dim": model.out_dim,
        "tau": model.tau,
        "shapes": {name: list(shape) for name, shape in model.shapes().items()},
    }
    arrays = {name: model.params[name] for name in PARAM_NAMES}
    with open(path, "wb") as f:
        np.savez(f, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    return path


def load_checkpoint(path: Union[str, Path]) -> TwoTowerModel:
    """
    Ricostruisce il modello da un checkpoint.

    Raises:
        ShapeMismatchError: se formato, versione o forme non corrispondono
    """
    with np.load(Path(path), allow_pickle=False) as archive:
        meta = json.loads(str(archive["__meta__"]))
        if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
            raise ShapeMismatchError(f"Checkpoint non riconosciuto: {meta.get('format')} v{meta.get('version')}")

        model = TwoTowerModel.__new__(TwoTowerModel)
        model.catalog_size = int(meta["catalog_size"])
        model.embed_dim = int(meta["embed_dim"])
        model.hidden_dim = int(meta["hidden_dim"])
        model.out_dim = int(meta["out_dim"])
        model.tau = float(meta["tau"])
        model.params = {}
        for name in PARAM_NAMES:
            value = archive[name]
            if list(value.shape) != meta["shapes"][name]:
                raise ShapeMismatchError(f"Forma di '{name}' {value.shape} diversa da {meta['shapes'][name]}")
            model.params[name] = value.copy()
    return model
