#!/usr/bin/env python3
"""
CROLAB Configuration
Impostazioni generali e valori di default del laboratorio CROLoss
"""

import os
from pathlib import Path

# Percorso base dell'applicazione
BASE_DIR = Path(__file__).parent.parent.absolute()

# Directory di lavoro
LOG_DIR = BASE_DIR / "logs"  # Directory per i log
RUNS_DIR = BASE_DIR / "runs"  # Directory di default per gli output delle run
CONFIG_DIR = BASE_DIR / "config"  # Directory per le configurazioni
DEFAULT_CONFIG_FILE = CONFIG_DIR / "default.yaml"

LOG_LEVEL = os.environ.get("CROLAB_LOG_LEVEL", "INFO")  # DEBUG, INFO, WARNING, ERROR, CRITICAL

# Sistema
REQUIRED_PACKAGES = [
    "numpy",
    "scipy",
    "yaml",
    "tqdm",
    "colorama",
    "psutil",
    "pyfiglet",
]  # Moduli Python richiesti (nome di importazione)

# Pacchetti da installare per ciascun modulo, quando il nome differisce
PACKAGE_NAMES = {
    "yaml": "PyYAML",
}

# UI
TERMINAL_COLORS = True  # Abilita/disabilita i colori nel terminale
SHOW_LOGO_ON_STARTUP = True  # Mostra il banner all'avvio dei comandi lunghi

# Modello
TAU = 10.0  # Scala del coseno, S(u,v) = tau * cos(u,v)
EMBED_DIM = 32
HIDDEN_DIM = 32
OUT_DIM = 32
EMBED_INIT_STD = 0.01

# Loss
ALPHA = 1.0
HINGE_MARGIN = 5.0
DEFAULT_KERNEL = "softplus"

# Dati
MAX_LEN = 20  # 20 per Amazon Books, 50 per Taobao
N_BS = 256
N_RN = 10
SPLIT_RATIOS = (8, 1, 1)

# Ottimizzatore
LR = 0.02
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Valutazione
RECALL_NS = (50, 100, 200, 500)
PIVOT_N = 50
EVAL_CHUNK_SIZE = 512

# Soglie numeriche
ALPHA_ONE_TOLERANCE = 1e-9  # |alpha - 1| sotto questa soglia usa il ramo logaritmico
NORM_EPS = 1e-12  # Norma minima nel coseno
