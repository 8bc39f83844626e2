#!/usr/bin/env python3
"""
CROLAB Run Configuration
Sezioni della configurazione di una run, caricamento YAML e override --set
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import yaml

from config import settings
from src.system.errors import ConfigError


@dataclass
class DataConfig:
    source: str = "file"  # file | synthetic
    path: str = ""
    delimiter: str = "\t"
    max_len: int = settings.MAX_LEN
    n_bs: int = settings.N_BS
    n_rn: int = settings.N_RN
    seed: int = 0
    eval_targets: str = "all"  # all | last
    synthetic_users: int = 5000
    synthetic_items: int = 2000
    synthetic_clusters: int = 20
    synthetic_min_len: int = 5
    synthetic_max_len: int = 30


@dataclass
class ModelConfig:
    embed_dim: int = settings.EMBED_DIM
    hidden_dim: int = settings.HIDDEN_DIM
    out_dim: int = settings.OUT_DIM
    tau: float = settings.TAU
    seed: int = 0


@dataclass
class LossConfig:
    family: str = "croloss"  # croloss | croloss_lambda | softmax | triplet | bpr
    kernel: str = settings.DEFAULT_KERNEL
    kernel1: str = "sigmoid"
    kernel2: str = "softplus"
    alpha: float = settings.ALPHA
    margin: float = settings.HINGE_MARGIN
    clamp_rank: bool = True


@dataclass
class TrainSection:
    lr: float = settings.LR
    beta1: float = settings.ADAM_BETA1
    beta2: float = settings.ADAM_BETA2
    eps: float = settings.ADAM_EPS
    epochs: int = 10
    eval_every: int = 200
    patience: int = 5
    pivot_n: int = settings.PIVOT_N
    average_loss: bool = True
    max_steps: int = 0  # 0 = nessun limite
    seed: int = 0


@dataclass
class EvalConfig:
    ns: List[int] = field(default_factory=lambda: list(settings.RECALL_NS))
    exclude_history: bool = False
    max_pairs: int = 0  # 0 = tutte le coppie
    chunk_size: int = settings.EVAL_CHUNK_SIZE


@dataclass
class SweepConfig:
    kernels: List[str] = field(default_factory=lambda: ["sigmoid", "softplus"])
    alphas: List[float] = field(default_factory=lambda: [0.6, 1.0, 1.4])
    baselines: List[str] = field(default_factory=list)
    seeds: List[int] = field(default_factory=lambda: [0])


SECTIONS = {
    "data": DataConfig,
    "model": ModelConfig,
    "loss": LossConfig,
    "train": TrainSection,
    "eval": EvalConfig,
    "sweep": SweepConfig,
}


@dataclass
class RunConfig:
    run_id: str = "crolab"
    output_dir: str = str(settings.RUNS_DIR)
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalConfig = field(default_factory=EvalConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @property
    def run_dir(self) -> Path:
        """<output_dir>/<run_id>; un output_dir relativo parte dalla radice del progetto."""
        base = Path(self.output_dir)
        if not base.is_absolute():
            base = settings.BASE_DIR / base
        return base / self.run_id

    def set_seed(self, seed: int) -> None:
        self.data.seed = int(seed)
        self.model.seed = int(seed)
        self.train.seed = int(seed)


def _coerce(value: Any, default: Any, key: str) -> Any:
    """Converte value nel tipo del valore di default del campo."""
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("true", "1", "yes", "on"):
                return True
            if str(value).lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            items = value if isinstance(value, list) else [v for v in str(value).split(",") if v.strip()]
            if default:
                return [_coerce(v, default[0], key) for v in items]
            return [str(v).strip() if isinstance(v, str) else v for v in items]
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Valore non valido per '{key}': {value!r}") from None


def _set_field(section: Any, section_name: str, key: str, value: Any) -> None:
    names = {f.name for f in dataclasses.fields(section)}
    if key not in names:
        raise ConfigError(f"Chiave sconosciuta '{section_name}.{key}'")
    setattr(section, key, _coerce(value, getattr(section, key), f"{section_name}.{key}"))


def config_from_dict(raw: Dict[str, Any]) -> RunConfig:
    """Costruisce una RunConfig rifiutando sezioni e chiavi sconosciute."""
    cfg = RunConfig()
    for name, value in (raw or {}).items():
        if name in SECTIONS:
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"La sezione '{name}' deve essere una mappa")
            section = getattr(cfg, name)
            for key, item in value.items():
                _set_field(section, name, key, item)
        elif name in ("run_id", "output_dir"):
            setattr(cfg, name, str(value))
        elif name == "seed":
            cfg.set_seed(_coerce(value, 0, "seed"))
        else:
            raise ConfigError(f"Sezione sconosciuta '{name}'")
    validate_config(cfg)
    return cfg


def load_config(path: Union[str, Path, None]) -> RunConfig:
    """Carica un file YAML; None restituisce la configurazione di default."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Impossibile leggere la configurazione {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"YAML non valido in {path}: {e}") from e
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"La configurazione {path} deve essere una mappa")
    return config_from_dict(raw)


def apply_overrides(cfg: RunConfig, overrides: Iterable[str]) -> RunConfig:
    """Applica override `sezione.chiave=valore` (valori interpretati come scalari YAML)."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"Override malformato '{item}' (atteso sezione.chiave=valore)")
        dotted, text = item.split("=", 1)
        try:
            value = yaml.safe_load(text) if text.strip() else ""
        except yaml.YAMLError:
            value = text
        parts = dotted.strip().split(".")
        if len(parts) == 1 and parts[0] in ("run_id", "output_dir"):
            setattr(cfg, parts[0], str(value))
        elif len(parts) == 1 and parts[0] == "seed":
            cfg.set_seed(_coerce(value, 0, "seed"))
        elif len(parts) == 2 and parts[0] in SECTIONS:
            _set_field(getattr(cfg, parts[0]), parts[0], parts[1], value)
        else:
            raise ConfigError(f"Chiave sconosciuta '{dotted}'")
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    """Controlli di dominio che non dipendono dal dataset."""
    t = cfg.train
    if not t.lr >= 0:
        raise ConfigError(f"train.lr deve essere >= 0, ricevuto {t.lr}")
    if not (0 < t.beta1 < 1 and 0 < t.beta2 < 1):
        raise ConfigError("train.beta1 e train.beta2 devono stare in (0, 1)")
    if t.epochs < 1 or t.eval_every < 1 or t.patience < 1:
        raise ConfigError("train.epochs, train.eval_every e train.patience devono essere >= 1")
    if cfg.loss.alpha < 0:
        raise ConfigError(f"loss.alpha deve essere >= 0, ricevuto {cfg.loss.alpha}")
    if cfg.data.source not in ("file", "synthetic"):
        raise ConfigError(f"data.source sconosciuta '{cfg.data.source}' (valide: file, synthetic)")
    if cfg.data.eval_targets not in ("all", "last"):
        raise ConfigError(f"data.eval_targets sconosciuta '{cfg.data.eval_targets}' (valide: all, last)")
    if not cfg.eval.ns or any(n < 1 for n in cfg.eval.ns):
        raise ConfigError("eval.ns deve contenere interi >= 1")


def dump_config(cfg: RunConfig, path: Union[str, Path]) -> Path:
    """Scrive la configurazione risolta, con chiavi ordinate."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(cfg.to_dict(), f, sort_keys=True, default_flow_style=False)
    return path
