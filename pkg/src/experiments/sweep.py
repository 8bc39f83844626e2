#!/usr/bin/env python3
"""
CROLAB Sweep
Griglia kernel x alpha (piu' righe di riferimento), esecuzione delle celle
in sequenza o con un pool di processi, tabella consolidata e risultati JSONL.
"""

import copy
import json
import multiprocessing
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from src.core.kernels import Kernel
from src.core.losses import LossFamily
from src.data.behavior import DatasetSplit
from src.evaluation.recall import EvalReport
from src.experiments.runner import run_experiment
from src.graphics.tables import render_table
from src.system.config import RunConfig, validate_config
from src.system.errors import ConfigError, CrolabError
from src.system.logger import get_logger

logger = get_logger()

RESULTS_FILE = "sweep_results.jsonl"
TABLE_FILE = "sweep_table.txt"
BASELINE_FAMILIES = ("softmax", "triplet", "bpr")
BEST_IN_ROW = "*"
BEST_OVERALL = "^"
# kernel di CROLoss che ricalca ciascuna loss classica
KERNEL_COUNTERPARTS = {"hinge": "triplet", "softplus": "bpr"}

PRESETS = {
    "kernels": {
        "kernels": ["hinge", "sigmoid", "exponential", "softplus", "lambda:sigmoid+softplus"],
        "alphas": [0.6, 0.8, 1.0, 1.2],
        "baselines": ["softmax"],
    },
    "lambda": {
        "kernels": [f"lambda:{k1}+{k2}" for k1 in ("unit_step", "sigmoid")
                    for k2 in ("hinge", "exponential", "softplus")],
        "alphas": None,  # un solo alpha, quello di loss.alpha
        "baselines": [],
    },
    "mining": {
        "kernels": ["hinge", "sigmoid", "softplus", "exponential"],
        "alphas": [0.0, 1.0],
        "baselines": ["triplet", "bpr"],
    },
}


@dataclass(frozen=True)
class GridCell:
    """Una cella della griglia; per le righe di riferimento alpha e' None."""
    label: str
    family: str
    alpha: Optional[float]
    seed: int
    kernel: str = ""
    kernel1: str = ""
    kernel2: str = ""

    @property
    def slug(self) -> str:
        alpha = "base" if self.alpha is None else f"a{self.alpha:g}"
        name = self.label.replace(":", "-").replace("+", "-")
        return f"{name}_{alpha}_s{self.seed}"


@dataclass
class CellResult:
    cell: GridCell
    status: str = "ok"
    error: str = ""
    test_recall: Dict[int, float] = field(default_factory=dict)
    best_step: int = 0
    steps: int = 0

    def to_record(self) -> Dict:
        record = asdict(self.cell)
        record.update({
            "status": self.status,
            "error": self.error,
            "test_recall": {str(n): r for n, r in sorted(self.test_recall.items())},
            "best_step": self.best_step,
            "steps": self.steps,
        })
        return record


@dataclass
class SweepOutcome:
    results: List[CellResult]
    table: str
    ns: List[int]

    @property
    def failed(self) -> List[CellResult]:
        return [r for r in self.results if r.status != "ok"]


# ----------------------------------------------------------------------
# Griglia
# ----------------------------------------------------------------------
def _split_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def parse_grid(text: str) -> Dict[str, List]:
    """
    `kernels=sigmoid,lambda:sigmoid+exponential;alphas=0.6,1.2;baselines=softmax;seeds=0,1`
    Le chiavi assenti restano fuori dal dizionario.
    """
    grid: Dict[str, List] = {}
    for chunk in (c for c in text.split(";") if c.strip()):
        if "=" not in chunk:
            raise ConfigError(f"Elemento di griglia malformato '{chunk}' (atteso chiave=valori)")
        key, values = (part.strip() for part in chunk.split("=", 1))
        items = _split_list(values)
        try:
            if key == "alphas":
                grid[key] = [float(v) for v in items]
            elif key == "seeds":
                grid[key] = [int(v) for v in items]
            elif key in ("kernels", "baselines"):
                grid[key] = items
            else:
                raise ConfigError(f"Chiave di griglia sconosciuta '{key}'")
        except ValueError:
            raise ConfigError(f"Valori non validi per '{key}': {values}") from None
    return grid


def _kernel_cell(entry: str, alpha: float, seed: int, margin: float) -> GridCell:
    entry = entry.strip().lower()
    try:
        if entry.startswith("lambda:"):
            k1, sep, k2 = entry[len("lambda:"):].partition("+")
            if not sep:
                raise ConfigError(f"Cella lambda malformata '{entry}' (atteso lambda:<phi1>+<phi2>)")
            Kernel.from_name(k1, margin)
            if not Kernel.from_name(k2, margin).differentiable:
                raise ConfigError(f"phi2 deve essere differenziabile in '{entry}'")
            return GridCell(entry, LossFamily.CROLOSS_LAMBDA.value, alpha, seed, kernel1=k1, kernel2=k2)
        if not Kernel.from_name(entry, margin).differentiable:
            raise ConfigError(f"Il kernel '{entry}' serve solo come phi1 di una cella lambda")
    except CrolabError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e
    return GridCell(entry, LossFamily.CROLOSS.value, alpha, seed, kernel=entry)


def expand_grid(cfg: RunConfig, grid: Optional[Dict[str, List]] = None,
                preset: Optional[str] = None) -> List[GridCell]:
    """Celle della sweep: preset, poi --grid, poi la sezione sweep della configurazione."""
    spec = {"kernels": list(cfg.sweep.kernels), "alphas": list(cfg.sweep.alphas),
            "baselines": list(cfg.sweep.baselines), "seeds": list(cfg.sweep.seeds)}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"Preset sconosciuto '{preset}' (validi: {', '.join(PRESETS)})")
        chosen = PRESETS[preset]
        spec["kernels"] = list(chosen["kernels"])
        spec["alphas"] = list(chosen["alphas"]) if chosen["alphas"] is not None else [cfg.loss.alpha]
        spec["baselines"] = list(chosen["baselines"])
    spec.update(grid or {})

    for base in spec["baselines"]:
        if base not in BASELINE_FAMILIES:
            raise ConfigError(f"Riferimento sconosciuto '{base}' (validi: {', '.join(BASELINE_FAMILIES)})")
    if any(a < 0 for a in spec["alphas"]):
        raise ConfigError("Gli alpha della griglia devono essere >= 0")
    if spec["kernels"] and not spec["alphas"]:
        raise ConfigError("Griglia senza alpha")

    cells: List[GridCell] = []
    for seed in spec["seeds"]:
        for entry in spec["kernels"]:
            for alpha in spec["alphas"]:
                cells.append(_kernel_cell(entry, float(alpha), int(seed), cfg.loss.margin))
        for base in spec["baselines"]:
            cells.append(GridCell(base, base, None, int(seed)))
    if not cells:
        raise ConfigError("La griglia della sweep e' vuota")
    return cells


def cell_config(cfg: RunConfig, cell: GridCell) -> RunConfig:
    """Configurazione della cella: loss e semi cambiano, dataset e resto restano."""
    local = copy.deepcopy(cfg)
    local.loss.family = cell.family
    if cell.kernel:
        local.loss.kernel = cell.kernel
    if cell.kernel1:
        local.loss.kernel1, local.loss.kernel2 = cell.kernel1, cell.kernel2
    if cell.alpha is not None:
        local.loss.alpha = cell.alpha
    local.model.seed = cell.seed
    local.train.seed = cell.seed
    local.run_id = f"{cfg.run_id}/{cell.slug}"
    validate_config(local)
    return local


# ----------------------------------------------------------------------
# Esecuzione
# ----------------------------------------------------------------------
def run_cell(cfg: RunConfig, cell: GridCell, dataset: DatasetSplit,
             cells_dir: Union[str, Path, None] = None) -> CellResult:
    """Esegue una cella; un errore viene registrato e non interrompe la sweep."""
    try:
        local = cell_config(cfg, cell)
        run_dir = Path(cells_dir) / cell.slug if cells_dir is not None else None
        outcome = run_experiment(local, dataset, run_dir, progress=False)
        return CellResult(cell, "ok", "", dict(outcome.test_report.recall_at),
                          outcome.training.best_step, outcome.training.steps)
    except Exception as e:  # la cella fallisce da sola
        logger.log_exception(e, f"Cella {cell.slug} fallita")
        return CellResult(cell, "failed", f"{type(e).__name__}: {e}")


_WORKER_STATE: Dict[str, object] = {}


def _init_worker(cfg: RunConfig, dataset: DatasetSplit, cells_dir) -> None:
    _WORKER_STATE.update(cfg=cfg, dataset=dataset, cells_dir=cells_dir)


def _run_in_worker(cell: GridCell) -> CellResult:
    return run_cell(_WORKER_STATE["cfg"], cell, _WORKER_STATE["dataset"], _WORKER_STATE["cells_dir"])


def run_cells(cfg: RunConfig, cells: Sequence[GridCell], dataset: DatasetSplit, jobs: int = 1,
              cells_dir: Union[str, Path, None] = None) -> List[CellResult]:
    """Risultati nell'ordine delle celle, qualunque sia jobs."""
    if jobs <= 1 or len(cells) == 1:
        return [run_cell(cfg, cell, dataset, cells_dir) for cell in tqdm(cells, desc="sweep")]
    with multiprocessing.Pool(processes=min(jobs, len(cells)), initializer=_init_worker,
                              initargs=(cfg, dataset, cells_dir)) as pool:
        return list(tqdm(pool.imap(_run_in_worker, cells), total=len(cells), desc="sweep"))


# ----------------------------------------------------------------------
# Tabella consolidata
# ----------------------------------------------------------------------
def _mean_recalls(results: Sequence[CellResult]) -> Dict[Tuple[str, Optional[float]], Dict[int, float]]:
    """Media sui semi delle celle riuscite, per (etichetta, alpha)."""
    grouped: Dict[Tuple[str, Optional[float]], List[Dict[int, float]]] = {}
    for r in results:
        key = (r.cell.label, r.cell.alpha)
        grouped.setdefault(key, [])
        if r.status == "ok":
            grouped[key].append(r.test_recall)
    means = {}
    for key, runs in grouped.items():
        if runs:
            means[key] = {n: float(np.mean([run[n] for run in runs])) for n in runs[0]}
    return means


def build_table(results: Sequence[CellResult], ns: Sequence[int], color: bool = False) -> str:
    """
    Righe = kernel (e riferimenti), colonne = alpha x N. Marcatori: `*` migliore
    della riga per ogni N, `^` migliore complessivo per ogni N fra le celle CROLoss.
    Seguono il guadagno relativo del migliore di ogni riga sul softmax e, con le
    righe triplet e bpr, quello di hinge e softplus sulla loss classica corrispondente.
    """
    ns = sorted(ns)
    means = _mean_recalls(results)
    labels: List[str] = []
    alphas: List[float] = []
    for r in results:
        if r.cell.label not in labels:
            labels.append(r.cell.label)
        if r.cell.alpha is not None and r.cell.alpha not in alphas:
            alphas.append(r.cell.alpha)
    alphas = sorted(alphas)
    baselines = {r.cell.label for r in results if r.cell.alpha is None}
    columns = [(a, n) for a in alphas for n in ns] or [(None, n) for n in ns]

    def value(label: str, alpha: Optional[float], n: int) -> Optional[float]:
        key = (label, None) if label in baselines else (label, alpha)
        return means.get(key, {}).get(n)

    overall = {}
    for n in ns:
        vals = [value(l, a, n) for l in labels if l not in baselines for a in alphas]
        vals = [v for v in vals if v is not None]
        overall[n] = max(vals) if vals else None

    rows, highlight = [], set()
    for r_index, label in enumerate(labels):
        row_best = {}
        for n in ns:
            vals = [value(label, a, n) for a in alphas] if label not in baselines else []
            vals = [v for v in vals if v is not None]
            row_best[n] = max(vals) if vals else None
        row = [label]
        for c_index, (alpha, n) in enumerate(columns, start=1):
            v = value(label, alpha, n)
            if v is None:
                row.append("FAIL" if (label, None if label in baselines else alpha) not in means else "-")
                continue
            text = f"{100.0 * v:.2f}"
            if label not in baselines and v == row_best[n]:
                text += BEST_IN_ROW
            if label not in baselines and v == overall[n]:
                text += BEST_OVERALL
                highlight.add((r_index, c_index))
            row.append(text)
        rows.append(row)

    headers = ["kernel"] + [f"R@{n}" if a is None else f"a={a:g} R@{n}" for a, n in columns]
    text = render_table(headers, rows, highlight=highlight, color=color)

    def row_report(label: str, alpha: Optional[float] = None) -> Optional[EvalReport]:
        # alpha None su una riga CROLoss = migliore alpha per ogni N
        if label in baselines:
            recall = dict(means.get((label, None), {}))
        elif alpha is not None:
            recall = dict(means.get((label, alpha), {}))
        else:
            recall = {}
            for n in ns:
                vals = [v for v in (value(label, a, n) for a in alphas) if v is not None]
                if vals:
                    recall[n] = max(vals)
        return EvalReport(recall, 0) if recall else None

    def gain_row(name: str, report: Optional[EvalReport], base: Optional[EvalReport]) -> List[str]:
        gains = report.improvement_over(base) if report and base else {}
        return [name] + [f"{100.0 * gains[n]:+.2f}%" if n in gains else "-" for n in ns]

    gain_headers = ["kernel"] + [f"R@{n}" for n in ns]
    if "softmax" in baselines and alphas:
        softmax = row_report("softmax")
        gain_rows = [gain_row(label, row_report(label), softmax) for label in labels if label not in baselines]
        text += "\n\nGuadagno relativo sul softmax (migliore alpha per riga)\n"
        text += render_table(gain_headers, gain_rows)

    pairs = [(k, b) for k, b in KERNEL_COUNTERPARTS.items() if k in labels and b in baselines]
    if pairs and alphas:
        ref_alpha = 1.0 if 1.0 in alphas else None
        gain_rows = [gain_row(f"{k} -> {b}", row_report(k, ref_alpha), row_report(b)) for k, b in pairs]
        where = "alpha=1" if ref_alpha is not None else "migliore alpha"
        text += f"\n\nGuadagno del kernel sulla loss classica corrispondente ({where})\n"
        text += render_table(gain_headers, gain_rows)
    return text + "\n"


def run_sweep(cfg: RunConfig, dataset: DatasetSplit, cells: Sequence[GridCell], jobs: int = 1,
              output_dir: Union[str, Path, None] = None, color: bool = False) -> SweepOutcome:
    """Esegue tutte le celle sullo stesso dataset e scrive risultati e tabella."""
    out = Path(output_dir) if output_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    results = run_cells(cfg, cells, dataset, jobs, out / "cells" if out is not None else None)
    ns = sorted(int(n) for n in cfg.eval.ns)
    outcome = SweepOutcome(results, build_table(results, ns), ns)

    if out is not None:
        with open(out / RESULTS_FILE, "w", encoding="utf-8") as f:
            for r in results:
                f.write(json.dumps(r.to_record(), sort_keys=True) + "\n")
        with open(out / TABLE_FILE, "w", encoding="utf-8") as f:
            f.write(outcome.table)
    for r in outcome.failed:
        logger.error(f"Cella fallita {r.cell.slug}: {r.error}")
    if color:
        outcome.table = build_table(results, ns, color=True)
    return outcome
