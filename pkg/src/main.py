#!/usr/bin/env python3
"""
CROLAB - Command Line
Sottocomandi train, eval, sweep, gradcheck e inspect-data.
Codici di uscita: 0 successo, 1 uso/configurazione, 2 errore di esecuzione, 3 controllo fallito.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

# Aggiungi il percorso base al PATH
base_path = Path(__file__).parent.parent.absolute()
if str(base_path) not in sys.path:
    sys.path.insert(0, str(base_path))

from config import settings
from src.system.config import RunConfig, apply_overrides, load_config
from src.system.errors import ConfigError, CrolabError
from src.system.logger import get_logger, setup_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3

logger = get_logger()


class CrolabArgumentParser(argparse.ArgumentParser):
    """Gli errori d'uso diventano ConfigError (uscita 1) invece di SystemExit(2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> CrolabArgumentParser:
    parser = CrolabArgumentParser(prog="crolab", description="CROLoss: training e valutazione di retrieval")
    parser.add_argument("--no-banner", action="store_true", help="non stampare il banner")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="file YAML della run")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SEZ.CHIAVE=VAL",
                       help="override ripetibile")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output-dir", default=None)
        return p

    common(sub.add_parser("train", help="addestra e valuta sul test"))
    p_eval = common(sub.add_parser("eval", help="valuta un checkpoint sul test"))
    p_eval.add_argument("--checkpoint", required=True)
    p_sweep = common(sub.add_parser("sweep", help="griglia kernel x alpha"))
    p_sweep.add_argument("--grid", default=None, help="es. kernels=sigmoid,softplus;alphas=0.6,1.2")
    p_sweep.add_argument("--preset", default=None, help="kernels, lambda, mining")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_grad = common(sub.add_parser("gradcheck", help="batteria di controlli numerici"))
    p_grad.add_argument("--quick", action="store_true", help="sottoinsieme veloce")
    p_inspect = common(sub.add_parser("inspect-data", help="statistiche del dataset"))
    p_inspect.add_argument("--export", default=None, metavar="PATH", help="scrive il log nel formato di ingest")
    return parser


def resolve_config(args) -> RunConfig:
    """File (default config/default.yaml), poi override --set, poi --seed e --output-dir."""
    path = args.config
    if path is None and settings.DEFAULT_CONFIG_FILE.exists():
        path = settings.DEFAULT_CONFIG_FILE
    cfg = load_config(path)
    apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg.set_seed(args.seed)
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    return cfg


class CrolabCLI:
    """Esegue un sottocomando con la configurazione risolta."""

    def __init__(self, args, cfg: RunConfig, color: bool = True):
        self.args = args
        self.cfg = cfg
        self.color = color

    def run(self) -> int:
        handlers = {
            "train": self.cmd_train,
            "eval": self.cmd_eval,
            "sweep": self.cmd_sweep,
            "gradcheck": self.cmd_gradcheck,
            "inspect-data": self.cmd_inspect_data,
        }
        return handlers[self.args.command]()

    def cmd_train(self) -> int:
        from src.experiments.runner import prepare_dataset, render_report, run_experiment

        # il dataset viene validato prima di creare qualsiasi output
        dataset = prepare_dataset(self.cfg)
        result = run_experiment(self.cfg, dataset, self.cfg.run_dir, progress=True)
        print(render_report(result.test_report))
        print(f"Passo migliore: {result.training.best_step} su {result.training.steps}")
        return EXIT_OK

    def cmd_eval(self) -> int:
        from src.experiments.runner import prepare_dataset, render_report
        from src.evaluation.recall import recall_at_n
        from src.model.checkpoint import load_checkpoint
        from src.system.errors import ShapeMismatchError

        model = load_checkpoint(self.args.checkpoint)
        dataset = prepare_dataset(self.cfg)
        if model.catalog_size != dataset.catalog_size:
            raise ShapeMismatchError(
                f"Checkpoint con catalogo {model.catalog_size}, dataset con {dataset.catalog_size} item")
        report = recall_at_n(model, dataset.test, self.cfg.eval.ns, self.cfg.eval.exclude_history,
                             mode=dataset.eval_targets, chunk_size=self.cfg.eval.chunk_size,
                             max_pairs=self.cfg.eval.max_pairs)
        print(render_report(report))
        print(json.dumps(report.to_record(), sort_keys=True))
        return EXIT_OK

    def cmd_sweep(self) -> int:
        from src.experiments.runner import prepare_dataset
        from src.experiments.sweep import expand_grid, parse_grid, run_sweep

        grid = parse_grid(self.args.grid) if self.args.grid else None
        cells = expand_grid(self.cfg, grid, self.args.preset)
        if self.args.jobs < 1:
            raise ConfigError(f"--jobs deve essere >= 1, ricevuto {self.args.jobs}")
        dataset = prepare_dataset(self.cfg)
        logger.info(f"Sweep di {len(cells)} celle con {self.args.jobs} processi")
        outcome = run_sweep(self.cfg, dataset, cells, self.args.jobs, self.cfg.run_dir, color=self.color)
        print(outcome.table)
        if outcome.failed:
            print(f"Celle fallite: {', '.join(r.cell.slug for r in outcome.failed)}")
            return EXIT_CHECK_FAILED
        return EXIT_OK

    def cmd_gradcheck(self) -> int:
        from src.evaluation.gradcheck import run_battery
        from src.graphics.tables import status_mark

        seed = self.args.seed if self.args.seed is not None else self.cfg.train.seed
        results = run_battery(quick=self.args.quick, seed=seed)
        for r in results:
            detail = f"  {r.detail}" if r.detail else ""
            print(f"{status_mark(r.passed, self.color)} {r.name:<40} errore {r.error:.3g}{detail}")
        failed = [r for r in results if not r.passed]
        print(f"\n{len(results) - len(failed)}/{len(results)} controlli superati")
        return EXIT_CHECK_FAILED if failed else EXIT_OK

    def cmd_inspect_data(self) -> int:
        from src.experiments.runner import export_dataset, prepare_dataset
        from src.graphics.tables import render_table

        dataset = prepare_dataset(self.cfg)
        log = dataset.log
        lengths = np.array([len(seq) for seq in log.sequences.values()])
        quantiles = np.quantile(lengths, [0.0, 0.25, 0.5, 0.75, 1.0])
        rows = [
            ["utenti", str(log.num_users)],
            ["item", str(log.catalog_size)],
            ["eventi", str(len(log.events))],
            ["lunghezze min/q1/med/q3/max", "/".join(f"{q:g}" for q in quantiles)],
            ["utenti train/valid/test", "/".join(str(len(u)) for u in dataset.users.as_tuple())],
            ["campioni train/valid/test", f"{len(dataset.train)}/{len(dataset.valid)}/{len(dataset.test)}"],
        ]
        print(render_table(["statistica", "valore"], rows))
        if self.args.export:
            path = export_dataset(self.cfg, self.args.export)
            print(f"Log esportato in {path}")
        return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Punto di ingresso: restituisce il codice di uscita."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
    except ConfigError as e:
        print(f"Errore di configurazione: {e}", file=sys.stderr)
        return EXIT_USAGE

    setup_logging(settings.LOG_DIR, args.log_level)
    if settings.SHOW_LOGO_ON_STARTUP and not args.no_banner:
        from src.graphics.logos import print_logo
        print_logo()

    try:
        color = settings.TERMINAL_COLORS and sys.stdout.isatty()
        return CrolabCLI(args, cfg, color=color).run()
    except ConfigError as e:
        logger.log_exception(e, "Errore di configurazione")
        return EXIT_USAGE
    except (CrolabError, OSError, ValueError, IndexError, FloatingPointError) as e:
        logger.log_exception(e, f"Comando '{args.command}' interrotto")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
