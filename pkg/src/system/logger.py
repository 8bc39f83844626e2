#!/usr/bin/env python3
"""
CROLAB Logger
Sistema di logging per il tracciamento di training, valutazioni ed errori
"""

import sys
import logging
import traceback
from datetime import datetime
from pathlib import Path
from typing import Optional


class Logger:
    """
    Logger centralizzato per CROLAB.
    Scrive sempre su console; il file di log viene agganciato solo quando
    un comando lo richiede con attach_file().
    """
    def __init__(self, log_level: str = "INFO", app_name: str = "crolab",
                 console_output: bool = True):
        self.app_name = app_name
        self.log_dir: Optional[Path] = None
        self.log_file: Optional[Path] = None
        self.formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        )

        self.logger = logging.getLogger(app_name)
        self.logger.handlers = []  # Rimuovi handler esistenti
        self.logger.propagate = False

        if console_output:
            console_handler = logging.StreamHandler(sys.stdout)
            console_handler.setFormatter(self.formatter)
            self.logger.addHandler(console_handler)

        self.set_level(log_level)

    def set_level(self, level_name: str) -> None:
        """Imposta il livello su logger e handler."""
        self.log_level = self._get_log_level(level_name)
        self.logger.setLevel(self.log_level)
        for handler in self.logger.handlers:
            handler.setLevel(self.log_level)

    def attach_file(self, log_dir: Path) -> Path:
        """
        Aggiunge un file di log con timestamp in log_dir.

        Returns:
            Path: Il percorso del file creato
        """
        self.log_dir = self._ensure_log_dir(Path(log_dir))
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.log_file = self.log_dir / f"{self.app_name}_{timestamp}.log"

        # un solo file per processo: il precedente viene chiuso
        for handler in [h for h in self.logger.handlers if isinstance(h, logging.FileHandler)]:
            self.logger.removeHandler(handler)
            handler.close()

        file_handler = logging.FileHandler(self.log_file)
        file_handler.setLevel(self.log_level)
        file_handler.setFormatter(self.formatter)
        self.logger.addHandler(file_handler)

        self.info(f"Logger inizializzato. Livello: {logging.getLevelName(self.log_level)}")
        return self.log_file

    def _ensure_log_dir(self, log_dir: Path) -> Path:
        """Assicura che la directory dei log esista."""
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
            return log_dir
        except OSError as e:
            print(f"Errore nella creazione della directory dei log: {e}")
            return Path.cwd()

    def _get_log_level(self, level_name: str) -> int:
        """Converte il nome del livello di log in costante logging."""
        levels = {
            "DEBUG": logging.DEBUG,
            "INFO": logging.INFO,
            "WARNING": logging.WARNING,
            "ERROR": logging.ERROR,
            "CRITICAL": logging.CRITICAL
        }
        return levels.get(str(level_name).upper(), logging.INFO)

    def debug(self, message: str) -> None:
        self.logger.debug(message)

    def info(self, message: str) -> None:
        self.logger.info(message)

    def warning(self, message: str) -> None:
        self.logger.warning(message)

    def error(self, message: str, exc_info: bool = False) -> None:
        self.logger.error(message, exc_info=exc_info)

    def log_exception(self, e: Exception, message: Optional[str] = None) -> None:
        """
        Log di un'eccezione con un messaggio personalizzato.

        Args:
            e: L'eccezione catturata
            message: Messaggio opzionale da aggiungere
        """
        full_message = f"{message}: {e}" if message else str(e)
        self.error(full_message)
        self.debug(f"Traceback: {traceback.format_exc()}")


# Singleton logger per tutto il sistema
_SYSTEM_LOGGER = None


def get_logger() -> Logger:
    """
    Ottiene l'istanza singleton del logger.

    Returns:
        Logger: Istanza del logger
    """
    global _SYSTEM_LOGGER

    if _SYSTEM_LOGGER is None:
        from config.settings import LOG_LEVEL
        _SYSTEM_LOGGER = Logger(log_level=LOG_LEVEL)

    return _SYSTEM_LOGGER


def setup_logging(log_dir: Optional[Path] = None, log_level: Optional[str] = None) -> Logger:
    """
    Configura il logger per un comando della CLI.

    Args:
        log_dir: Directory del file di log (None = solo console)
        log_level: Livello di logging (None = valore corrente)
    """
    logger = get_logger()
    if log_level:
        logger.set_level(log_level)
    if log_dir is not None:
        logger.attach_file(log_dir)
    return logger
