#!/usr/bin/env python3
"""
CROLAB Bootloader
Controlli preliminari prima della CLI: dipendenze e informazioni sull'ambiente
"""

import importlib
import os
import platform
import sys
from pathlib import Path
from typing import Any, Dict, List

from config.settings import PACKAGE_NAMES, REQUIRED_PACKAGES


class Bootloader:
    """
    Gestisce la fase di avvio di CROLAB.
    Responsabilità:
    - Verificare che le dipendenze siano importabili
    - Raccogliere le informazioni sull'ambiente (solo nel log, mai negli output)
    """
    def __init__(self, verbose: bool = False):
        self.base_path = Path(__file__).parent.parent.absolute()
        self.required_packages = list(REQUIRED_PACKAGES)
        self.system_info: Dict[str, Any] = {}
        self.verbose = verbose

    def boot(self) -> bool:
        """
        Esegue i controlli di avvio

        Returns:
            bool: True se l'ambiente e' utilizzabile
        """
        missing = self._check_dependencies()
        if missing:
            names = " ".join(PACKAGE_NAMES.get(m, m) for m in missing)
            print(f"🛑 Dipendenze mancanti: {names}")
            print(f"   Installa con: {sys.executable} -m pip install -r {self.base_path / 'requirements.txt'}")
            return False

        self._collect_system_info()
        from src.system.logger import get_logger
        get_logger().debug(f"Ambiente: {self.system_info}")
        return True

    def _check_dependencies(self) -> List[str]:
        """Restituisce i moduli non importabili."""
        missing = []
        for package in self.required_packages:
            try:
                importlib.import_module(package)
                if self.verbose:
                    print(f"✅ {package}: già installato")
            except ImportError:
                missing.append(package)
                print(f"❌ {package}: non installato")
        return missing

    def _collect_system_info(self) -> None:
        """Raccoglie informazioni su sistema, CPU e memoria."""
        import numpy
        import psutil

        memory = psutil.virtual_memory()
        self.system_info = {
            "os": platform.system(),
            "kernel": platform.release(),
            "architecture": platform.machine(),
            "python_version": platform.python_version(),
            "numpy_version": numpy.__version__,
            "cpu_count": os.cpu_count(),
            "cpu_physical": psutil.cpu_count(logical=False),
            "memory_total_gb": round(memory.total / 1024 ** 3, 2),
            "memory_available_gb": round(memory.available / 1024 ** 3, 2),
        }
