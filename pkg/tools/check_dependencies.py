#!/usr/bin/env python3
"""
CROLAB Dependency Checker
Utility per verificare lo stato delle dipendenze del laboratorio
"""

import importlib
import sys
from pathlib import Path

BASE_DIR = Path(__file__).parent.parent.absolute()
if str(BASE_DIR) not in sys.path:
    sys.path.insert(0, str(BASE_DIR))

from config.settings import PACKAGE_NAMES, REQUIRED_PACKAGES  # noqa: E402


def check_venv():
    """Verifica se è in uso un ambiente virtuale."""
    if hasattr(sys, 'real_prefix') or (hasattr(sys, 'base_prefix') and sys.base_prefix != sys.prefix):
        print(f"✅ Ambiente virtuale attivo: {sys.prefix}")
        return True
    print("❌ Nessun ambiente virtuale attivo")
    return False


def get_package_info(package_name):
    """Ottiene versione e percorso di un pacchetto."""
    try:
        module = importlib.import_module(package_name)
        version = getattr(module, "__version__", "sconosciuta")
        print(f"✅ {package_name} versione: {version}")
        print(f"   Percorso: {module.__file__}")
        return True
    except ImportError:
        install = PACKAGE_NAMES.get(package_name, package_name)
        print(f"❌ {package_name}: non installato (pacchetto: {install})")
        return False


def check_dependencies():
    """Verifica le dipendenze elencate in config/settings.py."""
    print("\n📦 Verifica delle dipendenze CROLAB:")
    results = [get_package_info(dep) for dep in REQUIRED_PACKAGES]
    return all(results)


def main():
    """Funzione principale; codice di uscita 1 se manca qualcosa."""
    print("=== CROLAB Dependency Checker ===\n")
    check_venv()
    if check_dependencies():
        print("\n✅ Tutte le dipendenze sono correttamente installate e importabili")
        return 0
    print(f"\n⚠️ Prova: pip install -r {BASE_DIR / 'requirements.txt'}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
