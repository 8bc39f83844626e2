#!/usr/bin/env python3
"""
CROLAB ASCII Logos
Banner di avvio; pyfiglet quando disponibile, versione statica altrimenti
"""

# Banner statico usato senza pyfiglet
CROLAB_LOGO = r"""
  ______ ____   ____  __    ___    ____
 / ____// __ \ / __ \/ /   /   |  / __ )
/ /    / /_/ // / / / /   / /| | / __  |
/ /___ / _, _// /_/ / /___/ ___ |/ /_/ /
\____//_/ |_| \____/_____/_/  |_/_____/
"""


def banner_text(text: str = "CROLAB", font: str = "slant") -> str:
    """Testo del banner con pyfiglet, o il logo statico se il modulo manca."""
    try:
        import pyfiglet
        return pyfiglet.figlet_format(text, font=font)
    except Exception:
        return CROLAB_LOGO if text == "CROLAB" else f"\n  {text}\n"


def print_logo() -> None:
    """Stampa il banner di avvio sul terminale."""
    print(banner_text())
