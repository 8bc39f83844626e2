#!/usr/bin/env python3
"""
CROLAB Tables
Tabelle di testo con bordi a box e evidenziazione colorama per la console
"""

from typing import Iterable, List, Optional, Sequence, Set, Tuple

from colorama import Fore, Style

# Caratteri dei bordi, tratto singolo
BOX = {"tl": "┌", "tr": "┐", "bl": "└", "br": "┘", "h": "─", "v": "│", "lt": "├", "rt": "┤",
       "tt": "┬", "bt": "┴", "x": "┼"}

Cell = Tuple[int, int]


def _line(widths: Sequence[int], left: str, mid: str, right: str, fill: str) -> str:
    return left + mid.join(fill * (w + 2) for w in widths) + right


def render_table(headers: Sequence[str], rows: Iterable[Sequence[str]],
                 highlight: Optional[Set[Cell]] = None, color: bool = False) -> str:
    """
    Disegna una tabella a box.

    Args:
        headers: Intestazioni di colonna
        rows: Righe di celle gia' formattate
        highlight: Celle (riga, colonna) da evidenziare in console
        color: Se True applica i colori di colorama (mai nei file)
    """
    box = BOX
    rows = [[str(c) for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))

    def fmt(cells: Sequence[str], row_index: int = -1) -> str:
        parts = []
        for col, (cell, width) in enumerate(zip(cells, widths)):
            text = cell.ljust(width) if col == 0 else cell.rjust(width)
            if color and highlight and (row_index, col) in highlight:
                text = f"{Fore.GREEN}{Style.BRIGHT}{text}{Style.RESET_ALL}"
            parts.append(f" {text} ")
        return box["v"] + box["v"].join(parts) + box["v"]

    lines: List[str] = [
        _line(widths, box["tl"], box["tt"], box["tr"], box["h"]),
        fmt(headers),
        _line(widths, box["lt"], box["x"], box["rt"], box["h"]),
    ]
    lines += [fmt(row, r) for r, row in enumerate(rows)]
    lines.append(_line(widths, box["bl"], box["bt"], box["br"], box["h"]))
    return "\n".join(lines)


def status_mark(passed: bool, color: bool = True) -> str:
    """✅/❌ con il colore di colorama in console."""
    mark = "✅" if passed else "❌"
    if not color:
        return mark
    return f"{Fore.GREEN if passed else Fore.RED}{mark}{Style.RESET_ALL}"
