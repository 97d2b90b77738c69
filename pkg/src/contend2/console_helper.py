"""
Colored [tag] markup for stderr diagnostics, plus the plain text table renderer
example: log_info("[green]converged[/green] after 12 sweeps")

Diagnostics go to stderr so stdout only ever carries JSON/CSV/table output
"""

import os
import sys
from collections.abc import Sequence
from typing import Any

# the tags the log_* prefixes and the optimizer's restart lines use
COLORS = {
    "blue": "\033[34m",
    "green": "\033[32m",
    "red": "\033[31m",
    "yellow": "\033[33m",
    "bold": "\033[1m",
}
RESET = "\033[0m"


def _parse_markup(text: str, color: bool = True) -> str:
    """
    Replace [name] / [/name] tags from COLORS with ANSI codes, or drop them

    Brackets holding anything else, such as "[0.25, 0.3334]", are kept as text.
    """
    open_tags: list[str] = []
    out: list[str] = []
    i = 0
    while i < len(text):
        end = text.find("]", i + 1) if text[i] == "[" else -1
        name = text[i + 1 : end].removeprefix("/") if end != -1 else ""
        if name not in COLORS:
            out.append(text[i])
            i += 1
            continue
        if text[i + 1] == "/":
            if name in open_tags:
                open_tags.remove(name)
            if color:
                out.append(RESET + "".join(COLORS[t] for t in open_tags))
        else:
            open_tags.append(name)
            if color:
                out.append(COLORS[name])
        i = end + 1
    if open_tags and color:
        out.append(RESET)
    return "".join(out)


def log(text: str) -> None:
    """Markup to stderr; color only on a TTY and never with NO_COLOR set"""
    color = not os.getenv("NO_COLOR") and sys.stderr.isatty()
    print(_parse_markup(text, color), file=sys.stderr)


def log_warn(message: str) -> None:
    log(f"[bold][yellow][WARN][/yellow][/bold] {message}")


def log_erro(message: str) -> None:
    log(f"[bold][red][ERRO][/red][/bold] {message}")


def log_info(message: str) -> None:
    log(f"[bold][blue][INFO][/blue][/bold] {message}")


def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """
    Render rows as a left-aligned plain text table

    Args:
        headers: Column titles
        rows: Row cells, converted with str()
    Returns:
        Table text without trailing newline
    """
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
