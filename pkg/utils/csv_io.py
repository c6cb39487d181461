"""
CSV helpers: comma separated, '.' decimal, LF line endings, header row.
"""

import csv
from pathlib import Path
from typing import Iterable, List, Sequence, Any


def format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):
        return format_cell(value.item())
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """Write rows under a header; returns the number of data rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
            count += 1
    return count


def read_csv(path) -> List[List[str]]:
    """Read a CSV file including its header row."""
    with open(path, newline="", encoding="utf-8") as f:
        return [row for row in csv.reader(f)]
