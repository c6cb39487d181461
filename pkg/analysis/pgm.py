"""
Plain (P2) 8-bit grayscale images: text, diffable, readable without an image library.
"""

from pathlib import Path
from typing import Optional, Tuple

import numpy as np

MAX_GRAY = 255


def to_gray(values: np.ndarray, value_range: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Scale to 0..255 over `value_range` (the array's own min/max by default); a flat image maps to 0."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = value_range if value_range is not None else (float(values.min()), float(values.max()))
    if not hi > lo:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    return np.rint(scaled * MAX_GRAY).astype(np.uint8)


def write_pgm(path, values: np.ndarray, value_range: Optional[Tuple[float, float]] = None) -> None:
    image = np.atleast_2d(to_gray(values, value_range))
    height, width = image.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["P2", f"{width} {height}", str(MAX_GRAY)]
    lines += [" ".join(str(int(v)) for v in row) for row in image]
    with open(path, "w", newline="\n", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    with open(path, encoding="ascii") as f:
        tokens = [tok for line in f if not line.startswith("#") for tok in line.split()]
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path} is not a plain PGM file")
    width, height = int(tokens[1]), int(tokens[2])
    pixels = np.array([int(tok) for tok in tokens[4:4 + width * height]], dtype=np.uint8)
    return pixels.reshape(height, width)
