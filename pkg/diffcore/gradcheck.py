"""
Central finite-difference checks of tape gradients.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .tensor import Value, no_grad

LossFn = Callable[[Dict[str, Value]], Value]


@dataclass
class GradCheckReport:
    checked: int
    max_rel_error: float
    max_abs_error: float
    worst: Tuple[str, tuple] = ("", ())
    failures: List[Tuple[str, tuple, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-6, abs(analytic) + abs(numeric))


def tape_gradients(loss_fn: LossFn, params: Mapping[str, np.ndarray]) -> Tuple[float, Dict[str, np.ndarray]]:
    leaves = {k: Value(np.array(v, dtype=np.float64), name=k) for k, v in params.items()}
    loss = loss_fn(leaves)
    loss.backward()
    return loss.item(), {k: v.grad for k, v in leaves.items()}


def _evaluate(loss_fn: LossFn, params: Mapping[str, np.ndarray]) -> float:
    with no_grad():
        return loss_fn({k: Value(v) for k, v in params.items()}).item()


def _sample_coordinates(params: Mapping[str, np.ndarray], num_samples: int,
                        rng: np.random.Generator) -> List[Tuple[str, tuple]]:
    """One coordinate from every parameter first, then uniform draws over the rest."""
    names = sorted(params)
    coords = [(name, tuple(np.unravel_index(0, params[name].shape))) for name in names if params[name].size]
    sizes = np.array([params[name].size for name in names])
    total = int(sizes.sum())
    remaining = max(0, min(num_samples, total) - len(coords))
    if remaining:
        flat = rng.choice(total, size=remaining, replace=False)
        offsets = np.cumsum(np.concatenate([[0], sizes]))
        for index in np.sort(flat):
            which = int(np.searchsorted(offsets, index, side="right") - 1)
            name = names[which]
            coords.append((name, tuple(np.unravel_index(int(index - offsets[which]), params[name].shape))))
    return coords


def check_gradients(loss_fn: LossFn,
                    params: Mapping[str, np.ndarray],
                    num_samples: int = 100,
                    eps: float = 1e-5,
                    rtol: float = 1e-4,
                    atol: float = 1e-8,
                    rng: Optional[np.random.Generator] = None) -> GradCheckReport:
    """
    Compare tape gradients against central differences on sampled coordinates.

    A coordinate fails when both its relative error exceeds `rtol` and its
    absolute error exceeds `atol`.
    """
    rng = rng or np.random.default_rng(0)
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    _, analytic = tape_gradients(loss_fn, base)

    report = GradCheckReport(checked=0, max_rel_error=0.0, max_abs_error=0.0)
    for name, index in _sample_coordinates(base, num_samples, rng):
        original = base[name][index]
        base[name][index] = original + eps
        plus = _evaluate(loss_fn, base)
        base[name][index] = original - eps
        minus = _evaluate(loss_fn, base)
        base[name][index] = original

        numeric = (plus - minus) / (2.0 * eps)
        a = float(analytic[name][index])
        rel = relative_error(a, numeric)
        abs_err = abs(a - numeric)
        report.checked += 1
        if rel > report.max_rel_error:
            report.max_rel_error = rel
            report.worst = (name, index)
        report.max_abs_error = max(report.max_abs_error, abs_err)
        if rel > rtol and abs_err > atol:
            report.failures.append((name, index, a, numeric))
    return report
