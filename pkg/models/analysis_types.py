"""
Records for the averaged-estimator variance checks.
"""

from dataclasses import dataclass, asdict
from typing import Dict, Any, List, Optional


@dataclass(frozen=True)
class NoiseModel:
    """Equicorrelated per-step noise: horizon N, pairwise correlation rho, variances in [v_min, v_max]."""
    horizon: int
    rho: float
    v_max: float
    v_min: Optional[float] = None
    trials: int = 100000

    def __post_init__(self):
        if self.v_min is None:
            object.__setattr__(self, 'v_min', self.v_max)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NoiseModel":
        return cls(**data)


BOUND_REPORT_COLUMNS = ["n", "rho", "v_min", "v_max", "trials", "v_lb", "v_ub",
                        "analytic_var", "empirical_var", "standard_error", "pass"]


@dataclass
class BoundReport:
    noise: NoiseModel
    v_ub: float
    v_lb: float
    empirical_var: float
    standard_error: float
    analytic_var: float

    @property
    def passed(self) -> bool:
        return (self.v_lb - 3.0 * self.standard_error
                <= self.empirical_var
                <= self.v_ub + 3.0 * self.standard_error)

    def csv_row(self) -> List[Any]:
        n = self.noise
        return [n.horizon, n.rho, n.v_min, n.v_max, n.trials, self.v_lb, self.v_ub,
                self.analytic_var, self.empirical_var, self.standard_error, self.passed]

    def to_dict(self) -> Dict[str, Any]:
        return dict(zip(BOUND_REPORT_COLUMNS, self.csv_row()))
