from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["EstimateVerdict"]


@dataclass
class EstimateVerdict:
    """Outcome of fitting the constant in a one-sided pointwise bound.

    ``fitted_constant`` is the sup of |LHS|/RHS over the samples and
    ``refinement_drift`` its relative change when the sample density is
    doubled. ``passed`` requires a finite constant with drift at most
    ``drift_tol``.
    """

    estimate_id: str
    fitted_constant: float
    sample_count: int
    max_ratio_location: Any
    refinement_drift: float
    drift_tol: float = 0.10
    resolved: bool = True
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(
            self.resolved
            and math.isfinite(self.fitted_constant)
            and self.refinement_drift <= self.drift_tol
        )

    def to_dict(self) -> dict:
        loc = self.max_ratio_location
        if hasattr(loc, "as_tuple"):
            loc = loc.as_tuple()
        if loc is not None:
            loc = [float(v) for v in np.atleast_1d(loc)]
        return {
            "estimate_id": self.estimate_id,
            "fitted_constant": float(self.fitted_constant),
            "samples": int(self.sample_count),
            "worst_point": loc,
            "refinement_drift": float(self.refinement_drift),
            "pass": bool(self.passed),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)
