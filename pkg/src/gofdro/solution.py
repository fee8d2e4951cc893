"""Result record shared by every robust and baseline solver."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class RobustSolution:
    """Decision, guaranteed value, and optional worst-case distribution.

    Attributes
    ----------
    x : ndarray or None
        Optimal decision (None when the problem is infeasible/unbounded).
    value : float or None
        Guaranteed worst-case expected cost.
    status : str
        'optimal', 'infeasible', 'unbounded', or 'numerical-limit'.
    atoms : (k, 2) ndarray or None
        Worst-case distribution as (support point, probability) rows for
        univariate problems; for discrete problems the worst-case pmf.
    gap : float
        Relative duality gap reported by the solver.
    """

    x: Optional[np.ndarray]
    value: Optional[float]
    status: str
    atoms: Optional[np.ndarray] = None
    gap: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


RESULT_FIELDS = (
    "build_id", "config_hash", "seed", "method", "N", "alpha",
    "replicate", "x_first", "x_norm", "value", "z_true", "bound_valid",
    "status", "gap", "wall_time",
)


def write_result_rows(path, rows, append=False):
    """Write result dictionaries to the shared CSV schema."""
    mode = "a" if append and os.path.exists(path) else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        if mode == "w":
            writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in RESULT_FIELDS})
