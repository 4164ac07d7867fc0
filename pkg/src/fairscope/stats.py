"""Box-plot summaries of per-class accuracy across models."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import IncompleteTableError
from .metrics import EvalSet, MetricTable
from .records import FUSED_ORDER, Regime


@dataclass(frozen=True)
class BoxplotStats:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    variance: float
    n: int

    def as_dict(self):
        return asdict(self)


def summarize(values) -> BoxplotStats:
    """Quartiles by linear interpolation between order statistics; population variance."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values to summarize")
    q1, med, q3 = np.percentile(v, [25, 50, 75], method="linear")
    return BoxplotStats(
        min=float(v.min()), q1=float(q1), median=float(med), q3=float(q3), max=float(v.max()),
        mean=float(v.mean()), variance=float(v.var()), n=int(v.size),
    )


def accuracy_values(table: MetricTable, regime, group) -> list:
    regime, group = Regime.parse(regime), EvalSet.parse(group)
    models = table.models(regime)
    if not models:
        raise IncompleteTableError(f"no models for regime {regime}")
    return [table[(m, regime, group, c)].acc for m in models for c in FUSED_ORDER]


def aggregate_stats(table: MetricTable, regime, group) -> BoxplotStats:
    """Statistics over every model's per-class accuracy in one (regime, eval set)."""
    return summarize(accuracy_values(table, regime, group))
