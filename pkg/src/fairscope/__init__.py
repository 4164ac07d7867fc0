"""Gender-fairness auditing for facial-expression classifiers."""

__version__ = "0.1.0"

from .errors import FairscopeError  # noqa: E402
from .records import (  # noqa: E402
    EmotionLabel, FusedLabel, Gender, PredictionRecord, RecordSet, Regime, Taxonomy, Veracity,
    decode, fuse_label, ingest, softmax,
)
from .metrics import (  # noqa: E402
    ClassCounts, ClassMetrics, ConfusionMatrix, EvalSet, MetricTable, Support,
    class_metrics, confusion, ovr_counts, reconstruct_counts, table,
)
from .fairness import FairnessDefinition, GapReport, Ranking, dp_gaps, eqod_gaps, eqop_gaps, rank, verify_claims  # noqa: E402
