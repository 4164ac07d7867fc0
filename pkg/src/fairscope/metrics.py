"""Confusion matrices, one-vs-rest counts and per-group ACC/TPR/FPR tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, NamedTuple, Optional, TextIO, Tuple

import numpy as np

from .errors import EmptyGroupError, IncompleteTableError, ParseError, TaxonomyMismatchError, UndefinedRateError
from .records import FUSED_ORDER, FusedLabel, Gender, PredictionRecord, RecordSet, Regime, Taxonomy, _ParsableEnum


class EvalSet(_ParsableEnum):
    """Which slice of the test subjects a metric was computed on."""

    TEST = "test"
    FEMALE = "female"
    MALE = "male"


METRIC_NAMES = ("acc", "tpr", "fpr")

# Per-class (positives, negatives) for the fused taxonomy, read off the
# granularity of the published tables.
DEFAULT_SUPPORTS = {EvalSet.TEST: (20, 60), EvalSet.FEMALE: (10, 30), EvalSet.MALE: (10, 30)}


@dataclass(frozen=True)
class ClassCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError(f"negative count in {self}")

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    acc: float
    tpr: float
    fpr: float

    def __getitem__(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise KeyError(name)
        return getattr(self, name)


@dataclass(frozen=True)
class Support:
    positives: int
    negatives: int

    @property
    def size(self) -> int:
        return self.positives + self.negatives


class Reconstruction(NamedTuple):
    counts: ClassCounts
    consistent: bool


class ConfusionMatrix:
    """4x4 count grid; rows are true labels, columns predictions, both in report order."""

    def __init__(self, counts):
        arr = np.array(counts, dtype=np.int64)
        if arr.shape != (4, 4):
            raise ValueError(f"confusion matrix must be 4x4, got {arr.shape}")
        if (arr < 0).any():
            raise ValueError("confusion counts must be non-negative")
        arr.setflags(write=False)
        self.counts = arr

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self, cls: FusedLabel) -> int:
        return int(self.counts[FusedLabel.parse(cls).index].sum())

    def __getitem__(self, idx):
        t, p = idx
        return int(self.counts[FusedLabel.parse(t).index, FusedLabel.parse(p).index])

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return bool(np.array_equal(self.counts, other.counts))

    def __repr__(self):
        return f"ConfusionMatrix({self.counts.tolist()})"


def confusion(records: RecordSet, filter: Optional[Callable[[PredictionRecord], bool]] = None) -> ConfusionMatrix:
    if records.taxonomy is not Taxonomy.FUSED4:
        raise TaxonomyMismatchError("metrics need the fused 4-class taxonomy; ingest with fuse=True")
    grid = np.zeros((4, 4), dtype=np.int64)
    n = 0
    for rec in records:
        if filter is not None and not filter(rec):
            continue
        grid[rec.true_label.index, rec.predicted_label.index] += 1
        n += 1
    if n == 0:
        raise EmptyGroupError("no records in the selected group")
    return ConfusionMatrix(grid)


def ovr_counts(matrix: ConfusionMatrix, cls: FusedLabel) -> ClassCounts:
    c = FusedLabel.parse(cls).index
    m = matrix.counts
    tp = int(m[c, c])
    fn = int(m[c, :].sum()) - tp
    fp = int(m[:, c].sum()) - tp
    tn = int(m.sum()) - tp - fn - fp
    return ClassCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def class_metrics(counts: ClassCounts) -> ClassMetrics:
    if counts.positives == 0:
        raise UndefinedRateError(f"TPR undefined: class has no positives ({counts})")
    if counts.negatives == 0:
        raise UndefinedRateError(f"FPR undefined: class has no negatives ({counts})")
    return ClassMetrics(
        acc=(counts.tp + counts.tn) / counts.total,
        tpr=counts.tp / counts.positives,
        fpr=counts.fp / counts.negatives,
    )


def reconstruct_counts(metrics: ClassMetrics, support: Support, acc_tol: float = 0.0005) -> Reconstruction:
    """Invert published rates to integer counts.

    Published rates are truncated, so TP and FP are rounded to the nearest
    integer and the result is flagged consistent when it reproduces the
    published accuracy within ``acc_tol``.
    """
    if support.positives <= 0 or support.negatives <= 0:
        raise ValueError(f"support must be positive on both sides, got {support}")
    tp = min(max(int(round(metrics.tpr * support.positives)), 0), support.positives)
    fp = min(max(int(round(metrics.fpr * support.negatives)), 0), support.negatives)
    counts = ClassCounts(tp=tp, fp=fp, tn=support.negatives - fp, fn=support.positives - tp)
    consistent = abs((counts.tp + counts.tn) / support.size - metrics.acc) <= acc_tol
    return Reconstruction(counts, consistent)


Key = Tuple[str, Regime, EvalSet, FusedLabel]


class MetricTable:
    """(model_id, regime, eval set, class) -> ClassMetrics."""

    def __init__(self, cells: Dict[Key, ClassMetrics]):
        self._cells = dict(cells)
        for model, regime, group in self.slices():
            for cls in FUSED_ORDER:
                if (model, regime, group, cls) not in self._cells:
                    raise IncompleteTableError(f"{model}/{regime}/{group} is missing class {cls}")

    def __getitem__(self, key: Key) -> ClassMetrics:
        model, regime, group, cls = key
        k = (model, Regime.parse(regime), EvalSet.parse(group), FusedLabel.parse(cls))
        try:
            return self._cells[k]
        except KeyError:
            raise IncompleteTableError(f"no metrics for {model}/{k[1]}/{k[2]}/{k[3]}") from None

    def __contains__(self, key) -> bool:
        model, regime, group, cls = key
        return (model, Regime.parse(regime), EvalSet.parse(group), FusedLabel.parse(cls)) in self._cells

    def __len__(self):
        return len(self._cells)

    def __iter__(self) -> Iterator[Key]:
        return iter(self._sorted_keys())

    def __eq__(self, other):
        if not isinstance(other, MetricTable):
            return NotImplemented
        return self._cells == other._cells

    def items(self):
        return [(k, self._cells[k]) for k in self._sorted_keys()]

    def _sorted_keys(self):
        regimes = list(Regime)
        groups = list(EvalSet)
        return sorted(
            self._cells,
            key=lambda k: (regimes.index(k[1]), groups.index(k[2]), k[0], k[3].index),
        )

    def slices(self):
        """Distinct (model, regime, eval set) triples present."""
        return sorted({k[:3] for k in self._cells}, key=lambda s: (list(Regime).index(s[1]), s[0], list(EvalSet).index(s[2])))

    def regimes(self):
        return [r for r in Regime if any(k[1] is r for k in self._cells)]

    def models(self, regime=None):
        regime = None if regime is None else Regime.parse(regime)
        return sorted({k[0] for k in self._cells if regime is None or k[1] is regime})

    def has_group(self, model, regime, group) -> bool:
        return (model, Regime.parse(regime), EvalSet.parse(group), FusedLabel.SURPRISED) in self._cells

    def with_value(self, key: Key, metric: str, value: float) -> "MetricTable":
        """Copy of the table with one metric cell replaced."""
        model, regime, group, cls = key
        k = (model, Regime.parse(regime), EvalSet.parse(group), FusedLabel.parse(cls))
        old = self[k]
        values = {m: old[m] for m in METRIC_NAMES}
        values[metric] = value
        cells = dict(self._cells)
        cells[k] = ClassMetrics(**values)
        return MetricTable(cells)


def _metrics_for(records: RecordSet, pred) -> Dict[FusedLabel, ClassMetrics]:
    matrix = confusion(records, pred)
    return {cls: class_metrics(ovr_counts(matrix, cls)) for cls in FUSED_ORDER}


def table(records: RecordSet) -> MetricTable:
    """Metrics for every (model, regime) on the full test group and on each gender slice present."""
    if records.taxonomy is not Taxonomy.FUSED4:
        raise TaxonomyMismatchError("metrics need the fused 4-class taxonomy; ingest with fuse=True")
    if len(records) == 0:
        raise EmptyGroupError("record set is empty")
    cells = {}
    for model, regime in sorted({(r.model_id, r.regime) for r in records}, key=lambda x: (x[0], x[1].value)):
        def of_model(r, model=model, regime=regime):
            return r.model_id == model and r.regime is regime

        groups = [(EvalSet.TEST, of_model)]
        genders = {r.gender for r in records if of_model(r)}
        for gender, group in ((Gender.FEMALE, EvalSet.FEMALE), (Gender.MALE, EvalSet.MALE)):
            if gender in genders:
                groups.append((group, lambda r, g=gender, f=of_model: f(r) and r.gender is g))
        for group, pred in groups:
            for cls, m in _metrics_for(records, pred).items():
                cells[(model, regime, group, cls)] = m
    return MetricTable(cells)


METRIC_CSV_COLUMNS = ("regime", "test_set", "model", "class", "metric", "value")


def read_metric_table(stream: TextIO) -> MetricTable:
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty metric file", line=1) from None
    if tuple(header) != METRIC_CSV_COLUMNS:
        raise ParseError(f"metric header must be {','.join(METRIC_CSV_COLUMNS)}", line=1)
    raw: Dict[Key, Dict[str, float]] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 6:
            raise ParseError(f"expected 6 fields, got {len(row)}", line=line)
        regime, group, model, cls, metric, value = (c.strip() for c in row)
        try:
            key = (model, Regime.parse(regime), EvalSet.parse(group), FusedLabel.parse(cls))
            if metric not in METRIC_NAMES:
                raise ValueError(f"unknown metric {metric!r}")
            v = float(value)
        except ValueError as exc:
            raise ParseError(str(exc), line=line) from None
        if not 0.0 <= v <= 1.0:
            raise ParseError(f"rate {v} outside [0, 1]", line=line)
        slot = raw.setdefault(key, {})
        if metric in slot:
            raise ParseError(f"duplicate cell {model}/{regime}/{group}/{cls}/{metric}", line=line)
        slot[metric] = v
    cells = {}
    for key, vals in raw.items():
        missing = [m for m in METRIC_NAMES if m not in vals]
        if missing:
            raise IncompleteTableError(f"{key[0]}/{key[1]}/{key[2]}/{key[3]} lacks {', '.join(missing)}")
        cells[key] = ClassMetrics(**vals)
    return MetricTable(cells)


def load_metric_table(path) -> MetricTable:
    with open(path, newline="", encoding="utf-8") as fh:
        return read_metric_table(fh)


def write_metric_table(tbl: MetricTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_CSV_COLUMNS)
    for (model, regime, group, cls), m in tbl.items():
        for metric in METRIC_NAMES:
            writer.writerow([regime.value, group.value, model, cls.value, metric, repr(float(m[metric]))])
    return buf.getvalue()


def reconstruct_table(tbl: MetricTable, supports=None) -> Dict[Key, Reconstruction]:
    supports = supports or DEFAULT_SUPPORTS
    out = {}
    for key, m in tbl.items():
        pos, neg = supports[key[2]]
        out[key] = reconstruct_counts(m, Support(pos, neg))
    return out
