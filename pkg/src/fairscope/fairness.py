"""Female/male fairness gaps, bias rankings and the published-claim register."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

from .errors import IncompleteTableError
from .metrics import EvalSet, MetricTable
from .records import FUSED_ORDER, Regime, _ParsableEnum
from .stats import aggregate_stats

TIE_TOLERANCE = 1e-12


class FairnessDefinition(_ParsableEnum):
    DEMOGRAPHIC_PARITY = "dp"      # equal per-class accuracy
    EQUAL_OPPORTUNITY = "eqop"     # equal per-class TPR
    EQUALIZED_ODDS = "eqod"        # equal per-class TPR and FPR


AGGREGATIONS = {
    "mean": lambda gaps: sum(gaps) / len(gaps),
    "max": max,
}

EQOD_COMBINERS = {
    "mean": lambda dt, df: (dt + df) / 2.0,
    "max": max,
    "sum": lambda dt, df: dt + df,
}


@dataclass(frozen=True)
class ModelGap:
    per_class: Tuple[float, ...]  # report order
    aggregate: float


@dataclass(frozen=True)
class Ranking:
    """Tiers of model ids, most fair first."""

    tiers: Tuple[Tuple[str, ...], ...]

    @property
    def first(self) -> Tuple[str, ...]:
        return self.tiers[0]

    @property
    def last(self) -> Tuple[str, ...]:
        return self.tiers[-1]

    def position(self, model_id: str) -> int:
        for i, tier in enumerate(self.tiers):
            if model_id in tier:
                return i
        raise KeyError(model_id)

    def as_lists(self) -> List[List[str]]:
        return [list(t) for t in self.tiers]


@dataclass(frozen=True)
class GapReport:
    definition: FairnessDefinition
    regime: Regime
    aggregation: str
    models: Dict[str, ModelGap]
    eqod_combine: str = "mean"

    def aggregate(self, model_id: str) -> float:
        return self.models[model_id].aggregate

    @property
    def ranking(self) -> Ranking:
        return rank(self)

    def to_json(self) -> dict:
        return {
            "definition": self.definition.value,
            "regime": self.regime.value,
            "aggregation": self.aggregation,
            "models": [
                {
                    "model_id": m,
                    "per_class": {c.value: g for c, g in zip(FUSED_ORDER, self.models[m].per_class)},
                    "aggregate": self.models[m].aggregate,
                }
                for m in sorted(self.models)
            ],
            "ranking": self.ranking.as_lists(),
        }


def _class_gap(table, model, regime, cls, definition, combine) -> float:
    f = table[(model, regime, EvalSet.FEMALE, cls)]
    m = table[(model, regime, EvalSet.MALE, cls)]
    if definition is FairnessDefinition.DEMOGRAPHIC_PARITY:
        return abs(f.acc - m.acc)
    if definition is FairnessDefinition.EQUAL_OPPORTUNITY:
        return abs(f.tpr - m.tpr)
    return EQOD_COMBINERS[combine](abs(f.tpr - m.tpr), abs(f.fpr - m.fpr))


def gaps(
    table: MetricTable,
    regime,
    definition,
    aggregation: str = "mean",
    eqod_combine: str = "mean",
) -> GapReport:
    """Per-class |female - male| gap for every model trained under ``regime``."""
    regime = Regime.parse(regime)
    definition = FairnessDefinition.parse(definition)
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}")
    if eqod_combine not in EQOD_COMBINERS:
        raise ValueError(f"unknown EQOD combination {eqod_combine!r}")
    models = table.models(regime)
    if not models:
        raise IncompleteTableError(f"table has no models for regime {regime}")
    out = {}
    for model in models:
        for group in (EvalSet.FEMALE, EvalSet.MALE):
            if not table.has_group(model, regime, group):
                raise IncompleteTableError(f"{model}/{regime} has no {group} metrics; gaps need both gender sets")
        per_class = tuple(_class_gap(table, model, regime, c, definition, eqod_combine) for c in FUSED_ORDER)
        out[model] = ModelGap(per_class, float(AGGREGATIONS[aggregation](per_class)))
    return GapReport(definition, regime, aggregation, out, eqod_combine)


def dp_gaps(table: MetricTable, regime, aggregation: str = "mean") -> GapReport:
    return gaps(table, regime, FairnessDefinition.DEMOGRAPHIC_PARITY, aggregation)


def eqop_gaps(table: MetricTable, regime, aggregation: str = "mean") -> GapReport:
    return gaps(table, regime, FairnessDefinition.EQUAL_OPPORTUNITY, aggregation)


def eqod_gaps(table: MetricTable, regime, aggregation: str = "mean", combine: str = "mean") -> GapReport:
    return gaps(table, regime, FairnessDefinition.EQUALIZED_ODDS, aggregation, combine)


def rank(report: GapReport, tol: float = TIE_TOLERANCE) -> Ranking:
    """Ascending by aggregate gap; aggregates within ``tol`` of a tier's lowest member share it."""
    ordered = sorted(report.models.items(), key=lambda kv: (kv[1].aggregate, kv[0]))
    tiers: List[List[str]] = []
    anchor = None
    for model, gap in ordered:
        if anchor is None or gap.aggregate - anchor > tol:
            tiers.append([])
            anchor = gap.aggregate
        tiers[-1].append(model)
    return Ranking(tuple(tuple(sorted(t)) for t in tiers))


# ---------------------------------------------------------------------------
# claim register

REPRODUCED = "reproduced"
NOT_REPRODUCED = "not-reproduced"


@dataclass(frozen=True)
class Claim:
    claim_id: str
    description: str
    expected_status: str
    check: Callable[[MetricTable, dict], bool] = field(repr=False, compare=False)


@dataclass(frozen=True)
class ClaimVerdict:
    claim_id: str
    description: str
    expected_status: str
    verdict: str

    @property
    def matches(self) -> bool:
        return self.verdict == self.expected_status

    def to_json(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "description": self.description,
            "expected_status": self.expected_status,
            "verdict": self.verdict,
            "matches": self.matches,
        }


@dataclass(frozen=True)
class ClaimRegister:
    verdicts: Tuple[ClaimVerdict, ...]

    @property
    def all_match(self) -> bool:
        return all(v.matches for v in self.verdicts)

    def __getitem__(self, claim_id: str) -> ClaimVerdict:
        for v in self.verdicts:
            if v.claim_id == claim_id:
                return v
        raise KeyError(claim_id)

    def __iter__(self):
        return iter(self.verdicts)

    def __len__(self):
        return len(self.verdicts)

    def count(self, verdict: str) -> int:
        return sum(v.verdict == verdict for v in self.verdicts)


def _rk(table, opts, regime, definition) -> Ranking:
    return rank(gaps(table, regime, definition, opts.get("aggregation", "mean"), opts.get("eqod_combine", "mean")))


DP, EQOP, EQOD = (FairnessDefinition.DEMOGRAPHIC_PARITY, FairnessDefinition.EQUAL_OPPORTUNITY,
                  FairnessDefinition.EQUALIZED_ODDS)
R, F, M = Regime.REGULAR, Regime.FEMALE, Regime.MALE


def _mean_acc(table, regime, group) -> float:
    return aggregate_stats(table, regime, group).mean


def _regular_dp_ranking(t, o):
    r = _rk(t, o, R, DP)
    return len(r.tiers) >= 3 and r.tiers[0] == ("vgg16",) and r.tiers[1] == ("resnet3d",) and r.last == ("3dcnn", "vggface")


def _female_dp_extremes(t, o):
    r = _rk(t, o, F, DP)
    return r.first == ("vgg16",) and r.last == ("senetlstm",)


def _male_dp_extremes(t, o):
    r = _rk(t, o, M, DP)
    return r.first == ("senetlstm",) and r.last == ("resnet3d",)


def _male_dp_second_most_biased(t, o):
    r = _rk(t, o, M, DP)
    return len(r.tiers) >= 2 and r.tiers[-2] == ("resnet50", "vggface")


def _regular_eqop_least_resnet3d(t, o):
    return _rk(t, o, R, EQOP).first == ("resnet3d",)


def _female_eqop_eqod_least_3dcnn(t, o):
    return _rk(t, o, F, EQOP).first == ("3dcnn",) and _rk(t, o, F, EQOD).first == ("3dcnn",)


def _male_eqop_eqod_most_resnet50(t, o):
    return _rk(t, o, M, EQOP).last == ("resnet50",) and _rk(t, o, M, EQOD).last == ("resnet50",)


CLAIMS: Tuple[Claim, ...] = (
    Claim("regular-dp-ranking",
          "Regular models, DP: vgg16 most fair, resnet3d second, 3dcnn and vggface most biased",
          REPRODUCED, _regular_dp_ranking),
    Claim("female-dp-extremes",
          "FemaleTrained models, DP: vgg16 most fair, senetlstm most biased",
          REPRODUCED, _female_dp_extremes),
    Claim("male-dp-extremes",
          "MaleTrained models, DP: senetlstm most fair, resnet3d most biased",
          REPRODUCED, _male_dp_extremes),
    Claim("male-dp-second-most-biased",
          "MaleTrained models, DP: resnet50 and vggface share second most biased place",
          REPRODUCED, _male_dp_second_most_biased),
    Claim("regular-mean-acc-female-higher",
          "Regular models: mean accuracy on the Female set exceeds the Male set",
          REPRODUCED, lambda t, o: _mean_acc(t, R, EvalSet.FEMALE) > _mean_acc(t, R, EvalSet.MALE)),
    Claim("male-mean-acc-male-higher",
          "MaleTrained models: mean accuracy on the Male set exceeds the Female set",
          REPRODUCED, lambda t, o: _mean_acc(t, M, EvalSet.MALE) > _mean_acc(t, M, EvalSet.FEMALE)),
    Claim("regular-eqop-least-biased-resnet3d",
          "Regular models, EQOP: resnet3d least biased",
          NOT_REPRODUCED, _regular_eqop_least_resnet3d),
    Claim("female-eqop-eqod-least-biased-3dcnn",
          "FemaleTrained models, EQOP and EQOD: 3dcnn least biased",
          NOT_REPRODUCED, _female_eqop_eqod_least_3dcnn),
    Claim("male-eqop-eqod-most-biased-resnet50",
          "MaleTrained models, EQOP and EQOD: resnet50 most biased",
          NOT_REPRODUCED, _male_eqop_eqod_most_resnet50),
    Claim("female-mean-acc-male-higher",
          "FemaleTrained models: mean accuracy on the Male set exceeds the Female set",
          NOT_REPRODUCED, lambda t, o: _mean_acc(t, F, EvalSet.MALE) > _mean_acc(t, F, EvalSet.FEMALE)),
)


def verify_claims(table: MetricTable, aggregation: str = "mean", eqod_combine: str = "mean",
                  claims: Tuple[Claim, ...] = CLAIMS) -> ClaimRegister:
    """Evaluate every registered claim against ``table``.

    A claim's verdict is ``reproduced`` when its check holds on the table; the
    register records whether that matches the expected status.
    """
    for regime in Regime:
        for model in table.models(regime) or [None]:
            if model is None:
                raise IncompleteTableError(f"table has no models for regime {regime}")
            for group in EvalSet:
                if not table.has_group(model, regime, group):
                    raise IncompleteTableError(f"{model}/{regime} lacks the {group} set")
    opts = {"aggregation": aggregation, "eqod_combine": eqod_combine}
    verdicts = []
    for claim in claims:
        holds = bool(claim.check(table, opts))
        verdicts.append(ClaimVerdict(claim.claim_id, claim.description, claim.expected_status,
                                     REPRODUCED if holds else NOT_REPRODUCED))
    return ClaimRegister(tuple(verdicts))
