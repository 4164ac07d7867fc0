"""End-to-end audit pipeline, bundled appendix fixture and report emission."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import __version__
from .errors import CorruptedFixtureError, IncompleteTableError
from .fairness import ClaimRegister, FairnessDefinition, GapReport, gaps, verify_claims
from .metrics import DEFAULT_SUPPORTS, EvalSet, MetricTable, Reconstruction, read_metric_table, reconstruct_table, table, write_metric_table
from .records import FUSED_ORDER, Regime, read_records
from .stats import BoxplotStats, aggregate_stats

log = logging.getLogger(__name__)

FIXTURE_ENV = "FAIRSCOPE_FIXTURE"
FIXTURE_NAME = "appendix_tables.csv"
FIXTURE_SHA256 = "ded77df0eff1eecd9a6eebdb7f2975700c8931839db7460d92b44c2367b88456"
FIXTURE_CELLS = 648
RECONSTRUCTION_THRESHOLD = 0.95

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def fixture_bytes() -> Tuple[bytes, str, bool]:
    """Raw fixture bytes, where they came from, and whether it is the bundled copy."""
    override = os.environ.get(FIXTURE_ENV)
    if override:
        return Path(override).read_bytes(), override, False
    data = resources.files("fairscope").joinpath("data", FIXTURE_NAME).read_bytes()
    return data, f"fairscope/data/{FIXTURE_NAME}", True


def load_fixture(check: bool = True) -> MetricTable:
    """The transcribed appendix tables as a MetricTable.

    The bundled copy is checksum-verified; a ``FAIRSCOPE_FIXTURE`` override is
    loaded as-is so tests can feed deliberately edited tables.
    """
    data, origin, bundled = fixture_bytes()
    if bundled and check and _sha256(data) != FIXTURE_SHA256:
        raise CorruptedFixtureError(f"checksum mismatch for {origin}")
    if not bundled:
        log.warning("using fixture override %s (checksum not enforced)", origin)
    tbl = read_metric_table(io.StringIO(data.decode("utf-8")))
    if 3 * len(tbl) != FIXTURE_CELLS:
        raise IncompleteTableError(f"fixture has {3 * len(tbl)} cells, expected {FIXTURE_CELLS}")
    return tbl


# ---------------------------------------------------------------------------
# verify-paper


@dataclass
class PaperVerification:
    claims: ClaimRegister
    reconstructions: Dict[tuple, Reconstruction]
    fixture_origin: str

    @property
    def consistent_fraction(self) -> float:
        return sum(r.consistent for r in self.reconstructions.values()) / len(self.reconstructions)

    @property
    def inconsistent_cells(self) -> List[tuple]:
        return [k for k, r in self.reconstructions.items() if not r.consistent]

    @property
    def exit_code(self) -> int:
        ok = self.claims.all_match and self.consistent_fraction >= RECONSTRUCTION_THRESHOLD
        return EXIT_OK if ok else EXIT_FAILED

    def lines(self) -> List[str]:
        out = []
        n = len(self.reconstructions)
        good = n - len(self.inconsistent_cells)
        status = "PASS" if self.consistent_fraction >= RECONSTRUCTION_THRESHOLD else "FAIL"
        out.append(f"{status} fixture-integrity: {good}/{n} cells reconstruct to integer counts")
        for model, regime, group, cls in self.inconsistent_cells:
            out.append(f"     inconsistent cell: {regime}/{group}/{model}/{cls}")
        for v in self.claims:
            status = "PASS" if v.matches else "FAIL"
            out.append(f"{status} {v.claim_id}: {v.verdict} (expected {v.expected_status}) - {v.description}")
        return out


def verify_paper(aggregation: str = "mean", eqod_combine: str = "mean") -> PaperVerification:
    _, origin, _ = fixture_bytes()
    tbl = load_fixture()
    recon = reconstruct_table(tbl, DEFAULT_SUPPORTS)
    claims = verify_claims(tbl, aggregation, eqod_combine)
    return PaperVerification(claims, recon, origin)


# ---------------------------------------------------------------------------
# audit


@dataclass
class AuditReport:
    metrics: MetricTable
    gap_reports: List[GapReport] = field(default_factory=list)
    stats: Dict[Tuple[Regime, EvalSet], BoxplotStats] = field(default_factory=dict)
    claims: Optional[ClaimRegister] = None
    errors: List[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def gap_report(self, regime, definition) -> GapReport:
        regime, definition = Regime.parse(regime), FairnessDefinition.parse(definition)
        for g in self.gap_reports:
            if g.regime is regime and g.definition is definition:
                return g
        raise KeyError((regime, definition))

    def to_json(self) -> dict:
        metrics = [
            {"regime": r.value, "test_set": g.value, "model": m, "class": c.value,
             "acc": cm.acc, "tpr": cm.tpr, "fpr": cm.fpr}
            for (m, r, g, c), cm in self.metrics.items()
        ]
        return {
            "provenance": self.provenance,
            "metrics": metrics,
            "gaps": [g.to_json() for g in self.gap_reports],
            "rankings": {f"{g.regime.value}/{g.definition.value}": g.ranking.as_lists() for g in self.gap_reports},
            "stats": [
                {"regime": r.value, "test_set": s.value, **st.as_dict()} for (r, s), st in self.stats.items()
            ],
            "claims": None if self.claims is None else [v.to_json() for v in self.claims],
            "errors": list(self.errors),
        }


def build_report(tbl: MetricTable, aggregation: str = "mean", eqod_combine: str = "mean",
                 provenance: Optional[dict] = None) -> AuditReport:
    report = AuditReport(tbl, provenance=dict(provenance or {}))
    for regime in tbl.regimes():
        for definition in FairnessDefinition:
            try:
                report.gap_reports.append(gaps(tbl, regime, definition, aggregation, eqod_combine))
            except IncompleteTableError as exc:
                report.errors.append(f"gaps {regime.value}/{definition.value}: {exc}")
        for group in EvalSet:
            if all(tbl.has_group(m, regime, group) for m in tbl.models(regime)):
                report.stats[(regime, group)] = aggregate_stats(tbl, regime, group)
    try:
        report.claims = verify_claims(tbl, aggregation, eqod_combine)
    except IncompleteTableError:
        report.claims = None
    return report


def run_audit(records_path, aggregation: str = "mean", eqod_combine: str = "mean", fuse: bool = False) -> AuditReport:
    """Prediction CSV -> metric tables -> DP/EQOP/EQOD gaps per regime -> rankings, stats, claims.

    Stage failures after metrics (for instance a file with one gender only) are
    recorded in ``report.errors`` rather than raised, so metrics are always kept.
    """
    raw = Path(records_path).read_bytes()
    records = read_records(records_path, fuse=fuse)
    tbl = table(records)
    provenance = {
        "tool": "fairscope",
        "version": __version__,
        "input": {"name": Path(records_path).name, "sha256": _sha256(raw), "records": len(records)},
        "options": {"aggregation": aggregation, "eqod_combine": eqod_combine, "fuse": fuse},
        "seeds": {},
    }
    return build_report(tbl, aggregation, eqod_combine, provenance)


# ---------------------------------------------------------------------------
# emission

GAP_CSV_COLUMNS = ("regime", "definition", "aggregation", "model", "class", "gap")
STATS_CSV_COLUMNS = ("regime", "test_set", "stat", "value")
CSV_SECTIONS = ("metrics", "gaps", "stats")


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def emit(report: AuditReport, fmt: str = "json", section: str = "metrics") -> bytes:
    """Serialize a report. CSV output is one section at a time, one row per plotted datum."""
    if fmt == "json":
        return (json.dumps(report.to_json(), indent=2) + "\n").encode("utf-8")
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    if section == "metrics":
        return write_metric_table(report.metrics).encode("utf-8")
    if section == "gaps":
        rows = [
            (g.regime.value, g.definition.value, g.aggregation, m, c.value, repr(gap))
            for g in report.gap_reports
            for m in sorted(g.models)
            for c, gap in zip(FUSED_ORDER, g.models[m].per_class)
        ]
        return _csv(rows, GAP_CSV_COLUMNS).encode("utf-8")
    if section == "stats":
        rows = [
            (r.value, s.value, name, repr(value))
            for (r, s), st in report.stats.items()
            for name, value in st.as_dict().items()
        ]
        return _csv(rows, STATS_CSV_COLUMNS).encode("utf-8")
    raise ValueError(f"unknown CSV section {section!r}; expected one of {CSV_SECTIONS}")


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)

