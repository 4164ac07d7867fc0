"""Label taxonomy, prediction records and the prediction-CSV reader/writer.

Audits always run on the fused four-class taxonomy (Surprised, Upset, Sad,
Happy). Raw six-way files are accepted and collapsed with ``fuse=True``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

from .errors import DuplicationError, InvalidScoreError, ParseError, TaxonomyMismatchError


class _ParsableEnum(Enum):
    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown {cls.__name__} {text!r}")

    def __str__(self):
        return self.value


class EmotionLabel(_ParsableEnum):
    HAPPINESS = "happiness"
    SURPRISE = "surprise"
    SADNESS = "sadness"
    DISGUST = "disgust"
    ANGER = "anger"
    CONTEMPT = "contempt"


class FusedLabel(_ParsableEnum):
    """Four-class taxonomy. Member order is the report column order."""

    SURPRISED = "surprised"
    UPSET = "upset"
    SAD = "sad"
    HAPPY = "happy"

    @property
    def index(self) -> int:
        return FUSED_ORDER.index(self)


class Gender(_ParsableEnum):
    MALE = "male"
    FEMALE = "female"


class Regime(_ParsableEnum):
    """Training population of a model."""

    REGULAR = "regular"
    FEMALE = "female"
    MALE = "male"

    @property
    def title(self) -> str:
        return {"regular": "Regular", "female": "FemaleTrained", "male": "MaleTrained"}[self.value]


class Veracity(_ParsableEnum):
    GENUINE = "genuine"
    FAKE = "fake"


class Taxonomy(_ParsableEnum):
    RAW6 = "raw6"
    FUSED4 = "fused4"

    @property
    def size(self) -> int:
        return 6 if self is Taxonomy.RAW6 else 4


EMOTION_ORDER = tuple(EmotionLabel)
FUSED_ORDER = tuple(FusedLabel)

_FUSION = {
    EmotionLabel.HAPPINESS: FusedLabel.HAPPY,
    EmotionLabel.SURPRISE: FusedLabel.SURPRISED,
    EmotionLabel.SADNESS: FusedLabel.SAD,
    EmotionLabel.DISGUST: FusedLabel.UPSET,
    EmotionLabel.ANGER: FusedLabel.UPSET,
    EmotionLabel.CONTEMPT: FusedLabel.UPSET,
}


def fuse_label(raw: EmotionLabel) -> FusedLabel:
    """Map a six-way emotion onto the four-class taxonomy (contempt, disgust and anger become Upset)."""
    return _FUSION[EmotionLabel.parse(raw)]


def softmax(logits: Sequence[float]) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidScoreError("score vector must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise InvalidScoreError(f"non-finite score in {list(x)}")
    e = np.exp(x - x.max())
    return e / e.sum()


def _argmax(scores) -> int:
    # np.argmax returns the first maximal index, which is the tie rule we want
    return int(np.argmax(np.asarray(scores, dtype=np.float64)))


def decode(scores: Sequence[float]) -> FusedLabel:
    """Hard decision for a four-way score vector; ties go to the earliest class in report order."""
    if len(scores) != 4:
        raise TaxonomyMismatchError(f"expected 4 fused scores, got {len(scores)}")
    if not all(math.isfinite(s) for s in scores):
        raise InvalidScoreError(f"non-finite score in {list(scores)}")
    return FUSED_ORDER[_argmax(scores)]


def _is_probability_vector(values) -> bool:
    v = np.asarray(values, dtype=np.float64)
    return bool(np.all(v >= 0.0) and np.all(v <= 1.0) and abs(v.sum() - 1.0) <= 1e-6)


def fuse_scores(raw_scores: Sequence[float]) -> tuple:
    """Collapse six raw scores (happiness, surprise, sadness, disgust, anger, contempt order)
    into fused report order by summing the Upset constituents.

    Inputs that are not already a probability vector are treated as logits and
    passed through softmax first, so the summed mass stays meaningful.
    """
    if len(raw_scores) != 6:
        raise TaxonomyMismatchError(f"expected 6 raw scores, got {len(raw_scores)}")
    p = np.asarray(raw_scores, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise InvalidScoreError(f"non-finite score in {list(raw_scores)}")
    if not _is_probability_vector(p):
        p = softmax(p)
    fused = dict.fromkeys(FUSED_ORDER, 0.0)
    for emotion, value in zip(EMOTION_ORDER, p):
        fused[_FUSION[emotion]] += float(value)
    return tuple(fused[c] for c in FUSED_ORDER)


Label = Union[EmotionLabel, FusedLabel]
Prediction = Union[EmotionLabel, FusedLabel, tuple]


@dataclass(frozen=True)
class PredictionRecord:
    model_id: str
    regime: Regime
    subject_id: str
    gender: Gender
    video_id: str
    veracity: Veracity
    true_label: Label
    prediction: Prediction

    @property
    def key(self) -> tuple:
        return (self.model_id, self.regime, self.video_id)

    @property
    def has_scores(self) -> bool:
        return isinstance(self.prediction, tuple)

    @property
    def predicted_label(self) -> Label:
        if not self.has_scores:
            return self.prediction
        if len(self.prediction) == 4:
            return decode(self.prediction)
        return EMOTION_ORDER[_argmax(self.prediction)]

    def fused(self) -> "PredictionRecord":
        if isinstance(self.true_label, FusedLabel):
            return self
        if self.has_scores:
            prediction = fuse_scores(self.prediction)
        else:
            prediction = fuse_label(self.prediction)
        return PredictionRecord(
            self.model_id, self.regime, self.subject_id, self.gender, self.video_id,
            self.veracity, fuse_label(self.true_label), prediction,
        )


class RecordSet(Sequence):
    """Immutable, ordered collection of records sharing one taxonomy."""

    def __init__(self, records: Iterable[PredictionRecord], taxonomy: Taxonomy = Taxonomy.FUSED4):
        self._records = tuple(records)
        self.taxonomy = Taxonomy.parse(taxonomy)
        label_type = FusedLabel if self.taxonomy is Taxonomy.FUSED4 else EmotionLabel
        seen = set()
        for rec in self._records:
            if rec.key in seen:
                model, regime, video = rec.key
                raise DuplicationError(
                    f"duplicate record key (model_id={model}, regime={regime}, video_id={video})", key=rec.key
                )
            seen.add(rec.key)
            if not isinstance(rec.true_label, label_type):
                raise TaxonomyMismatchError(f"record {rec.key} does not use the {self.taxonomy} taxonomy")
            if rec.has_scores:
                if len(rec.prediction) != self.taxonomy.size:
                    raise TaxonomyMismatchError(
                        f"record {rec.key}: {len(rec.prediction)} scores for a {self.taxonomy.size}-class taxonomy"
                    )
            elif not isinstance(rec.prediction, label_type):
                raise TaxonomyMismatchError(f"record {rec.key} does not use the {self.taxonomy} taxonomy")

    def __getitem__(self, i):
        return self._records[i]

    def __len__(self):
        return len(self._records)

    def __eq__(self, other):
        if not isinstance(other, RecordSet):
            return NotImplemented
        return self.taxonomy is other.taxonomy and self._records == other._records

    def __repr__(self):
        return f"RecordSet({len(self)} records, taxonomy={self.taxonomy.value})"

    def fused(self) -> "RecordSet":
        if self.taxonomy is Taxonomy.FUSED4:
            return self
        return RecordSet((r.fused() for r in self._records), Taxonomy.FUSED4)

    def filter(self, predicate) -> "RecordSet":
        return RecordSet((r for r in self._records if predicate(r)), self.taxonomy)


BASE_COLUMNS = ("model_id", "regime", "subject_id", "gender", "video_id", "veracity", "true_label")
FUSED_SCORE_COLUMNS = tuple(f"score_{c.value}" for c in FUSED_ORDER)
RAW_SCORE_COLUMNS = tuple(f"score_{e.value}" for e in EMOTION_ORDER)


def _parse_label(text: str):
    key = text.strip().lower()
    for enum in (FusedLabel, EmotionLabel):
        try:
            return enum.parse(key)
        except ValueError:
            pass
    raise ValueError(f"unknown label {text!r}")


def ingest(stream: TextIO, fuse: bool = False) -> RecordSet:
    """Read a prediction CSV (label mode or score mode) into a validated RecordSet.

    Errors carry the 1-based file line number; the header is line 1.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: header row required", line=1) from None
    header = [h.strip() for h in header]
    if tuple(header[: len(BASE_COLUMNS)]) != BASE_COLUMNS:
        raise ParseError(f"header must start with {','.join(BASE_COLUMNS)}", line=1)
    tail = tuple(header[len(BASE_COLUMNS):])
    if tail == ("pred_label",):
        score_width = 0
    elif tail == FUSED_SCORE_COLUMNS:
        score_width = 4
    elif tail == RAW_SCORE_COLUMNS:
        score_width = 6
    else:
        raise ParseError(f"unrecognised prediction columns {tail}", line=1)

    records = []
    taxonomy = None
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
        cells = [c.strip() for c in row]
        try:
            model_id, regime, subject_id, gender, video_id, veracity, true_text = cells[:7]
            if not model_id or not subject_id or not video_id:
                raise ValueError("empty identifier")
            true_label = _parse_label(true_text)
            if score_width:
                prediction = tuple(float(v) for v in cells[7:])
                if not all(math.isfinite(v) for v in prediction):
                    raise ValueError("non-finite score")
            else:
                prediction = _parse_label(cells[7])
            rec = PredictionRecord(
                model_id, Regime.parse(regime), subject_id, Gender.parse(gender), video_id,
                Veracity.parse(veracity), true_label, prediction,
            )
        except ValueError as exc:
            raise ParseError(str(exc), line=line) from None

        row_taxonomy = Taxonomy.FUSED4 if isinstance(true_label, FusedLabel) else Taxonomy.RAW6
        pred_ok = (
            len(prediction) == row_taxonomy.size
            if score_width
            else isinstance(prediction, type(true_label))
        )
        if not pred_ok:
            raise ParseError("prediction and true label use different taxonomies", line=line)
        if taxonomy is None:
            taxonomy = row_taxonomy
        elif taxonomy is not row_taxonomy:
            raise ParseError("rows mix raw and fused taxonomies", line=line)
        records.append(rec)

    result = RecordSet(records, taxonomy or Taxonomy.FUSED4)
    return result.fused() if fuse else result


def read_records(path, fuse: bool = False) -> RecordSet:
    with open(path, newline="", encoding="utf-8") as fh:
        return ingest(fh, fuse=fuse)


def emit_records(records: RecordSet) -> str:
    """Serialize a RecordSet in the format :func:`ingest` reads back unchanged."""
    modes = {r.has_scores for r in records}
    if len(modes) > 1:
        raise TaxonomyMismatchError("cannot serialize a mix of label and score predictions")
    scored = modes == {True}
    if scored:
        tail = FUSED_SCORE_COLUMNS if records.taxonomy is Taxonomy.FUSED4 else RAW_SCORE_COLUMNS
    else:
        tail = ("pred_label",)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BASE_COLUMNS + tail)
    for r in records:
        row = [r.model_id, r.regime.value, r.subject_id, r.gender.value, r.video_id,
               r.veracity.value, r.true_label.value]
        if scored:
            row.extend(repr(float(v)) for v in r.prediction)
        else:
            row.append(r.prediction.value)
        writer.writerow(row)
    return buf.getvalue()
