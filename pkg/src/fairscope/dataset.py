"""Subject manifests and subject-disjoint train/validation/test splits."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import FrozenSet, Optional, TextIO, Tuple

import numpy as np

from .errors import DuplicationError, InfeasibleSplitError, ParseError
from .records import EMOTION_ORDER, EmotionLabel, Gender, Veracity

SASE_FE_SUBJECTS = 50
SASE_FE_FEMALE = 18
SASE_FE_MALE = 32
VIDEOS_PER_SUBJECT = 12
NOMINAL_FPS = 100.0


class ManifestShapeWarning(UserWarning):
    """Manifest loads fine but does not have the 50-subject / 12-video geometry."""


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    path: str
    emotion: EmotionLabel
    veracity: Veracity
    frame_count: int
    fps: float = NOMINAL_FPS

    def __post_init__(self):
        if self.frame_count <= 0:
            raise ValueError(f"video {self.video_id}: frame_count must be positive")
        if self.fps <= 0:
            raise ValueError(f"video {self.video_id}: fps must be positive")


@dataclass(frozen=True)
class SubjectEntry:
    id: str
    gender: Gender
    videos: Tuple[VideoEntry, ...]


@dataclass(frozen=True)
class Manifest:
    subjects: Tuple[SubjectEntry, ...]

    def __post_init__(self):
        seen = set()
        for s in self.subjects:
            if s.id in seen:
                raise DuplicationError(f"duplicate subject id {s.id!r}", key=s.id)
            seen.add(s.id)

    def subject(self, subject_id: str) -> SubjectEntry:
        for s in self.subjects:
            if s.id == subject_id:
                return s
        raise KeyError(subject_id)

    @property
    def video_count(self) -> int:
        return sum(len(s.videos) for s in self.subjects)

    def shape_problems(self) -> list:
        problems = []
        n_f = sum(s.gender is Gender.FEMALE for s in self.subjects)
        n_m = len(self.subjects) - n_f
        if (len(self.subjects), n_f, n_m) != (SASE_FE_SUBJECTS, SASE_FE_FEMALE, SASE_FE_MALE):
            problems.append(
                f"{len(self.subjects)} subjects ({n_f} female, {n_m} male); expected "
                f"{SASE_FE_SUBJECTS} ({SASE_FE_FEMALE} female, {SASE_FE_MALE} male)"
            )
        full = {(e, v) for e in EmotionLabel for v in Veracity}
        for s in self.subjects:
            kinds = [(v.emotion, v.veracity) for v in s.videos]
            if len(kinds) != VIDEOS_PER_SUBJECT or set(kinds) != full:
                problems.append(f"subject {s.id} does not have one genuine and one fake video per emotion")
        return problems

    def to_json(self) -> dict:
        return {
            "subjects": [
                {
                    "id": s.id,
                    "gender": s.gender.value,
                    "videos": [
                        {"video_id": v.video_id, "path": v.path, "emotion": v.emotion.value,
                         "veracity": v.veracity.value, "frame_count": v.frame_count, "fps": v.fps}
                        for v in s.videos
                    ],
                }
                for s in self.subjects
            ]
        }


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    return obj[key]


def parse_manifest(data) -> Manifest:
    subjects_raw = _require(data, "subjects", "manifest")
    if not isinstance(subjects_raw, list) or not subjects_raw:
        raise ParseError("manifest: 'subjects' must be a non-empty list")
    subjects = []
    for i, s in enumerate(subjects_raw):
        where = f"subjects[{i}]"
        try:
            videos = []
            for j, v in enumerate(_require(s, "videos", where)):
                vw = f"{where}.videos[{j}]"
                videos.append(VideoEntry(
                    video_id=str(_require(v, "video_id", vw)),
                    path=str(_require(v, "path", vw)),
                    emotion=EmotionLabel.parse(_require(v, "emotion", vw)),
                    veracity=Veracity.parse(_require(v, "veracity", vw)),
                    frame_count=int(_require(v, "frame_count", vw)),
                    fps=float(v.get("fps", NOMINAL_FPS)),
                ))
            subjects.append(SubjectEntry(str(_require(s, "id", where)), Gender.parse(_require(s, "gender", where)),
                                         tuple(videos)))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"{where}: {exc}") from None
    manifest = Manifest(tuple(subjects))
    for problem in manifest.shape_problems():
        warnings.warn(problem, ManifestShapeWarning, stacklevel=3)
    return manifest


def load_manifest(stream: TextIO) -> Manifest:
    """Parse and validate manifest JSON. Geometry deviations warn; schema violations raise."""
    try:
        data = json.load(stream)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}", line=exc.lineno) from None
    return parse_manifest(data)


def sase_fe_manifest(n_female: int = SASE_FE_FEMALE, n_male: int = SASE_FE_MALE,
                     frame_count: int = 600, root: str = "clips") -> Manifest:
    """Synthetic manifest with the SASE-FE geometry, used for demos and tests."""
    subjects = []
    for gender, n, prefix in ((Gender.FEMALE, n_female, "F"), (Gender.MALE, n_male, "M")):
        for i in range(n):
            sid = f"{prefix}{i + 1:02d}"
            videos = tuple(
                VideoEntry(f"{sid}_{e.value}_{v.value}", f"{root}/{sid}/{e.value}_{v.value}", e, v, frame_count)
                for e in EMOTION_ORDER
                for v in Veracity
            )
            subjects.append(SubjectEntry(sid, gender, videos))
    return Manifest(tuple(subjects))


@dataclass(frozen=True)
class SplitConfig:
    test_seed: int = 0
    val_seed: int = 0
    test_per_gender: int = 5
    val_subject_count: Optional[int] = 8
    val_fraction: Optional[float] = None

    def __post_init__(self):
        if self.test_per_gender < 1:
            raise ValueError("test_per_gender must be at least 1")

    def validation_size(self, pool: int) -> int:
        if self.val_fraction is not None:
            return int(round(self.val_fraction * pool))
        return int(self.val_subject_count)

    def to_json(self) -> dict:
        return {
            "test_seed": self.test_seed,
            "val_seed": self.val_seed,
            "test_per_gender": self.test_per_gender,
            "val_subject_count": self.val_subject_count,
            "val_fraction": self.val_fraction,
        }


@dataclass(frozen=True)
class SplitAssignment:
    test_subjects: FrozenSet[str]
    val_subjects: FrozenSet[str]
    train_subjects: FrozenSet[str]
    config: SplitConfig = field(default_factory=SplitConfig)
    test_videos: Tuple[str, ...] = ()
    val_videos: Tuple[str, ...] = ()
    train_videos: Tuple[str, ...] = ()

    def partition(self, name: str) -> FrozenSet[str]:
        """Subjects of "test", "val", "train" or "pool" (train and val together)."""
        parts = {"test": self.test_subjects, "val": self.val_subjects, "train": self.train_subjects,
                 "pool": self.train_subjects | self.val_subjects}
        if name not in parts:
            raise ValueError(f"unknown partition {name!r}; expected one of {sorted(parts)}")
        return parts[name]

    def to_json(self) -> dict:
        return {
            "test": sorted(self.test_subjects),
            "val": sorted(self.val_subjects),
            "train": sorted(self.train_subjects),
            "config": self.config.to_json(),
        }


def _draw(ids, n, seed) -> list:
    rng = np.random.Generator(np.random.PCG64(seed))
    picked = rng.choice(len(ids), size=n, replace=False)
    return [ids[i] for i in sorted(picked)]


def _videos_of(manifest, subject_ids) -> Tuple[str, ...]:
    return tuple(v.video_id for s in sorted(manifest.subjects, key=lambda s: s.id) if s.id in subject_ids
                 for v in s.videos)


def make_split(manifest: Manifest, config: SplitConfig = SplitConfig()) -> SplitAssignment:
    """Draw a gender-balanced test set once (``test_seed``), then validation subjects from the rest (``val_seed``).

    Subject ids are sorted before drawing, so listing order in the manifest
    does not affect the result.
    """
    by_gender = {g: sorted(s.id for s in manifest.subjects if s.gender is g) for g in Gender}
    test = []
    for offset, gender in enumerate((Gender.FEMALE, Gender.MALE)):
        pool = by_gender[gender]
        if len(pool) < config.test_per_gender:
            raise InfeasibleSplitError(
                f"need {config.test_per_gender} {gender} test subjects, manifest has {len(pool)}"
            )
        # independent streams per gender from the one test seed
        test.extend(_draw(pool, config.test_per_gender, [config.test_seed, offset]))
    rest = sorted(set(s.id for s in manifest.subjects) - set(test))
    n_val = config.validation_size(len(rest))
    if not 0 <= n_val < len(rest):
        raise InfeasibleSplitError(f"cannot take {n_val} validation subjects from a pool of {len(rest)}")
    val = _draw(rest, n_val, config.val_seed) if n_val else []
    train = sorted(set(rest) - set(val))
    test_s, val_s, train_s = frozenset(test), frozenset(val), frozenset(train)
    return SplitAssignment(
        test_s, val_s, train_s, config,
        _videos_of(manifest, test_s), _videos_of(manifest, val_s), _videos_of(manifest, train_s),
    )


def gender_subset(assignment: SplitAssignment, manifest: Manifest, gender, partition: str = "pool"):
    """Subjects and videos of one gender within a partition.

    The default "pool" is every non-test subject, which is what a single-gender
    model trains on before its per-run validation draw.
    """
    gender = Gender.parse(gender)
    members = assignment.partition(partition)
    subjects = frozenset(s.id for s in manifest.subjects if s.id in members and s.gender is gender)
    return subjects, _videos_of(manifest, subjects)
