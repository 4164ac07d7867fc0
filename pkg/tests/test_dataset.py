import io
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from fairscope.dataset import (
    Manifest, ManifestShapeWarning, SplitAssignment, SplitConfig, gender_subset, load_manifest, make_split, sase_fe_manifest,
)
from fairscope.errors import DuplicationError, InfeasibleSplitError, ParseError
from fairscope.records import Gender

CANON = sase_fe_manifest()


def test_canonical_manifest_has_600_videos():
    assert CANON.video_count == 600
    assert len(CANON.subjects) == 50
    assert not CANON.shape_problems()


def test_manifest_json_round_trip():
    again = load_manifest(io.StringIO(json.dumps(CANON.to_json())))
    assert again == CANON


def test_default_split_counts():
    a = make_split(CANON, SplitConfig(test_seed=1, val_seed=2))
    assert (len(a.test_subjects), len(a.val_subjects), len(a.train_subjects)) == (10, 8, 32)
    assert (len(a.test_videos), len(a.val_videos), len(a.train_videos)) == (120, 96, 384)


def check_invariants(manifest, a, cfg):
    parts = [a.test_subjects, a.val_subjects, a.train_subjects]
    assert not (parts[0] & parts[1]) and not (parts[0] & parts[2]) and not (parts[1] & parts[2])
    assert frozenset().union(*parts) == frozenset(s.id for s in manifest.subjects)
    genders = [manifest.subject(s).gender for s in a.test_subjects]
    assert genders.count(Gender.FEMALE) == genders.count(Gender.MALE) == cfg.test_per_gender
    videos = a.test_videos + a.val_videos + a.train_videos
    assert len(set(videos)) == len(videos) == manifest.video_count


def test_invariants_over_100_seeds():
    rng = random.Random(0)
    for _ in range(100):
        cfg = SplitConfig(test_seed=rng.randrange(2**32), val_seed=rng.randrange(2**32))
        a = make_split(CANON, cfg)
        check_invariants(CANON, a, cfg)
        assert make_split(CANON, cfg) == a


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_val_seed_never_changes_test_set(test_seed, v1, v2):
    a = make_split(CANON, SplitConfig(test_seed, v1))
    b = make_split(CANON, SplitConfig(test_seed, v2))
    assert a.test_subjects == b.test_subjects


def test_manifest_order_does_not_matter():
    shuffled = list(CANON.subjects)
    random.Random(3).shuffle(shuffled)
    cfg = SplitConfig(5, 6)
    a, b = make_split(CANON, cfg), make_split(Manifest(tuple(shuffled)), cfg)
    assert (a.test_subjects, a.val_subjects, a.train_subjects) == (b.test_subjects, b.val_subjects, b.train_subjects)
    assert a.train_videos == b.train_videos


def test_validation_fraction_option():
    a = make_split(CANON, SplitConfig(1, 2, val_fraction=0.15))
    assert len(a.val_subjects) == round(0.15 * 40)


def test_insufficient_females_is_infeasible():
    with pytest.warns(ManifestShapeWarning):
        m = load_manifest(io.StringIO(json.dumps(sase_fe_manifest(n_female=9).to_json())))
    with pytest.raises(InfeasibleSplitError):
        make_split(m, SplitConfig(0, 0, test_per_gender=10))


def test_empty_subject_list_is_parse_error():
    with pytest.raises(ParseError):
        load_manifest(io.StringIO('{"subjects": []}'))
    with pytest.raises(ParseError):
        load_manifest(io.StringIO("{not json"))


def test_missing_field_is_parse_error():
    data = CANON.to_json()
    del data["subjects"][0]["videos"][0]["emotion"]
    with pytest.raises(ParseError, match="emotion"):
        load_manifest(io.StringIO(json.dumps(data)))


def test_duplicate_subject_rejected():
    data = CANON.to_json()
    data["subjects"].append(data["subjects"][0])
    with pytest.raises(DuplicationError):
        load_manifest(io.StringIO(json.dumps(data)))


def test_toy_manifest_loads_with_warning():
    toy = sase_fe_manifest(n_female=1, n_male=2).to_json()
    with pytest.warns(ManifestShapeWarning):
        m = load_manifest(io.StringIO(json.dumps(toy)))
    assert len(m.subjects) == 3


def test_gender_subsets():
    a = make_split(CANON, SplitConfig(1, 2))
    f_pool, f_videos = gender_subset(a, CANON, "female")
    assert len(f_pool) == 13 and len(f_videos) == 13 * 12
    f_train, _ = gender_subset(a, CANON, "female", "train")
    f_val, _ = gender_subset(a, CANON, "female", "val")
    assert f_train | f_val == f_pool and not f_train & f_val
    m_test, m_videos = gender_subset(a, CANON, Gender.MALE, "test")
    assert len(m_test) == 5 and len(m_videos) == 60
    assert all(CANON.subject(s).gender is Gender.MALE for s in m_test)


def test_gender_subset_absent_gender_is_empty():
    males = Manifest(tuple(s for s in CANON.subjects if s.gender is Gender.MALE))
    a = SplitAssignment(frozenset(), frozenset(), frozenset(s.id for s in males.subjects))
    assert gender_subset(a, males, "female") == (frozenset(), ())


def test_unknown_partition_rejected():
    with pytest.raises(ValueError):
        make_split(CANON).partition("holdout")
