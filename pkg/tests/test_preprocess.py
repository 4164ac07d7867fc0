import itertools

import numpy as np
import pytest

from conftest import make_clip
from fairscope.errors import InfeasibleClusteringError, InfeasibleSelectionError
from fairscope.preprocess import (
    AugmentPlan, Clip, KeyframeConfig, apply_augmentation, featurize, kmeans, plan_augmentation, process_corpus,
    read_clip, select_keyframes, write_clip,
)


def solid(value, n=1, h=6, w=5):
    return Clip(np.full((n, h, w, 3), value, dtype=np.uint8))


@pytest.mark.parametrize("value, expected", [(0, 0.0), (255, 1.0), (128, 128 / 255)])
def test_featurize_solid_frames(value, expected):
    f = featurize(solid(value))
    assert f.shape == (1, 32 * 32)
    assert np.allclose(f, expected, atol=1e-9)


def test_featurize_gray_value():
    assert featurize(solid(128))[0, 0] == pytest.approx(0.50196, abs=1e-5)


def test_clip_directory_round_trip(tmp_path):
    clip = make_clip(np.random.default_rng(0), 5)
    write_clip(clip, tmp_path / "c")
    assert sorted(p.name for p in (tmp_path / "c").iterdir())[0] == "000000.png"
    assert read_clip(tmp_path / "c").tobytes() == clip.tobytes()


# k-means

def test_kmeans_k_equals_n():
    pts = np.random.default_rng(1).random((7, 3))
    r = kmeans(pts, 7, seed=0)
    assert r.inertia == pytest.approx(0.0, abs=1e-20)
    assert len(set(r.assignments.tolist())) == 7


def test_kmeans_two_identical_groups():
    pts = np.array([[0.0, 0.0]] * 5 + [[3.0, 4.0]] * 5)
    r = kmeans(pts, 2, seed=3)
    assert r.inertia == 0.0
    assert sorted(map(tuple, r.centroids.tolist())) == [(0.0, 0.0), (3.0, 4.0)]


def brute_force_two_partition(x):
    best = None
    n = len(x)
    for mask in range(1, 2 ** (n - 1)):
        a = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        sse = sum(((x[g] - x[g].mean(axis=0)) ** 2).sum() for g in (a, ~a))
        if best is None or sse < best[0]:
            best = (sse, frozenset(np.flatnonzero(a)), frozenset(np.flatnonzero(~a)))
    return best


def test_kmeans_matches_brute_force_partition():
    x = np.array([0, 0.01, 0.02, 0.03, 1, 1.01, 1.02, 1.03])[:, None]
    sse, a, b = brute_force_two_partition(x)
    assert {a, b} == {frozenset(range(4)), frozenset(range(4, 8))}
    for seed in range(10):
        r = kmeans(x, 2, seed=seed)
        got = {frozenset(np.flatnonzero(r.assignments == j)) for j in range(2)}
        assert got == {a, b}
        assert r.inertia == pytest.approx(sse, abs=1e-12)


def test_kmeans_inertia_monotone_on_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(10, 200))
        d = int(rng.integers(1, 6))
        k = int(rng.integers(1, min(n, 12) + 1))
        pts = rng.normal(size=(n, d)) * rng.uniform(0.1, 5)
        r = kmeans(pts, k, seed=int(rng.integers(2**31)))
        h = np.array(r.inertia_history)
        assert np.all(np.diff(h) <= 1e-9 * max(1.0, h[0]))
        assert r.iterations <= 300


def test_kmeans_too_few_points():
    with pytest.raises(InfeasibleClusteringError):
        kmeans(np.zeros((3, 2)), 4)


def test_kmeans_deterministic():
    pts = np.random.default_rng(9).random((50, 4))
    a, b = kmeans(pts, 5, seed=11), kmeans(pts, 5, seed=11)
    assert np.array_equal(a.centroids, b.centroids) and np.array_equal(a.assignments, b.assignments)


# keyframes

def random_features(rng, n, scenes=6, dim=16):
    centres = rng.random((scenes, dim))
    owner = np.sort(rng.integers(0, scenes, size=n))
    return centres[owner] + rng.normal(scale=0.01, size=(n, dim))


def test_k20_on_600_frames():
    clip = make_clip(np.random.default_rng(2), 600, h=4, w=4)
    idx = select_keyframes(clip, KeyframeConfig.from_preset("k20"), seed=1)
    assert len(idx) == 20 == len(set(idx)) and min(idx) >= 100 and idx == sorted(idx)


def test_k50_on_1000_frames():
    clip = make_clip(np.random.default_rng(3), 1000, h=4, w=4)
    idx = select_keyframes(clip, KeyframeConfig.from_preset("k50"), seed=1)
    assert sum(i < 500 for i in idx) == 20 and sum(i >= 500 for i in idx) == 30


def test_preset_constraints_on_random_lengths():
    rng = np.random.default_rng(5)
    for _ in range(12):
        n = int(rng.integers(300, 2001))
        feats = random_features(rng, n)
        clip = Clip(np.zeros((n, 1, 1, 3), dtype=np.uint8))
        k20 = select_keyframes(clip, KeyframeConfig.from_preset("k20"), seed=n, features=feats)
        assert len(set(k20)) == 20 and min(k20) >= 100 and max(k20) < n
        k50 = select_keyframes(clip, KeyframeConfig.from_preset("k50"), seed=n, features=feats)
        assert len(set(k50)) == 50
        assert sum(i < n // 2 for i in k50) == 20 and sum(i >= n // 2 for i in k50) == 30
        k10 = select_keyframes(clip, KeyframeConfig.from_preset("k10"), seed=n, features=feats)
        assert len(set(k10)) == 10 and k10 == sorted(k10)


def test_identical_frames_give_distinct_indices():
    idx = select_keyframes(solid(77, n=10), KeyframeConfig.from_preset("k10"), seed=0)
    assert idx == list(range(10))


def test_too_short_clip_names_segment():
    with pytest.raises(InfeasibleSelectionError) as info:
        select_keyframes(solid(0, n=110), KeyframeConfig.from_preset("k20"), seed=0)
    assert info.value.segment == "from-100"
    with pytest.raises(InfeasibleSelectionError) as info:
        select_keyframes(solid(0, n=30), KeyframeConfig.from_preset("k50"), seed=0)
    assert info.value.segment == "first-half"


def test_unknown_preset():
    with pytest.raises(ValueError):
        KeyframeConfig.from_preset("k99")


# augmentation

def test_plan_determinism():
    assert plan_augmentation(123) == plan_augmentation(123)


def test_plan_flag_rates_and_ranges():
    plans = [plan_augmentation(s) for s in range(10_000)]
    for flag in ("flip", "rotate", "brighten"):
        rate = np.mean([getattr(p, flag) for p in plans])
        assert 0.48 <= rate <= 0.52, (flag, rate)
    angles = [p.angle for p in plans if p.rotate]
    factors = [p.factor for p in plans if p.brighten]
    assert -15 <= min(angles) and max(angles) <= 15
    assert 0.75 <= min(factors) and max(factors) <= 1.25
    # flags are pairwise independent
    both = np.mean([p.flip and p.rotate for p in plans])
    assert abs(both - 0.25) < 0.02


def test_plan_validates_ranges():
    with pytest.raises(ValueError):
        AugmentPlan(False, True, 20.0, False, 1.0)
    with pytest.raises(ValueError):
        AugmentPlan(False, False, 0.0, True, 1.5)


def test_identity_plan_leaves_clip_unchanged():
    clip = make_clip(np.random.default_rng(6), 4)
    assert apply_augmentation(AugmentPlan.identity(), clip).tobytes() == clip.tobytes()


def test_flip_is_an_involution():
    clip = make_clip(np.random.default_rng(7), 3, h=5, w=7)
    plan = AugmentPlan(True, False, 0.0, False, 1.0)
    twice = apply_augmentation(plan, apply_augmentation(plan, clip))
    assert twice.tobytes() == clip.tobytes()


def test_brightness_factor_one_is_identity():
    clip = make_clip(np.random.default_rng(8), 3)
    assert apply_augmentation(AugmentPlan(False, False, 0.0, True, 1.0), clip).tobytes() == clip.tobytes()


@pytest.mark.parametrize("r, c", list(itertools.product(range(3), range(5))))
def test_flip_moves_single_white_pixel(r, c):
    frames = np.zeros((1, 3, 5, 3), dtype=np.uint8)
    frames[0, r, c] = 255
    out = apply_augmentation(AugmentPlan(True, False, 0.0, False, 1.0), Clip(frames)).frames
    assert np.argwhere(out[0, :, :, 0] == 255).tolist() == [[r, 5 - 1 - c]]


def test_brightness_scales_and_saturates():
    out = apply_augmentation(AugmentPlan(False, False, 0.0, True, 1.25), solid(100)).frames
    assert np.all(out == 125)
    out = apply_augmentation(AugmentPlan(False, False, 0.0, True, 1.25), solid(250)).frames
    assert np.all(out == 255)


def test_rotation_keeps_centre_and_blacks_corners():
    frames = np.full((1, 9, 9, 3), 200, dtype=np.uint8)
    out = apply_augmentation(AugmentPlan(False, True, 15.0, False, 1.0), Clip(frames)).frames
    assert np.all(out[0, 4, 4] == 200)
    assert out[0, 0, 0, 0] < 200


def test_serial_and_parallel_runs_are_byte_identical():
    rng = np.random.default_rng(10)
    clips = [(f"v{i}", make_clip(rng, 40, h=6, w=6)) for i in range(8)]
    cfg = KeyframeConfig.custom(5)
    serial = process_corpus(clips, cfg, seed=99, workers=1)
    parallel = process_corpus(clips, cfg, seed=99, workers=4)
    for (i1, p1, c1), (i2, p2, c2) in zip(serial, parallel):
        assert i1 == i2 and p1 == p2 and c1.tobytes() == c2.tobytes()
    again = process_corpus(clips, cfg, seed=99, workers=3)
    assert [x[0] for x in again] == [x[0] for x in serial]
