"""Keyframe selection by k-means over frame features, and seeded clip augmentation."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from .errors import InfeasibleClusteringError, InfeasibleSelectionError

FEATURE_SIDE = 32
LUMA = np.array([0.299, 0.587, 0.114])

KMEANS_TOL = 1e-6
KMEANS_MAX_ITER = 300

ROTATION_RANGE = (-15.0, 15.0)
BRIGHTNESS_RANGE = (0.75, 1.25)
AUGMENT_P = 0.5


@dataclass(frozen=True, eq=False)
class Clip:
    frames: np.ndarray  # (T, H, W, 3) uint8
    fps: float = 100.0

    def __post_init__(self):
        f = np.asarray(self.frames)
        if f.ndim != 4 or f.shape[-1] != 3 or f.shape[0] < 1:
            raise ValueError(f"clip frames must have shape (T>=1, H, W, 3), got {f.shape}")
        if f.dtype != np.uint8:
            raise ValueError(f"clip frames must be uint8, got {f.dtype}")
        object.__setattr__(self, "frames", f)

    def __len__(self):
        return self.frames.shape[0]

    def tobytes(self) -> bytes:
        return self.frames.tobytes()


# ---------------------------------------------------------------------------
# clip I/O: a directory of %06d.png frames


def read_clip(directory, fps: float = 100.0) -> Clip:
    paths = sorted(Path(directory).glob("*.png"))
    if not paths:
        raise FileNotFoundError(f"no PNG frames in {directory}")
    frames = [np.asarray(Image.open(p).convert("RGB"), dtype=np.uint8) for p in paths]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ValueError(f"frames in {directory} have differing sizes {sorted(shapes)}")
    return Clip(np.stack(frames), fps)


def write_clip(clip: Clip, directory) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(clip.frames):
        target = out / f"{i:06d}.png"
        tmp = out / f".{i:06d}.png.tmp"
        Image.fromarray(frame).save(tmp, format="PNG")
        os.replace(tmp, target)


# ---------------------------------------------------------------------------
# features


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a (..., H, W) float array with half-pixel-centre bilinear sampling."""
    h, w = img.shape[-2:]

    def axis(n_in, n_out):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, wy = axis(h, out_h)
    x0, x1, wx = axis(w, out_w)
    top = img[..., y0, :][..., x0] * (1 - wx) + img[..., y0, :][..., x1] * wx
    bot = img[..., y1, :][..., x0] * (1 - wx) + img[..., y1, :][..., x1] * wx
    return top * (1 - wy)[:, None] + bot * wy[:, None]


def featurize(clip: Clip, side: int = FEATURE_SIDE) -> np.ndarray:
    """One row per frame: luma, bilinear-resized to side x side, scaled to [0, 1], flattened row-major."""
    luma = clip.frames.astype(np.float64) @ LUMA  # (T, H, W)
    small = _bilinear_resize(luma, side, side) / 255.0
    return np.clip(small, 0.0, 1.0).reshape(len(clip), side * side)


# ---------------------------------------------------------------------------
# k-means


@dataclass(frozen=True, eq=False)
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    iterations: int
    inertia_history: Tuple[float, ...] = field(default=())


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = (
        np.einsum("ij,ij->i", points, points)[:, None]
        - 2.0 * points @ centroids.T
        + np.einsum("ij,ij->i", centroids, centroids)[None, :]
    )
    return np.maximum(d, 0.0)


def _inertia(points, centroids, labels) -> float:
    diff = points - centroids[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(points, points[chosen]).ravel()
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen centre; take the lowest unused index
            unused = np.setdiff1d(np.arange(n), chosen)
            idx = int(unused[0]) if unused.size else chosen[-1]
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(points, points[idx:idx + 1]).ravel())
    return points[chosen].copy()


def kmeans(points, k: int, seed=0, tol: float = KMEANS_TOL, max_iter: int = KMEANS_MAX_ITER) -> KMeansResult:
    """Lloyd's algorithm from a seeded k-means++ start.

    Stops once no centroid moves more than ``tol`` or after ``max_iter``
    iterations. An empty cluster is moved onto the point farthest from its
    current centroid.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if k < 1:
        raise InfeasibleClusteringError(f"k must be at least 1, got {k}")
    if n < k:
        raise InfeasibleClusteringError(f"cannot form {k} clusters from {n} points")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(x, k, rng)
    history = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        labels = np.argmin(_sq_dists(x, centroids), axis=1)
        history.append(_inertia(x, centroids, labels))
        new = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts):
            new[j] = x[labels == j].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            residual = np.einsum("ij,ij->i", x - new[labels], x - new[labels])
            taken = set()
            for j in empty:
                order = np.lexsort((np.arange(n), -residual))
                idx = next((int(i) for i in order if int(i) not in taken), int(order[0]))
                taken.add(idx)
                new[j] = x[idx]
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift < tol:
            break
    labels = np.argmin(_sq_dists(x, centroids), axis=1)
    final = _inertia(x, centroids, labels)
    history.append(final)
    return KMeansResult(centroids, labels, final, iterations, tuple(history))


# ---------------------------------------------------------------------------
# keyframes

PRESETS = ("k10", "k20", "k50")


@dataclass(frozen=True)
class KeyframeConfig:
    """Segments are (start, stop, k) over frame indices; ``None`` bounds resolve against clip length.

    The presets are: k10 clusters the whole clip; k20 skips the first 100
    frames; k50 takes 20 from the first half and 30 from the second.
    """

    preset: str = "k20"
    k: Optional[int] = None
    skip: int = 0
    segments: Tuple[Tuple[Optional[float], Optional[float], int], ...] = ()

    @classmethod
    def from_preset(cls, preset: str) -> "KeyframeConfig":
        preset = preset.lower()
        if preset == "k10":
            return cls("k10", 10)
        if preset == "k20":
            return cls("k20", 20, skip=100)
        if preset == "k50":
            return cls("k50", 50, segments=((0, 0.5, 20), (0.5, None, 30)))
        raise ValueError(f"unknown keyframe preset {preset!r}; expected one of {PRESETS}")

    @classmethod
    def custom(cls, k: int, skip: int = 0) -> "KeyframeConfig":
        if k < 1:
            raise ValueError("k must be at least 1")
        return cls("custom", k, skip=skip)

    @property
    def total_k(self) -> int:
        return sum(s[2] for s in self.segments) if self.segments else int(self.k)

    def resolve(self, n_frames: int) -> List[Tuple[str, np.ndarray, int]]:
        """Named candidate index ranges with their cluster counts."""
        if not self.segments:
            return [("all" if not self.skip else f"from-{self.skip}", np.arange(self.skip, n_frames), int(self.k))]
        half = n_frames // 2
        out = []
        for start, stop, k in self.segments:
            lo = 0 if not start else (half if start == 0.5 else int(start))
            hi = n_frames if stop is None else (half if stop == 0.5 else int(stop))
            name = "first-half" if (lo, hi) == (0, half) else ("second-half" if (lo, hi) == (half, n_frames) else f"{lo}:{hi}")
            out.append((name, np.arange(lo, hi), k))
        return out


def _representatives(features, candidates, result: KMeansResult) -> List[int]:
    chosen: List[int] = []
    used = set()
    for j in range(result.centroids.shape[0]):
        members = np.flatnonzero(result.assignments == j)
        pick = None
        if members.size:
            d = ((features[members] - result.centroids[j]) ** 2).sum(axis=1)
            for m in members[np.lexsort((members, d))]:
                if int(candidates[m]) not in used:
                    pick = int(candidates[m])
                    break
        if pick is None:
            pick = next(int(c) for c in candidates if int(c) not in used)
        used.add(pick)
        chosen.append(pick)
    return chosen


def select_keyframes(clip: Clip, config: KeyframeConfig, seed=0, features: Optional[np.ndarray] = None) -> List[int]:
    """Sorted, unique frame indices: per segment, the frame nearest each k-means centroid."""
    n = len(clip)
    feats = featurize(clip) if features is None else features
    segments = config.resolve(n)
    seeds = np.random.SeedSequence(seed).spawn(len(segments))
    picked: List[int] = []
    for (name, candidates, k), ss in zip(segments, seeds):
        if candidates.size < k:
            raise InfeasibleSelectionError(
                f"segment {name} has {candidates.size} candidate frames, needs {k}", segment=name
            )
        result = kmeans(feats[candidates], k, seed=np.random.default_rng(ss))
        picked.extend(_representatives(feats[candidates], candidates, result))
    return sorted(picked)


# ---------------------------------------------------------------------------
# augmentation


@dataclass(frozen=True)
class AugmentPlan:
    flip: bool
    rotate: bool
    angle: float
    brighten: bool
    factor: float
    seed: int = 0

    def __post_init__(self):
        if not ROTATION_RANGE[0] <= self.angle <= ROTATION_RANGE[1]:
            raise ValueError(f"rotation angle {self.angle} outside {ROTATION_RANGE}")
        if not BRIGHTNESS_RANGE[0] <= self.factor <= BRIGHTNESS_RANGE[1]:
            raise ValueError(f"brightness factor {self.factor} outside {BRIGHTNESS_RANGE}")

    @classmethod
    def identity(cls) -> "AugmentPlan":
        return cls(False, False, 0.0, False, 1.0)

    def to_json(self) -> dict:
        return {"flip": self.flip, "rotate": self.rotate, "angle": self.angle,
                "brighten": self.brighten, "factor": self.factor, "seed": self.seed}


def derive_seed(seed: int, video_id: str) -> int:
    """Stable per-video seed, so parallel and serial corpus runs agree."""
    digest = hashlib.sha256(f"{int(seed)}:{video_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def plan_augmentation(seed) -> AugmentPlan:
    """Three independent p=0.5 coin flips (flip, rotate, brighten), then the parameters of the active ones."""
    rng = np.random.default_rng(seed)
    flip, rotate, brighten = (bool(u < AUGMENT_P) for u in rng.random(3))
    angle = float(rng.uniform(*ROTATION_RANGE)) if rotate else 0.0
    factor = float(rng.uniform(*BRIGHTNESS_RANGE)) if brighten else 1.0
    return AugmentPlan(flip, rotate, angle, brighten, factor, seed if isinstance(seed, int) else 0)


def _rotate(frames: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate every frame about its centre (counter-clockwise for positive angles), bilinear, black fill."""
    t, h, w, _ = frames.shape
    theta = np.deg2rad(angle_deg)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    # inverse map: output pixel -> source location
    sx = np.cos(theta) * dx - np.sin(theta) * dy + cx
    sy = np.sin(theta) * dx + np.cos(theta) * dy + cy
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx, fy = sx - x0, sy - y0
    src = frames.astype(np.float64)
    out = np.zeros_like(src)
    for oy, ox, wgt in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx), (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
        yi, xi = y0 + oy, x0 + ox
        inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        vals = src[:, np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1), :]
        out += vals * (wgt * inside)[None, :, :, None]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def apply_augmentation(plan: AugmentPlan, clip: Clip) -> Clip:
    """Apply one plan to every frame (flip, then rotation, then brightness)."""
    frames = clip.frames
    if plan.flip:
        frames = frames[:, :, ::-1, :]
    if plan.rotate and plan.angle != 0.0:
        frames = _rotate(frames, plan.angle)
    if plan.brighten and plan.factor != 1.0:
        frames = np.clip(np.rint(frames.astype(np.float64) * plan.factor), 0, 255).astype(np.uint8)
    return Clip(np.ascontiguousarray(frames), clip.fps)


def process_clip(clip: Clip, video_id: str, config: KeyframeConfig, seed: int):
    """Keyframes and augmented clip for one video, seeded from (seed, video_id) only."""
    vseed = derive_seed(seed, video_id)
    indices = select_keyframes(clip, config, seed=vseed)
    plan = plan_augmentation(vseed)
    return indices, plan, apply_augmentation(plan, clip)


def process_corpus(clips: Sequence[Tuple[str, Clip]], config: KeyframeConfig, seed: int, workers: int = 1):
    """Run :func:`process_clip` over many clips; output order and content do not depend on ``workers``."""
    if workers <= 1:
        return [process_clip(c, vid, config, seed) for vid, c in clips]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: process_clip(item[1], item[0], config, seed), clips))
