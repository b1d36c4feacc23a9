"""Estimate motion-model statistics from annotated time-lapse data.

Areas come from per-mask pixel counts, displacement magnitudes from
consecutive-frame centroid distances (in normalized units), the displacement
distribution from a gamma maximum-likelihood fit, and the split probability
from division counts per cell-frame.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import ConvergenceError, TrackRecord, ValidationError

__all__ = [
    "DisplacementSample",
    "estimate_area_stats",
    "centroids_from_labels",
    "compute_displacements",
    "digamma",
    "trigamma",
    "fit_gamma",
    "estimate_split_probability",
    "estimate_initial_count",
]


@dataclass(frozen=True)
class DisplacementSample:
    """One frame-to-frame displacement magnitude (normalized units)."""

    magnitude: float
    track_id: int
    frame: int


def estimate_area_stats(label_images: list[np.ndarray]) -> tuple[float, float]:
    """Mean and sample standard deviation of pixel counts per mask.

    Every distinct nonzero label in every frame counts as one mask.  Counts
    are sorted before reduction so the result is exactly permutation
    invariant.  Requires at least two masks.
    """
    counts: list[int] = []
    for img in label_images:
        labels, sizes = np.unique(np.asarray(img), return_counts=True)
        counts.extend(int(s) for l, s in zip(labels, sizes) if l != 0)
    if len(counts) < 2:
        raise ValidationError(f"need at least 2 masks to estimate areas, got {len(counts)}")
    arr = np.sort(np.asarray(counts, dtype=np.float64))
    mean = float(arr.mean())
    std = float(arr.std(ddof=1))
    return mean, std


def centroids_from_labels(
    label_images: list[np.ndarray],
) -> dict[tuple[int, int], tuple[float, float]]:
    """Normalized (x, y) centroid of every mask, keyed by (label, frame).

    Centroids average pixel centers, i.e. ``x = (mean_col + 0.5) / width``.
    """
    table: dict[tuple[int, int], tuple[float, float]] = {}
    for frame, img in enumerate(label_images):
        arr = np.asarray(img)
        h, w = arr.shape
        for label in np.unique(arr):
            if label == 0:
                continue
            rows, cols = np.nonzero(arr == label)
            x = (cols.mean() + 0.5) / w
            y = (rows.mean() + 0.5) / h
            table[(int(label), frame)] = (float(x), float(y))
    return table


def compute_displacements(
    tracks: list[TrackRecord] | tuple[TrackRecord, ...],
    detections: dict[tuple[int, int], tuple[float, float]],
) -> list[DisplacementSample]:
    """Per-track consecutive-frame displacement magnitudes.

    ``detections`` maps (track label, frame) to a normalized centroid.  A
    missing centroid for an alive track is reported as a warning and the
    affected frame pair skipped.
    """
    samples: list[DisplacementSample] = []
    for rec in tracks:
        for t in range(rec.begin, rec.end):
            a = detections.get((rec.label, t))
            b = detections.get((rec.label, t + 1))
            if a is None or b is None:
                missing = t if a is None else t + 1
                warnings.warn(
                    f"track {rec.label}: no centroid at frame {missing}, skipping pair",
                    stacklevel=2,
                )
                continue
            mag = math.hypot(b[0] - a[0], b[1] - a[1])
            samples.append(DisplacementSample(mag, rec.label, t))
    return samples


# Digamma/trigamma: recurrence up to x >= 10, then the Bernoulli-number
# asymptotic series.  Truncation error below 1e-12 at x = 10, so both
# functions are accurate to better than 1e-10 over the positive axis.

_DIGAMMA_SHIFT = 10.0


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function for x > 0."""
    if x <= 0:
        raise ValidationError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < _DIGAMMA_SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = (
        math.log(x)
        - 0.5 * inv
        - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
    )
    return acc + series


def trigamma(x: float) -> float:
    """Derivative of digamma for x > 0."""
    if x <= 0:
        raise ValidationError(f"trigamma requires x > 0, got {x}")
    acc = 0.0
    while x < _DIGAMMA_SHIFT:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv * (
        1.0
        + 0.5 * inv
        + inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))))
    )
    return acc + series


def _gamma_profile_loglik(alpha: float, mean: float, mean_log: float, n: int) -> float:
    # log-likelihood at (alpha, theta = mean / alpha), divided by nothing
    theta = mean / alpha
    return n * ((alpha - 1.0) * mean_log - alpha - alpha * math.log(theta) - math.lgamma(alpha))


def fit_gamma(samples) -> tuple[float, float]:
    """Maximum-likelihood gamma fit, returning (shape, scale).

    Zero magnitudes are dropped with a warning (the gamma density lives on
    x > 0).  The method-of-moments estimate (shape = mean^2/var,
    scale = var/mean) seeds a Newton iteration on the shape under the
    profile likelihood with scale = mean/shape, stopping when the shape
    moves by less than 1e-8 or after 100 iterations.  If Newton ends below
    the initializer's likelihood, the initializer is returned instead.
    """
    arr = np.asarray(list(samples), dtype=np.float64)
    positive = arr[arr > 0]
    dropped = arr.size - positive.size
    if dropped:
        warnings.warn(f"dropping {dropped} non-positive samples before gamma fit", stacklevel=2)
    n = positive.size
    if n < 30:
        raise ValidationError(f"need at least 30 positive samples for a gamma fit, got {n}")

    mean = float(positive.mean())
    var = float(positive.var(ddof=1))
    if var == 0.0:
        raise ValidationError("gamma fit impossible: samples have zero variance")
    mean_log = float(np.log(positive).mean())
    s = math.log(mean) - mean_log  # > 0 unless degenerate

    alpha0 = mean * mean / var
    alpha = alpha0
    for _ in range(100):
        f = math.log(alpha) - digamma(alpha) - s
        fprime = 1.0 / alpha - trigamma(alpha)
        step = f / fprime
        new_alpha = alpha - step
        if new_alpha <= 0.0:
            new_alpha = alpha / 2.0  # stay inside the domain
        done = abs(new_alpha - alpha) < 1e-8
        alpha = new_alpha
        if done:
            break

    ll_newton = _gamma_profile_loglik(alpha, mean, mean_log, n)
    ll_init = _gamma_profile_loglik(alpha0, mean, mean_log, n)
    if not math.isfinite(ll_newton) or ll_newton < ll_init:
        alpha = alpha0
    return alpha, mean / alpha


def estimate_split_probability(
    tracks: list[TrackRecord] | tuple[TrackRecord, ...],
) -> float:
    """Divisions per cell-frame: the MLE of a per-cell per-frame Bernoulli split."""
    if not tracks:
        raise ValidationError("cannot estimate split probability from an empty track set")
    daughters_per_parent: dict[int, int] = {}
    for rec in tracks:
        if rec.parent != 0:
            daughters_per_parent[rec.parent] = daughters_per_parent.get(rec.parent, 0) + 1
    divisions = sum(1 for count in daughters_per_parent.values() if count >= 2)
    cell_frames = sum(rec.end - rec.begin + 1 for rec in tracks)
    return divisions / cell_frames


def estimate_initial_count(
    tracks: list[TrackRecord] | tuple[TrackRecord, ...],
    frame_count: int,
) -> int:
    """Mean number of tracks alive per frame, rounded, at least 1."""
    if frame_count < 1:
        raise ValidationError("frame_count must be >= 1")
    alive = 0
    for rec in tracks:
        lo = max(rec.begin, 0)
        hi = min(rec.end, frame_count - 1)
        if hi >= lo:
            alive += hi - lo + 1
    return max(1, math.floor(alive / frame_count + 0.5))
