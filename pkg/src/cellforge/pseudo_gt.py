"""Align externally produced segmentation masks with simulated detections.

External mask proposals are noisy: they may miss cells or hallucinate
extras.  The correction removes masks no detection touches, relabels the
survivors to their detection's track id, and backfills a synthetic disk
for every detection left without a mask, so that afterwards the nonzero
labels are exactly the detection track ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError
from .render import disk_pixel_radius

__all__ = ["correct_segmentation"]


@dataclass(frozen=True)
class _MaskInfo:
    label: int
    pixels: tuple[np.ndarray, np.ndarray]  # rows, cols
    centroid: tuple[float, float]  # (x, y) in pixel units


def _disk_bool_mask(shape: tuple[int, int], cx: float, cy: float, radius: float) -> np.ndarray:
    h, w = shape
    out = np.zeros(shape, dtype=bool)
    c_lo = max(0, int(math.floor(cx - radius - 1.0)))
    c_hi = min(w - 1, int(math.ceil(cx + radius + 1.0)))
    r_lo = max(0, int(math.floor(cy - radius - 1.0)))
    r_hi = min(h - 1, int(math.ceil(cy + radius + 1.0)))
    if c_lo > c_hi or r_lo > r_hi:
        return out
    cols = np.arange(c_lo, c_hi + 1, dtype=np.float64) + 0.5 - cx
    rows = np.arange(r_lo, r_hi + 1, dtype=np.float64) + 0.5 - cy
    out[r_lo : r_hi + 1, c_lo : c_hi + 1] = rows[:, None] ** 2 + cols[None, :] ** 2 <= radius * radius
    return out


def correct_segmentation(
    seg: np.ndarray,
    detections: list[tuple[int, tuple[float, float]]],
    mean_area: float,
) -> np.ndarray:
    """Correct one frame of proposal masks against detection centers.

    A detection "touches" a mask iff its conditioning disk (radius
    ``sqrt(mean_area/pi)/4`` pixels) covers at least one mask pixel.
    Untouched masks are erased.  Each surviving mask takes the track id of
    the touching detection whose center is nearest to the mask centroid
    (ties to the smaller id); detections that win no mask get a filled
    circle of radius ``sqrt(mean_area/pi)`` pixels, clipped to the image
    and painted over background only, in ascending track id order.

    ``detections`` holds (track_id, (x, y)) with centers in pixel units.
    """
    seg = np.asarray(seg)
    if seg.ndim != 2:
        raise ValidationError("segmentation mask must be a 2D label array")
    ids = [d[0] for d in detections]
    if len(ids) != len(set(ids)):
        raise ValidationError("detection track ids must be distinct")

    touch_radius = disk_pixel_radius(mean_area)
    circle_radius = math.sqrt(mean_area / math.pi)

    masks: dict[int, _MaskInfo] = {}
    for label in np.unique(seg):
        if label == 0:
            continue
        rows, cols = np.nonzero(seg == label)
        centroid = (float(cols.mean() + 0.5), float(rows.mean() + 0.5))
        masks[int(label)] = _MaskInfo(int(label), (rows, cols), centroid)

    # Which masks each detection's disk touches.
    touched_by: dict[int, list[tuple[int, tuple[float, float]]]] = {m: [] for m in masks}
    for track_id, center in detections:
        disk = _disk_bool_mask(seg.shape, center[0], center[1], touch_radius)
        for label in np.unique(seg[disk]):
            if label != 0:
                touched_by[int(label)].append((track_id, center))

    out = np.zeros_like(seg, dtype=np.uint16)
    winners: set[int] = set()
    for label, info in masks.items():
        candidates = touched_by[label]
        if not candidates:
            continue  # hallucinated mask: erased
        track_id, _ = min(
            candidates,
            key=lambda dc: (
                (dc[1][0] - info.centroid[0]) ** 2 + (dc[1][1] - info.centroid[1]) ** 2,
                dc[0],
            ),
        )
        out[info.pixels] = track_id
        winners.add(track_id)

    for track_id, center in sorted(detections):
        if track_id in winners:
            continue
        circle = _disk_bool_mask(seg.shape, center[0], center[1], circle_radius)
        out[circle & (out == 0)] = track_id

    return out
