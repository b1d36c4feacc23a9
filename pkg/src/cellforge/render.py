"""Conditioning-image rendering and training-pair construction.

Two encodings steer the downstream generative model:

* position map: black canvas with one filled disk per cell at its center,
  fixed radius ``sqrt(mean_area / pi) / 4`` pixels, colored by the cell's
  division-cycle phase (green in interphase, ramping to blue at division);
* movement map: the later raw frame in the red channel, the earlier
  frame's position map in green/blue, plus one-pixel displacement lines
  connecting each cell's earlier and later center.

Rasterization is deterministic and unantialiased: a pixel belongs to a
disk iff its center ``(col + 0.5, row + 0.5)`` lies within the radius of
the disk center ``(x * width, y * height)``; disks are drawn in ascending
track id (later wins on overlap); lines use the integer midpoint algorithm
and are drawn after all disks, overwriting them where they cross.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    Cell,
    PopulationState,
    RandomSource,
    SimulationConfig,
    TrackRecord,
    ValidationError,
    mitosis_clock_table,
)

__all__ = [
    "phase_ramp",
    "mitosis_color",
    "disk_pixel_radius",
    "render_position_map",
    "render_detection_labels",
    "bresenham_line",
    "render_movement_map",
    "transition_correspondences",
    "PairProvenance",
    "TrainingPair",
    "AnnotatedVideo",
    "build_training_pairs",
    "augment_pair",
]

INTERPHASE_COLOR = (0, 255, 0)


def phase_ramp(mitosis_clock: int | None, mitosis_cycle_length: int) -> float | None:
    """Ramp parameter u in [-1, 1] (0 = division frame), None in interphase."""
    if mitosis_clock is None:
        return None
    half = mitosis_cycle_length / 2.0
    return max(-1.0, min(1.0, mitosis_clock / half))


def mitosis_color(u: float | None) -> tuple[int, int, int]:
    """Phase color: green in interphase, blue at u = 0, linear in between.

    The blue channel is ``round(255 * (1 - |u|))`` (half rounds up) and
    green its complement, so green + blue = 255 along the whole ramp.
    """
    if u is None:
        return INTERPHASE_COLOR
    w = 1.0 - min(abs(u), 1.0)
    blue = int(math.floor(255.0 * w + 0.5))
    return (0, 255 - blue, blue)


def disk_pixel_radius(mean_area: float) -> float:
    """Fixed conditioning-disk radius in pixels: sqrt(mean_area / pi) / 4."""
    return math.sqrt(mean_area / math.pi) / 4.0


def _paint_disk(buffer: np.ndarray, cx: float, cy: float, radius: float, value) -> None:
    """Paint pixels whose centers lie within ``radius`` of (cx, cy)."""
    h, w = buffer.shape[:2]
    c_lo = max(0, int(math.floor(cx - radius - 1.0)))
    c_hi = min(w - 1, int(math.ceil(cx + radius + 1.0)))
    r_lo = max(0, int(math.floor(cy - radius - 1.0)))
    r_hi = min(h - 1, int(math.ceil(cy + radius + 1.0)))
    if c_lo > c_hi or r_lo > r_hi:
        return
    cols = np.arange(c_lo, c_hi + 1, dtype=np.float64) + 0.5 - cx
    rows = np.arange(r_lo, r_hi + 1, dtype=np.float64) + 0.5 - cy
    mask = rows[:, None] ** 2 + cols[None, :] ** 2 <= radius * radius
    buffer[r_lo : r_hi + 1, c_lo : c_hi + 1][mask] = value


def _pixel_center(position: tuple[float, float], image_size: tuple[int, int]) -> tuple[float, float]:
    h, w = image_size
    return position[0] * w, position[1] * h


def render_position_map(
    frame: PopulationState,
    image_size: tuple[int, int],
    mean_area: float,
    mitosis_cycle_length: int,
) -> np.ndarray:
    """Color-coded center-disk map of one frame, (H, W, 3) uint8."""
    h, w = image_size
    out = np.zeros((h, w, 3), dtype=np.uint8)
    radius = disk_pixel_radius(mean_area)
    for cell in sorted(frame.cells, key=lambda c: c.track_id):
        cx, cy = _pixel_center(cell.position, image_size)
        color = mitosis_color(phase_ramp(cell.mitosis_clock, mitosis_cycle_length))
        _paint_disk(out, cx, cy, radius, color)
    return out


def render_detection_labels(
    frame: PopulationState,
    image_size: tuple[int, int],
    mean_area: float,
) -> np.ndarray:
    """The same disks as the position map, as a (H, W) uint16 label image."""
    h, w = image_size
    out = np.zeros((h, w), dtype=np.uint16)
    radius = disk_pixel_radius(mean_area)
    for cell in sorted(frame.cells, key=lambda c: c.track_id):
        cx, cy = _pixel_center(cell.position, image_size)
        _paint_disk(out, cx, cy, radius, cell.track_id)
    return out


def bresenham_line(c0: int, r0: int, c1: int, r1: int) -> list[tuple[int, int]]:
    """Integer midpoint line from (r0, c0) to (r1, c1), endpoints included."""
    points = []
    dc = abs(c1 - c0)
    dr = abs(r1 - r0)
    sc = 1 if c0 < c1 else -1
    sr = 1 if r0 < r1 else -1
    err = dc - dr
    c, r = c0, r0
    while True:
        points.append((r, c))
        if c == c1 and r == r1:
            return points
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def _position_pixel(position: tuple[float, float], image_size: tuple[int, int]) -> tuple[int, int]:
    """Integer (col, row) of the pixel containing a normalized position."""
    h, w = image_size
    col = min(max(int(math.floor(position[0] * w)), 0), w - 1)
    row = min(max(int(math.floor(position[1] * h)), 0), h - 1)
    return col, row


def render_movement_map(
    raw_frame: np.ndarray,
    earlier_frame: PopulationState,
    correspondences: list[tuple[Cell, tuple[float, float]]],
    image_size: tuple[int, int],
    mean_area: float,
    mitosis_cycle_length: int,
) -> np.ndarray:
    """Movement map for the transition (earlier frame -> later frame).

    ``raw_frame`` is the later frame's 8-bit raster and fills the red
    channel.  Green/blue carry the earlier frame's position map plus, per
    correspondence ``(cell at t, position at t+1)``, a displacement line in
    the cell's phase color.  A division viewed backward contributes one
    correspondence per daughter, both ending at the parent's position.
    """
    h, w = image_size
    raw = np.asarray(raw_frame)
    if raw.shape != (h, w):
        raise ValidationError(f"raw frame shape {raw.shape} does not match image size {(h, w)}")
    if raw.dtype != np.uint8:
        raise ValidationError("raw frame must be uint8; normalize on load")

    base = render_position_map(earlier_frame, image_size, mean_area, mitosis_cycle_length)
    out = np.zeros((h, w, 3), dtype=np.uint8)
    out[:, :, 0] = raw
    out[:, :, 1] = base[:, :, 1]
    out[:, :, 2] = base[:, :, 2]

    for cell, later_position in correspondences:
        _, g, b = mitosis_color(phase_ramp(cell.mitosis_clock, mitosis_cycle_length))
        c0, r0 = _position_pixel(later_position, image_size)
        c1, r1 = _position_pixel(cell.position, image_size)
        for r, c in bresenham_line(c0, r0, c1, r1):
            out[r, c, 1] = g
            out[r, c, 2] = b
    return out


def transition_correspondences(
    state_t: PopulationState,
    state_next: PopulationState,
    lineage: list[TrackRecord] | tuple[TrackRecord, ...],
) -> list[tuple[Cell, tuple[float, float]]]:
    """Pair each cell at frame t with its position(s) at frame t+1.

    A surviving track maps to its own next position; a dividing parent maps
    to both daughter positions.  Ordered by track id (daughters by label).
    """
    next_by_id = {c.track_id: c for c in state_next.cells}
    daughters_of: dict[int, list[int]] = {}
    for rec in lineage:
        if rec.parent != 0 and rec.begin == state_next.frame_index:
            daughters_of.setdefault(rec.parent, []).append(rec.label)

    corr: list[tuple[Cell, tuple[float, float]]] = []
    for cell in sorted(state_t.cells, key=lambda c: c.track_id):
        nxt = next_by_id.get(cell.track_id)
        if nxt is not None:
            corr.append((cell, nxt.position))
            continue
        for label in sorted(daughters_of.get(cell.track_id, ())):
            daughter = next_by_id.get(label)
            if daughter is not None:
                corr.append((cell, daughter.position))
    return corr


@dataclass(frozen=True)
class PairProvenance:
    """Where a training pair came from and how it was transformed."""

    frame: int
    paired_frame: int | None = None
    crop: tuple[int, int, int, int] | None = None  # row, col, height, width
    quarter_turns: int = 0


@dataclass(frozen=True)
class TrainingPair:
    """Conditioning image plus its grayscale target, pixel-aligned."""

    conditioning: np.ndarray  # (H, W, 3) uint8
    target: np.ndarray  # (H, W) uint8
    kind: str  # "position" | "movement"
    provenance: PairProvenance

    def __post_init__(self):
        if self.conditioning.shape[:2] != self.target.shape:
            raise ValidationError(
                f"conditioning {self.conditioning.shape[:2]} and target "
                f"{self.target.shape} dimensions differ"
            )


@dataclass(frozen=True)
class AnnotatedVideo:
    """A real video with tracking annotations.

    ``frames`` are 8-bit grayscale rasters; ``centroids`` maps
    (track label, frame) to normalized cell centers.
    """

    frames: tuple[np.ndarray, ...]
    tracks: tuple[TrackRecord, ...]
    centroids: dict[tuple[int, int], tuple[float, float]]


def _population_from_annotations(
    video: AnnotatedVideo,
    frame: int,
    config: SimulationConfig,
    clock_table: dict[tuple[int, int], int],
) -> PopulationState:
    cells = []
    for rec in video.tracks:
        if not rec.begin <= frame <= rec.end:
            continue
        center = video.centroids.get((rec.label, frame))
        if center is None:
            raise ValidationError(f"no centroid for track {rec.label} at frame {frame}")
        cells.append(
            Cell(
                track_id=rec.label,
                position=center,
                radius=config.normalized_radius(config.stats.mean_area),
                area=config.stats.mean_area,
                mitosis_clock=clock_table.get((rec.label, frame)),
                parent_id=rec.parent or None,
            )
        )
    return PopulationState(frame, tuple(cells))


def build_training_pairs(video: AnnotatedVideo, config: SimulationConfig) -> list[TrainingPair]:
    """Training pairs from a real annotated video.

    Position pairs: (position map of frame t, raw frame t) for every frame.
    Movement pairs: (movement map with raw frame t+1 in red and frame t's
    positions and displacement lines in green/blue, raw frame t) for every
    consecutive pair.  Phases come from the lineage's division events.
    """
    if not video.frames:
        return []
    h, w = video.frames[0].shape
    image_size = (h, w)
    mean_area = config.stats.mean_area
    cycle = config.mitosis_cycle_length
    clock_table = mitosis_clock_table(video.tracks, cycle)

    states = [
        _population_from_annotations(video, t, config, clock_table)
        for t in range(len(video.frames))
    ]

    pairs: list[TrainingPair] = []
    for t, state in enumerate(states):
        pairs.append(
            TrainingPair(
                conditioning=render_position_map(state, image_size, mean_area, cycle),
                target=np.asarray(video.frames[t]),
                kind="position",
                provenance=PairProvenance(frame=t),
            )
        )
    for t in range(len(states) - 1):
        corr = transition_correspondences(states[t], states[t + 1], video.tracks)
        cond = render_movement_map(
            video.frames[t + 1], states[t], corr, image_size, mean_area, cycle
        )
        pairs.append(
            TrainingPair(
                conditioning=cond,
                target=np.asarray(video.frames[t]),
                kind="movement",
                provenance=PairProvenance(frame=t, paired_frame=t + 1),
            )
        )
    return pairs


def augment_pair(pair: TrainingPair, rng: RandomSource, mode: str = "patch") -> TrainingPair:
    """Randomly crop (patch mode) and rotate a training pair, keeping alignment.

    Patch mode crops an aligned random window of half the image extent from
    both images (offsets drawn row then column); both modes then apply the
    same k * 90-degree rotation, k ~ U{0..3}.
    """
    if mode not in ("patch", "full"):
        raise ValidationError(f"unknown augmentation mode {mode!r}")
    cond = pair.conditioning
    tgt = pair.target
    h, w = tgt.shape
    crop = None
    if mode == "patch":
        ch, cw = h // 2, w // 2
        if ch < 1 or cw < 1:
            raise ValidationError(f"image {h}x{w} smaller than the crop size")
        row0 = int(rng.integers(0, h - ch + 1))
        col0 = int(rng.integers(0, w - cw + 1))
        cond = cond[row0 : row0 + ch, col0 : col0 + cw]
        tgt = tgt[row0 : row0 + ch, col0 : col0 + cw]
        crop = (row0, col0, ch, cw)
    k = int(rng.integers(0, 4))
    cond = np.ascontiguousarray(np.rot90(cond, k))
    tgt = np.ascontiguousarray(np.rot90(tgt, k))
    return TrainingPair(
        conditioning=cond,
        target=tgt,
        kind=pair.kind,
        provenance=replace(pair.provenance, crop=crop, quarter_turns=k),
    )
