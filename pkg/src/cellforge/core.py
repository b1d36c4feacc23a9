"""Domain types and the deterministic-randomness contract shared by all modules.

Conventions used throughout the package:

* Cell motion lives in the unit square: positions are ``(x, y) in [0, 1]^2``.
  Conversion to pixels happens only at render time, via the configured image
  size (``x`` maps to columns, ``y`` to rows).
* Areas are carried in pixels^2; a cell's normalized radius is
  ``sqrt(area / (h * w) / pi)``, i.e. lengths are normalized by the geometric
  mean of the image extents.
* Every stochastic operation takes an explicit :class:`RandomSource`; there is
  no global generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ValidationError",
    "ConvergenceError",
    "TrackFileError",
    "ImageFormatError",
    "DatasetStatistics",
    "Cell",
    "PopulationState",
    "TrackRecord",
    "TimeLapseTrajectory",
    "SimulationConfig",
    "RandomSource",
    "derive_child_seed",
    "validate_lineage",
    "mitosis_clock_table",
]


class ValidationError(ValueError):
    """Input violates a documented invariant (bad config, lineage, format)."""


class ConvergenceError(RuntimeError):
    """An iterative procedure failed to converge (overcrowding, fitting)."""


class TrackFileError(ValidationError):
    """A track file could not be parsed."""


class ImageFormatError(ValidationError):
    """An image file has the wrong bit depth or channel layout."""


_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def derive_child_seed(master_seed: int, video_index: int) -> int:
    """Derive a per-video seed from a master seed.

    Returns element ``video_index + 1`` of the SplitMix64 output stream
    seeded at ``master_seed``.  The finalizer is a bijection on 64-bit
    integers and the stream increment is odd, so for a fixed master seed
    all 2^64 indices map to distinct seeds.
    """
    if video_index < 0:
        raise ValidationError(f"video_index must be >= 0, got {video_index}")
    z = (master_seed + (video_index + 1) * _SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RandomSource:
    """Seeded, splittable deterministic generator.

    Thin wrapper around ``numpy.random.Generator`` (PCG64) so that every
    stochastic operation receives its randomness explicitly.  Identical
    seeds yield identical draw sequences across platforms.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low: float, high: float, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, mean: float, std: float, size=None):
        return self._gen.normal(mean, std, size)

    def gamma(self, shape: float, scale: float, size=None):
        return self._gen.gamma(shape, scale, size)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in ``[low, high)``."""
        return self._gen.integers(low, high, size=size)

    def spawn(self, index: int) -> "RandomSource":
        """Independent child source; deterministic in (seed, index)."""
        return RandomSource(derive_child_seed(self.seed, index))

    def __repr__(self) -> str:  # pragma: no cover
        return f"RandomSource(seed={self.seed})"


@dataclass(frozen=True)
class DatasetStatistics:
    """Everything the motion model samples from.

    mean_area / std_area are in pixels^2; gamma shape is dimensionless and
    gamma scale is in normalized-length units; split_probability is per cell
    per frame.
    """

    mean_area: float
    std_area: float
    gamma_shape: float
    gamma_scale: float
    split_probability: float
    initial_cell_count: int

    def __post_init__(self):
        if not self.mean_area > 0:
            raise ValidationError(f"mean_area must be > 0, got {self.mean_area}")
        if self.std_area < 0:
            raise ValidationError(f"std_area must be >= 0, got {self.std_area}")
        if not self.gamma_shape > 0:
            raise ValidationError(f"gamma_shape must be > 0, got {self.gamma_shape}")
        if not self.gamma_scale > 0:
            raise ValidationError(f"gamma_scale must be > 0, got {self.gamma_scale}")
        if not 0.0 <= self.split_probability <= 1.0:
            raise ValidationError(
                f"split_probability must be in [0, 1], got {self.split_probability}"
            )
        if self.initial_cell_count < 1:
            raise ValidationError(
                f"initial_cell_count must be >= 1, got {self.initial_cell_count}"
            )


@dataclass(frozen=True)
class Cell:
    """A 2D disk with position, radius, division clock and track identity.

    ``position`` is in normalized coordinates, ``area`` in pixels^2 and
    ``radius`` in normalized length units.  ``mitosis_clock`` counts frames
    relative to the nearest division of this track (0 = division frame,
    negative before, positive after) and is None during interphase.
    """

    track_id: int
    position: tuple[float, float]
    radius: float
    area: float
    mitosis_clock: int | None = None
    parent_id: int | None = None


@dataclass(frozen=True)
class PopulationState:
    """All cells present in one frame."""

    frame_index: int
    cells: tuple[Cell, ...]

    def __post_init__(self):
        ids = [c.track_id for c in self.cells]
        if len(ids) != len(set(ids)):
            raise ValidationError(f"duplicate track_ids in frame {self.frame_index}")


@dataclass(frozen=True)
class TrackRecord:
    """One lineage entry: label, first/last frame, parent label (0 = none)."""

    label: int
    begin: int
    end: int
    parent: int = 0

    def __post_init__(self):
        if self.label < 1:
            raise ValidationError(f"track label must be positive, got {self.label}")
        if self.begin > self.end:
            raise ValidationError(
                f"track {self.label}: begin {self.begin} > end {self.end}"
            )
        if self.begin < 0:
            raise ValidationError(f"track {self.label}: begin must be >= 0")


@dataclass(frozen=True)
class TimeLapseTrajectory:
    """Per-frame population states plus the lineage forest."""

    frames: tuple[PopulationState, ...]
    lineage: tuple[TrackRecord, ...]


@dataclass(frozen=True)
class SimulationConfig:
    """Simulation parameters; difficulty multipliers rescale the base stats."""

    stats: DatasetStatistics
    frames_per_video: int = 12
    image_size: tuple[int, int] = (512, 512)  # (height, width) in pixels
    mitosis_cycle_length: int = 6
    master_seed: int = 0
    count_multiplier: float = 1.0
    displacement_multiplier: float = 1.0
    split_multiplier: float = 1.0

    def __post_init__(self):
        if self.frames_per_video < 1:
            raise ValidationError("frames_per_video must be >= 1")
        if self.mitosis_cycle_length < 2:
            raise ValidationError("mitosis_cycle_length must be >= 2")
        h, w = self.image_size
        if h < 64 or w < 64:
            raise ValidationError(f"image_size must be >= 64x64, got {h}x{w}")
        if self.master_seed < 0:
            raise ValidationError("master_seed must be a non-negative 64-bit integer")
        for name in ("count_multiplier", "displacement_multiplier", "split_multiplier"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")

    @property
    def effective_stats(self) -> DatasetStatistics:
        """Base statistics with the difficulty multipliers applied."""
        s = self.stats
        return replace(
            s,
            gamma_scale=s.gamma_scale * self.displacement_multiplier,
            split_probability=min(1.0, s.split_probability * self.split_multiplier),
            initial_cell_count=max(1, round(s.initial_cell_count * self.count_multiplier)),
        )

    def normalized_radius(self, area_px: float) -> float:
        """Disk radius in normalized units for an area in pixels^2."""
        h, w = self.image_size
        return math.sqrt(area_px / (h * w) / math.pi)


def validate_lineage(records: list[TrackRecord] | tuple[TrackRecord, ...]) -> None:
    """Check the full lineage-forest invariants, raising ValidationError.

    Beyond per-record validity this enforces: distinct labels, parents exist,
    a daughter begins exactly one frame after its parent ends, every dividing
    parent has exactly two daughters, and the parent relation is acyclic.
    """
    by_label = {}
    for rec in records:
        if rec.label in by_label:
            raise ValidationError(f"duplicate track label {rec.label}")
        by_label[rec.label] = rec

    daughters: dict[int, list[int]] = {}
    for rec in records:
        if rec.parent == 0:
            continue
        if rec.parent == rec.label:
            raise ValidationError(f"track {rec.label} is its own parent")
        parent = by_label.get(rec.parent)
        if parent is None:
            raise ValidationError(
                f"track {rec.label} references unknown parent {rec.parent}"
            )
        if rec.begin != parent.end + 1:
            raise ValidationError(
                f"track {rec.label} begins at {rec.begin} but parent "
                f"{rec.parent} ends at {parent.end}"
            )
        daughters.setdefault(rec.parent, []).append(rec.label)

    for parent_label, kids in daughters.items():
        if len(kids) != 2:
            raise ValidationError(
                f"track {parent_label} divides into {len(kids)} daughters, expected 2"
            )

    # Daughters strictly succeed their parents in time, so any parent chain
    # strictly increases begin frames; a cycle would need a non-increasing step.
    for rec in records:
        seen = {rec.label}
        cur = rec
        while cur.parent != 0:
            cur = by_label[cur.parent]
            if cur.label in seen:
                raise ValidationError(f"lineage cycle through track {cur.label}")
            seen.add(cur.label)


def mitosis_clock_table(
    records: list[TrackRecord] | tuple[TrackRecord, ...],
    mitosis_cycle_length: int,
) -> dict[tuple[int, int], int]:
    """Per (label, frame) division clock derived from the lineage.

    A division event sits at the parent's last frame.  The parent carries the
    onset side of the ramp (clocks ``-half+1 .. 0``) and each daughter the
    reversion side (``+1 .. +half-1``), where ``half = cycle_length / 2``.
    Frames with ``|clock| >= half`` are interphase and absent from the table.
    When a track's birth ramp and its own upcoming division ramp would
    overlap, the birth ramp keeps its frames and the onset ramp stops early.
    """
    half = mitosis_cycle_length / 2
    by_label = {rec.label: rec for rec in records}
    has_daughters = {rec.parent for rec in records if rec.parent != 0}
    table: dict[tuple[int, int], int] = {}

    for rec in records:
        if rec.parent != 0:
            division = rec.begin - 1
            for f in range(rec.begin, rec.end + 1):
                clock = f - division
                if clock >= half:
                    break
                table[(rec.label, f)] = clock

    for rec in records:
        if rec.label not in has_daughters:
            continue
        division = rec.end
        for f in range(rec.end, rec.begin - 1, -1):
            clock = f - division
            if -clock >= half or (rec.label, f) in table:
                break
            table[(rec.label, f)] = clock

    return table
