"""Readers and writers for the on-disk dataset convention.

A video directory holds plain-text track files plus per-frame PNG rasters:
16-bit single-channel label images (0 = background) and 8-bit RGB
conditioning images.  Frames are named ``{prefix}{index:04d}.png`` with
indices contiguous from 0.  All I/O is bit-exact round-trip.

The track file format follows the Cell Tracking Challenge ``man_track.txt``
convention: one record per line, ``label begin end parent``, 0-based frame
indices, parent 0 meaning no parent, daughters beginning one frame after the
parent ends.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import ImageFormatError, TrackFileError, TrackRecord, ValidationError

__all__ = [
    "TrackValidationWarning",
    "parse_track_file",
    "write_track_file",
    "read_label_image",
    "write_label_image",
    "read_rgb_image",
    "write_rgb_image",
    "read_grayscale_frame",
    "write_grayscale_image",
    "DatasetLayout",
    "frame_indices",
]

_TRACK_LINE = re.compile(r"^\s*(\d+)\s+(\d+)\s+(\d+)\s+(\d+)\s*$")


class TrackValidationWarning(UserWarning):
    """Lineage oddity that does not prevent parsing (e.g. frame mismatch)."""


def parse_track_file(text: str) -> list[TrackRecord]:
    """Parse ``label begin end parent`` lines into track records.

    Raises TrackFileError (with the 1-based line number) on malformed lines,
    non-positive labels, begin > end, duplicate labels, or references to
    unknown parents.  A daughter whose begin frame is not ``parent.end + 1``
    is reported as a TrackValidationWarning, not an error.
    """
    records: list[TrackRecord] = []
    labels: set[int] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _TRACK_LINE.match(line)
        if m is None:
            raise TrackFileError(f"line {lineno}: malformed track line {line!r}")
        label, begin, end, parent = (int(g) for g in m.groups())
        try:
            rec = TrackRecord(label, begin, end, parent)
        except ValidationError as exc:
            raise TrackFileError(f"line {lineno}: {exc}") from exc
        if label in labels:
            raise TrackFileError(f"line {lineno}: duplicate track label {label}")
        labels.add(label)
        records.append(rec)

    for rec in records:
        if rec.parent == 0:
            continue
        if rec.parent not in labels:
            raise TrackFileError(
                f"track {rec.label} references unknown parent {rec.parent}"
            )
        parent = next(r for r in records if r.label == rec.parent)
        if rec.begin != parent.end + 1:
            warnings.warn(
                f"track {rec.label} begins at {rec.begin}, parent {rec.parent} "
                f"ends at {parent.end}",
                TrackValidationWarning,
                stacklevel=2,
            )
    return records


def write_track_file(records: list[TrackRecord] | tuple[TrackRecord, ...]) -> str:
    """Serialize records as LF-terminated ``label begin end parent`` lines."""
    return "".join(f"{r.label} {r.begin} {r.end} {r.parent}\n" for r in records)


def read_label_image(path: str | Path) -> np.ndarray:
    """Load a 16-bit single-channel PNG as a (H, W) uint16 label array."""
    img = Image.open(path)
    if img.mode in ("I;16", "I;16B", "I;16L", "I;16N"):
        return np.asarray(img, dtype=np.uint16)
    if img.mode == "I":
        arr = np.asarray(img)
        if arr.min() < 0 or arr.max() > 0xFFFF:
            raise ImageFormatError(f"{path}: values outside 16-bit label range")
        return arr.astype(np.uint16)
    raise ImageFormatError(
        f"{path}: expected 16-bit single-channel raster, got mode {img.mode!r}"
    )


def write_label_image(image: np.ndarray, path: str | Path) -> None:
    """Write a (H, W) integer array of labels <= 65535 as 16-bit PNG."""
    arr = np.asarray(image)
    if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
        raise ImageFormatError("label image must be a 2D integer array")
    if arr.size and (arr.min() < 0 or arr.max() > 0xFFFF):
        raise ImageFormatError("label values outside the 16-bit range")
    Image.fromarray(arr.astype(np.uint16)).save(path, format="PNG")


def read_rgb_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit 3-channel PNG as a (H, W, 3) uint8 array."""
    img = Image.open(path)
    if img.mode != "RGB":
        raise ImageFormatError(
            f"{path}: expected 8-bit RGB raster, got mode {img.mode!r}"
        )
    return np.asarray(img, dtype=np.uint8)


def write_rgb_image(image: np.ndarray, path: str | Path) -> None:
    """Write a (H, W, 3) uint8 array as an RGB PNG."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ImageFormatError("rgb image must be a (H, W, 3) uint8 array")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def read_grayscale_frame(path: str | Path) -> np.ndarray:
    """Load a raw frame as (H, W) uint8.

    8-bit grayscale passes through unchanged; 16-bit sources are min-max
    normalized per frame (a constant frame maps to zeros).
    """
    img = Image.open(path)
    if img.mode == "L":
        return np.asarray(img, dtype=np.uint8)
    if img.mode in ("I;16", "I;16B", "I;16L", "I;16N", "I"):
        arr = np.asarray(img, dtype=np.float64)
        lo, hi = arr.min(), arr.max()
        if hi == lo:
            return np.zeros(arr.shape, dtype=np.uint8)
        return np.round((arr - lo) / (hi - lo) * 255.0).astype(np.uint8)
    raise ImageFormatError(
        f"{path}: expected a single-channel raster, got mode {img.mode!r}"
    )


def write_grayscale_image(image: np.ndarray, path: str | Path) -> None:
    """Write a (H, W) uint8 array as an 8-bit grayscale PNG."""
    arr = np.asarray(image)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ImageFormatError("grayscale image must be a (H, W) uint8 array")
    Image.fromarray(arr, mode="L").save(path, format="PNG")


@dataclass(frozen=True)
class DatasetLayout:
    """Path helper for a video directory.

    Subdirectories: ``raw/`` frames, ``pos/`` and ``mov/`` conditioning
    images, ``det/`` detection label images, ``seg/`` corrected segmentation;
    the lineage lives in ``gt_tracks.txt`` at the root.
    """

    root: Path
    frame_prefix: str = "t"

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    @property
    def tracks_path(self) -> Path:
        return self.root / "gt_tracks.txt"

    @property
    def raw_dir(self) -> Path:
        return self.root / "raw"

    @property
    def pos_dir(self) -> Path:
        return self.root / "pos"

    @property
    def mov_dir(self) -> Path:
        return self.root / "mov"

    @property
    def det_dir(self) -> Path:
        return self.root / "det"

    @property
    def seg_dir(self) -> Path:
        return self.root / "seg"

    def frame_name(self, index: int) -> str:
        return f"{self.frame_prefix}{index:04d}.png"

    def frame_path(self, subdir: Path, index: int) -> Path:
        return subdir / self.frame_name(index)


def frame_indices(directory: str | Path, prefix: str = "t") -> list[int]:
    """Indices of ``{prefix}{index:04d}.png`` files, checked contiguous from 0."""
    pattern = re.compile(rf"^{re.escape(prefix)}(\d{{4}})\.png$")
    indices = sorted(
        int(m.group(1))
        for p in Path(directory).iterdir()
        if (m := pattern.match(p.name))
    )
    if indices != list(range(len(indices))):
        raise ValidationError(
            f"{directory}: frame indices not contiguous from 0: {indices}"
        )
    return indices
