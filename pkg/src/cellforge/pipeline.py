"""End-to-end orchestration: configuration, dataset export, planning.

A generated video directory contains the lineage (``gt_tracks.txt``), the
full trajectory snapshot (``trajectory.json``), per-frame detection label
images (``det/``), conditioning images (``pos/``, ``mov/``) and a manifest
listing the reverse-time generation steps with placeholders for the raw
frames and segmentation masks produced later by external tools.
"""

from __future__ import annotations

import json
import math
import shutil
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import stats as statsmod
from .core import (
    Cell,
    DatasetStatistics,
    PopulationState,
    RandomSource,
    SimulationConfig,
    TimeLapseTrajectory,
    TrackRecord,
    ValidationError,
    derive_child_seed,
)
from .motion import simulate
from .pseudo_gt import correct_segmentation
from .render import render_detection_labels, render_movement_map, render_position_map, transition_correspondences
from .trackio import (
    DatasetLayout,
    frame_indices,
    parse_track_file,
    read_label_image,
    write_label_image,
    write_rgb_image,
    write_track_file,
)

__all__ = [
    "TrainingPlan",
    "MixingPlan",
    "plan_training",
    "plan_mixing",
    "read_stats",
    "write_stats",
    "load_config",
    "trajectory_to_dict",
    "trajectory_from_dict",
    "save_trajectory",
    "load_trajectory",
    "render_conditioning",
    "generate_dataset",
    "attach_and_correct",
    "estimate_stats_from_dir",
]

_STATS_KEYS = (
    "mean_area",
    "std_area",
    "gamma_shape",
    "gamma_scale",
    "split_probability",
    "initial_cell_count",
)

_CONFIG_KEYS = _STATS_KEYS + (
    "n_videos",
    "frames_per_video",
    "image_height",
    "image_width",
    "mitosis_cycle_length",
    "master_seed",
    "count_multiplier",
    "displacement_multiplier",
    "split_multiplier",
)


@dataclass(frozen=True)
class TrainingPlan:
    """Optimizer-step budgets for the two-stage conditioning-model training."""

    cn_pos_base_steps: int
    cn_mov_base_steps: int
    cn_pos_finetune_steps: int
    cn_mov_finetune_steps: int

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value <= 0:
                raise ValidationError(f"{name} must be > 0")


@dataclass(frozen=True)
class MixingPlan:
    """Synthetic/real frame mix; alpha is recomputed from the emitted counts."""

    real_frames: int
    synthetic_frames: int
    alpha: float
    videos_needed: int


def plan_training(mean_cells_per_frame: float) -> TrainingPlan:
    """Step budgets by population size: the tier boundary is 100 cells/frame."""
    if mean_cells_per_frame < 1:
        raise ValidationError("mean_cells_per_frame must be >= 1")
    if mean_cells_per_frame < 100:
        return TrainingPlan(30_000, 10_000, 3_000, 3_000)
    return TrainingPlan(60_000, 20_000, 7_000, 7_000)


def plan_mixing(real_frames: int, target_alpha: float, frames_per_video: int = 12) -> MixingPlan:
    """Synthetic-frame budget for a target synthetic fraction.

    Solves ``alpha = syn / (syn + real)`` for syn (rounded, half up), then
    rounds the result up to whole videos of ``frames_per_video`` frames.
    """
    if real_frames < 1:
        raise ValidationError("real_frames must be >= 1")
    if not 0.0 <= target_alpha < 1.0:
        raise ValidationError("target_alpha must be in [0, 1); alpha = 1 needs infinite synthetic data")
    if frames_per_video < 1:
        raise ValidationError("frames_per_video must be >= 1")
    syn = math.floor(target_alpha / (1.0 - target_alpha) * real_frames + 0.5)
    videos = math.ceil(syn / frames_per_video)
    syn_frames = videos * frames_per_video
    return MixingPlan(
        real_frames=real_frames,
        synthetic_frames=syn_frames,
        alpha=syn_frames / (syn_frames + real_frames),
        videos_needed=videos,
    )


def read_stats(path: str | Path) -> DatasetStatistics:
    """Load the six statistics fields from a flat JSON document."""
    data = json.loads(Path(path).read_text())
    missing = [k for k in _STATS_KEYS if k not in data]
    if missing:
        raise ValidationError(f"{path}: missing statistics keys {missing}")
    extra = [k for k in data if k not in _STATS_KEYS]
    if extra:
        raise ValidationError(f"{path}: unknown statistics keys {extra}")
    return DatasetStatistics(
        mean_area=float(data["mean_area"]),
        std_area=float(data["std_area"]),
        gamma_shape=float(data["gamma_shape"]),
        gamma_scale=float(data["gamma_scale"]),
        split_probability=float(data["split_probability"]),
        initial_cell_count=int(data["initial_cell_count"]),
    )


def write_stats(stats: DatasetStatistics, path: str | Path) -> None:
    Path(path).write_text(json.dumps(asdict(stats), indent=2, sort_keys=True) + "\n")


def load_config(
    path: str | Path,
    stats_path: str | Path | None = None,
) -> tuple[SimulationConfig, int]:
    """Build a SimulationConfig from a flat JSON config document.

    Statistics keys may come from a separate stats file; keys in the config
    override it.  Returns the config plus ``n_videos`` (default 1).
    """
    data = json.loads(Path(path).read_text())
    unknown = [k for k in data if k not in _CONFIG_KEYS]
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {unknown}")

    stats_fields: dict = {}
    if stats_path is not None:
        stats_fields = asdict(read_stats(stats_path))
    for key in _STATS_KEYS:
        if key in data:
            stats_fields[key] = data[key]
    missing = [k for k in _STATS_KEYS if k not in stats_fields]
    if missing:
        raise ValidationError(f"{path}: missing statistics keys {missing} (pass a stats file?)")
    stats_fields["initial_cell_count"] = int(stats_fields["initial_cell_count"])
    stats = DatasetStatistics(**stats_fields)

    config = SimulationConfig(
        stats=stats,
        frames_per_video=int(data.get("frames_per_video", 12)),
        image_size=(int(data.get("image_height", 512)), int(data.get("image_width", 512))),
        mitosis_cycle_length=int(data.get("mitosis_cycle_length", 6)),
        master_seed=int(data.get("master_seed", 0)),
        count_multiplier=float(data.get("count_multiplier", 1.0)),
        displacement_multiplier=float(data.get("displacement_multiplier", 1.0)),
        split_multiplier=float(data.get("split_multiplier", 1.0)),
    )
    return config, int(data.get("n_videos", 1))


def _config_to_dict(config: SimulationConfig) -> dict:
    return {
        "mean_area": config.stats.mean_area,
        "std_area": config.stats.std_area,
        "gamma_shape": config.stats.gamma_shape,
        "gamma_scale": config.stats.gamma_scale,
        "split_probability": config.stats.split_probability,
        "initial_cell_count": config.stats.initial_cell_count,
        "frames_per_video": config.frames_per_video,
        "image_height": config.image_size[0],
        "image_width": config.image_size[1],
        "mitosis_cycle_length": config.mitosis_cycle_length,
        "master_seed": config.master_seed,
        "count_multiplier": config.count_multiplier,
        "displacement_multiplier": config.displacement_multiplier,
        "split_multiplier": config.split_multiplier,
    }


def _config_from_dict(data: dict) -> SimulationConfig:
    stats = DatasetStatistics(
        mean_area=data["mean_area"],
        std_area=data["std_area"],
        gamma_shape=data["gamma_shape"],
        gamma_scale=data["gamma_scale"],
        split_probability=data["split_probability"],
        initial_cell_count=data["initial_cell_count"],
    )
    return SimulationConfig(
        stats=stats,
        frames_per_video=data["frames_per_video"],
        image_size=(data["image_height"], data["image_width"]),
        mitosis_cycle_length=data["mitosis_cycle_length"],
        master_seed=data["master_seed"],
        count_multiplier=data["count_multiplier"],
        displacement_multiplier=data["displacement_multiplier"],
        split_multiplier=data["split_multiplier"],
    )


def trajectory_to_dict(traj: TimeLapseTrajectory, config: SimulationConfig) -> dict:
    """JSON-ready snapshot; floats survive the round trip exactly."""
    return {
        "config": _config_to_dict(config),
        "tracks": [[r.label, r.begin, r.end, r.parent] for r in traj.lineage],
        "frames": [
            {
                "frame": st.frame_index,
                "cells": [
                    {
                        "track_id": c.track_id,
                        "x": c.position[0],
                        "y": c.position[1],
                        "radius": c.radius,
                        "area": c.area,
                        "mitosis_clock": c.mitosis_clock,
                        "parent_id": c.parent_id,
                    }
                    for c in st.cells
                ],
            }
            for st in traj.frames
        ],
    }


def trajectory_from_dict(data: dict) -> tuple[TimeLapseTrajectory, SimulationConfig]:
    config = _config_from_dict(data["config"])
    lineage = tuple(TrackRecord(*row) for row in data["tracks"])
    frames = tuple(
        PopulationState(
            entry["frame"],
            tuple(
                Cell(
                    track_id=c["track_id"],
                    position=(c["x"], c["y"]),
                    radius=c["radius"],
                    area=c["area"],
                    mitosis_clock=c["mitosis_clock"],
                    parent_id=c["parent_id"],
                )
                for c in entry["cells"]
            ),
        )
        for entry in data["frames"]
    )
    return TimeLapseTrajectory(frames, lineage), config


def save_trajectory(traj: TimeLapseTrajectory, config: SimulationConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(trajectory_to_dict(traj, config), sort_keys=True) + "\n")


def load_trajectory(path: str | Path) -> tuple[TimeLapseTrajectory, SimulationConfig]:
    return trajectory_from_dict(json.loads(Path(path).read_text()))


def render_conditioning(
    traj: TimeLapseTrajectory,
    config: SimulationConfig,
    out_dir: str | Path,
) -> dict:
    """Write pos/ and mov/ conditioning images for a trajectory.

    The position map is rendered for the final frame only (generation runs
    in reverse time and starts there); each movement map is named after the
    frame it generates, with an all-zero red channel to be filled by the
    generated later frame.  Returns the manifest step list, in the reverse
    order the generative consumer applies.
    """
    layout = DatasetLayout(Path(out_dir))
    layout.pos_dir.mkdir(parents=True, exist_ok=True)
    layout.mov_dir.mkdir(parents=True, exist_ok=True)
    mean_area = config.stats.mean_area
    cycle = config.mitosis_cycle_length
    image_size = config.image_size
    frames = traj.frames
    last = len(frames) - 1

    steps = []
    pos_map = render_position_map(frames[last], image_size, mean_area, cycle)
    pos_name = f"pos/{layout.frame_name(last)}"
    write_rgb_image(pos_map, layout.frame_path(layout.pos_dir, last))
    steps.append(
        {
            "action": "generate-final-frame",
            "frame": last,
            "conditioning": pos_name,
            "raw_placeholder": f"raw/{layout.frame_name(last)}",
        }
    )
    blank = np.zeros(image_size, dtype=np.uint8)
    for target in range(last - 1, -1, -1):
        corr = transition_correspondences(frames[target], frames[target + 1], traj.lineage)
        mov = render_movement_map(blank, frames[target], corr, image_size, mean_area, cycle)
        write_rgb_image(mov, layout.frame_path(layout.mov_dir, target))
        steps.append(
            {
                "action": "generate-previous-frame",
                "frame": target,
                "conditioning": f"mov/{layout.frame_name(target)}",
                "red_channel_from": f"raw/{layout.frame_name(target + 1)}",
                "raw_placeholder": f"raw/{layout.frame_name(target)}",
            }
        )
    return {"steps": steps}


def generate_dataset(config: SimulationConfig, n_videos: int, out_dir: str | Path) -> dict:
    """Simulate and export ``n_videos`` annotated synthetic videos.

    Each video gets an independent child seed derived from the master seed,
    so the tree is byte-reproducible.  A failed video's directory is
    removed before the error propagates.
    """
    if n_videos < 1:
        raise ValidationError("n_videos must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"videos": []}

    for v in range(n_videos):
        video_dir = out / f"video_{v:03d}"
        try:
            seed = derive_child_seed(config.master_seed, v)
            traj = simulate(config, RandomSource(seed))
            entry = _export_video(traj, config, video_dir, seed)
        except Exception:
            if video_dir.exists():
                shutil.rmtree(video_dir)
            raise
        summary["videos"].append(entry)

    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _export_video(
    traj: TimeLapseTrajectory,
    config: SimulationConfig,
    video_dir: Path,
    seed: int,
) -> dict:
    layout = DatasetLayout(video_dir)
    video_dir.mkdir(parents=True, exist_ok=True)
    layout.det_dir.mkdir(exist_ok=True)

    layout.tracks_path.write_text(write_track_file(traj.lineage))
    save_trajectory(traj, config, video_dir / "trajectory.json")
    for st in traj.frames:
        labels = render_detection_labels(st, config.image_size, config.stats.mean_area)
        write_label_image(labels, layout.frame_path(layout.det_dir, st.frame_index))

    manifest = render_conditioning(traj, config, video_dir)
    manifest["seed"] = seed
    manifest["frames"] = len(traj.frames)
    manifest["image_size"] = list(config.image_size)
    manifest["seg_placeholder"] = "seg/ (run correct-seg after external segmentation)"
    (video_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    divisions = len({r.parent for r in traj.lineage if r.parent != 0})
    return {
        "video": video_dir.name,
        "seed": seed,
        "frames": len(traj.frames),
        "final_cell_count": len(traj.frames[-1].cells),
        "division_count": divisions,
    }


def attach_and_correct(video_dir: str | Path, seg_masks_dir: str | Path) -> dict:
    """Correct external segmentation masks against a video's detections.

    Masks are read per frame from ``seg_masks_dir``, corrected, written to
    the video's ``seg/`` directory, and checked for the label/detection
    bijection, which is reported per frame.
    """
    video_dir = Path(video_dir)
    layout = DatasetLayout(video_dir)
    traj, config = load_trajectory(video_dir / "trajectory.json")
    mask_indices = frame_indices(seg_masks_dir, layout.frame_prefix)
    if len(mask_indices) != len(traj.frames):
        raise ValidationError(
            f"{seg_masks_dir}: {len(mask_indices)} mask frames for "
            f"{len(traj.frames)} video frames"
        )

    h, w = config.image_size
    layout.seg_dir.mkdir(exist_ok=True)
    report = {"frames": len(traj.frames), "bijection_ok": True, "per_frame": []}
    for st in traj.frames:
        seg = read_label_image(Path(seg_masks_dir) / layout.frame_name(st.frame_index))
        if seg.shape != (h, w):
            raise ValidationError(
                f"mask frame {st.frame_index}: shape {seg.shape} vs expected {(h, w)}"
            )
        detections = [
            (c.track_id, (c.position[0] * w, c.position[1] * h)) for c in st.cells
        ]
        corrected = correct_segmentation(seg, detections, config.stats.mean_area)
        write_label_image(corrected, layout.frame_path(layout.seg_dir, st.frame_index))
        got = {int(l) for l in np.unique(corrected) if l != 0}
        want = {c.track_id for c in st.cells}
        ok = got == want
        report["per_frame"].append({"frame": st.frame_index, "bijection_ok": ok})
        report["bijection_ok"] = report["bijection_ok"] and ok
    return report


def estimate_stats_from_dir(gt_dir: str | Path) -> DatasetStatistics:
    """Derive all motion statistics from an annotated directory.

    Expects ``gt_tracks.txt`` plus per-frame label masks under ``seg/``:
    mask pixel counts give the area statistics, mask centroids the
    displacement samples for the gamma fit, and the lineage the split
    probability and initial count.
    """
    gt = Path(gt_dir)
    layout = DatasetLayout(gt)
    records = parse_track_file(layout.tracks_path.read_text())
    indices = frame_indices(layout.seg_dir, layout.frame_prefix)
    masks = [read_label_image(layout.frame_path(layout.seg_dir, i)) for i in indices]

    mean_area, std_area = statsmod.estimate_area_stats(masks)
    centroids = statsmod.centroids_from_labels(masks)
    displacements = statsmod.compute_displacements(records, centroids)
    shape, scale = statsmod.fit_gamma([d.magnitude for d in displacements])
    return DatasetStatistics(
        mean_area=mean_area,
        std_area=std_area,
        gamma_shape=shape,
        gamma_scale=scale,
        split_probability=statsmod.estimate_split_probability(records),
        initial_cell_count=statsmod.estimate_initial_count(records, len(masks)),
    )
