"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 I/O error, 3 convergence or
overcrowding failure.  Reports are flat ``key: value`` lines on stdout;
``--out`` additionally writes files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .core import ConvergenceError, RandomSource, ValidationError
from .motion import simulate
from .pipeline import (
    attach_and_correct,
    estimate_stats_from_dir,
    generate_dataset,
    load_config,
    load_trajectory,
    plan_mixing,
    plan_training,
    render_conditioning,
    save_trajectory,
    write_stats,
)
from .render import AnnotatedVideo, augment_pair, build_training_pairs
from .stats import centroids_from_labels
from .tra import AogmWeights, count_aogm
from .trackio import (
    DatasetLayout,
    frame_indices,
    parse_track_file,
    read_grayscale_frame,
    read_label_image,
    write_grayscale_image,
    write_rgb_image,
    write_track_file,
)


def _print_report(pairs) -> None:
    for key, value in pairs:
        print(f"{key}: {value}")


def _cmd_estimate_stats(args) -> None:
    stats = estimate_stats_from_dir(args.gt)
    if args.out:
        write_stats(stats, args.out)
    _print_report(asdict(stats).items())


def _cmd_simulate(args) -> None:
    config, _ = load_config(args.config, args.stats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj = simulate(config, RandomSource(config.master_seed))
    (out / "gt_tracks.txt").write_text(write_track_file(traj.lineage))
    save_trajectory(traj, config, out / "trajectory.json")
    divisions = len({r.parent for r in traj.lineage if r.parent != 0})
    _print_report(
        [
            ("seed", config.master_seed),
            ("frames", len(traj.frames)),
            ("final_cell_count", len(traj.frames[-1].cells)),
            ("division_count", divisions),
        ]
    )


def _cmd_render_conditioning(args) -> None:
    traj_path = Path(args.traj)
    if traj_path.is_dir():
        traj_path = traj_path / "trajectory.json"
    traj, config = load_trajectory(traj_path)
    manifest = render_conditioning(traj, config, args.out)
    _print_report(
        [
            ("frames", len(traj.frames)),
            ("position_maps", 1),
            ("movement_maps", len(traj.frames) - 1),
            ("steps", len(manifest["steps"])),
        ]
    )


def _load_annotated_video(video_dir: Path) -> AnnotatedVideo:
    layout = DatasetLayout(video_dir)
    records = parse_track_file(layout.tracks_path.read_text())
    raw_idx = frame_indices(layout.raw_dir)
    frames = tuple(read_grayscale_frame(layout.frame_path(layout.raw_dir, i)) for i in raw_idx)
    seg_idx = frame_indices(layout.seg_dir)
    if seg_idx != raw_idx:
        raise ValidationError(f"{video_dir}: raw/ and seg/ frame indices differ")
    masks = [read_label_image(layout.frame_path(layout.seg_dir, i)) for i in seg_idx]
    return AnnotatedVideo(frames, tuple(records), centroids_from_labels(masks))


def _cmd_build_training_pairs(args) -> None:
    config, _ = load_config(args.config, args.stats)
    video = _load_annotated_video(Path(args.video))
    pairs = build_training_pairs(video, config)
    if args.augment != "none":
        rng = RandomSource(args.augment_seed)
        pairs = [augment_pair(p, rng, args.augment) for p in pairs]
    out = Path(args.out)
    counts = {"position": 0, "movement": 0}
    for pair in pairs:
        sub = out / pair.kind
        sub.mkdir(parents=True, exist_ok=True)
        stem = f"t{pair.provenance.frame:04d}"
        write_rgb_image(pair.conditioning, sub / f"{stem}_cond.png")
        write_grayscale_image(pair.target, sub / f"{stem}_target.png")
        counts[pair.kind] += 1
    _print_report(
        [("position_pairs", counts["position"]), ("movement_pairs", counts["movement"])]
    )


def _cmd_correct_seg(args) -> None:
    report = attach_and_correct(args.video, args.seg)
    _print_report(
        [("frames", report["frames"]), ("bijection_ok", report["bijection_ok"])]
    )
    for entry in report["per_frame"]:
        if not entry["bijection_ok"]:
            print(f"frame_{entry['frame']}_bijection_ok: False")


def _parse_weights(text: str) -> AogmWeights:
    parts = text.split(",")
    if len(parts) != 6:
        raise ValidationError("--weights needs 6 comma-separated values: ns,fn,fp,ed,ea,ec")
    ns, fn, fp, ed, ea, ec = (float(p) for p in parts)
    return AogmWeights(ns=ns, fn=fn, fp=fp, ed=ed, ea=ea, ec=ec)


def _load_eval_dir(path: Path):
    layout = DatasetLayout(path)
    records = parse_track_file(layout.tracks_path.read_text())
    indices = frame_indices(layout.det_dir)
    frames = [read_label_image(layout.frame_path(layout.det_dir, i)) for i in indices]
    return records, frames


def _cmd_evaluate_tra(args) -> None:
    weights = _parse_weights(args.weights) if args.weights else AogmWeights()
    gt_records, gt_frames = _load_eval_dir(Path(args.gt))
    pred_records, pred_frames = _load_eval_dir(Path(args.pred))
    report = count_aogm(gt_records, gt_frames, pred_records, pred_frames, weights)
    _print_report(asdict(report).items())
    if args.out:
        Path(args.out).write_text(json.dumps(asdict(report), indent=2, sort_keys=True) + "\n")


def _cmd_plan_training(args) -> None:
    plan = plan_training(args.cells)
    _print_report(asdict(plan).items())


def _cmd_plan_mixing(args) -> None:
    plan = plan_mixing(args.real_frames, args.alpha, args.frames_per_video)
    _print_report(asdict(plan).items())


def _cmd_generate_dataset(args) -> None:
    config, n_videos = load_config(args.config, args.stats)
    if args.videos is not None:
        n_videos = args.videos
    summary = generate_dataset(config, n_videos, args.out)
    _print_report([("videos", len(summary["videos"]))])
    for entry in summary["videos"]:
        print(
            f"{entry['video']}: seed={entry['seed']} frames={entry['frames']} "
            f"final_cells={entry['final_cell_count']} divisions={entry['division_count']}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellforge",
        description="Synthetic cell time-lapse generation and tracking evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-stats", help="derive motion statistics from annotated data")
    p.add_argument("--gt", required=True, help="directory with gt_tracks.txt and seg/ masks")
    p.add_argument("--out", help="write statistics JSON here")
    p.set_defaults(func=_cmd_estimate_stats)

    p = sub.add_parser("simulate", help="run the motion model once")
    p.add_argument("--config", required=True)
    p.add_argument("--stats", help="statistics JSON from estimate-stats")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("render-conditioning", help="render pos/ and mov/ maps for a trajectory")
    p.add_argument("--traj", required=True, help="trajectory.json or a directory containing it")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render_conditioning)

    p = sub.add_parser("build-training-pairs", help="conditioning/target pairs from a real video")
    p.add_argument("--video", required=True, help="directory with raw/, seg/ and gt_tracks.txt")
    p.add_argument("--config", required=True)
    p.add_argument("--stats", help="statistics JSON from estimate-stats")
    p.add_argument("--out", required=True)
    p.add_argument("--augment", choices=["none", "patch", "full"], default="none")
    p.add_argument("--augment-seed", type=int, default=0)
    p.set_defaults(func=_cmd_build_training_pairs)

    p = sub.add_parser("correct-seg", help="correct external segmentation masks for a video")
    p.add_argument("--video", required=True, help="generated video directory")
    p.add_argument("--seg", required=True, help="directory of external mask PNGs")
    p.set_defaults(func=_cmd_correct_seg)

    p = sub.add_parser("evaluate-tra", help="tracking accuracy of a prediction vs ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--weights", help="ns,fn,fp,ed,ea,ec (default 5,10,1,1,1.5,1)")
    p.add_argument("--out", help="write the report JSON here")
    p.set_defaults(func=_cmd_evaluate_tra)

    p = sub.add_parser("plan-training", help="optimizer-step budgets for a population size")
    p.add_argument("--cells", type=float, required=True, help="mean cells per frame")
    p.set_defaults(func=_cmd_plan_training)

    p = sub.add_parser("plan-mixing", help="synthetic-frame budget for a target mixing ratio")
    p.add_argument("--real-frames", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--frames-per-video", type=int, default=12)
    p.set_defaults(func=_cmd_plan_mixing)

    p = sub.add_parser("generate-dataset", help="simulate and export annotated synthetic videos")
    p.add_argument("--config", required=True)
    p.add_argument("--stats", help="statistics JSON from estimate-stats")
    p.add_argument("--videos", type=int, help="override the config's n_videos")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate_dataset)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
