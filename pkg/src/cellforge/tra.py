"""Graph-based tracking evaluation.

Ground truth and prediction are compared as acyclic oriented graphs whose
nodes are per-frame markers and whose edges are track links (same track,
consecutive frames) or parent links (division).  The score counts the
weighted graph operations needed to turn the prediction into the ground
truth: vertex splits (NS), missing vertices (FN), spurious vertices (FP),
spurious edges (ED), missing edges (EA), and edge-kind changes (EC),
normalized against the cost of building the ground truth from scratch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import TrackRecord, ValidationError

__all__ = [
    "TRACK_LINK",
    "PARENT_LINK",
    "AogmWeights",
    "AogmReport",
    "ErrorDeltas",
    "TrackingGraph",
    "build_tracking_graph",
    "match_markers",
    "count_aogm",
    "aogm_empty",
    "tra_score",
    "error_breakdown",
]

TRACK_LINK = "track"
PARENT_LINK = "parent"

Node = tuple[int, int]  # (frame, marker label)
Edge = tuple[Node, Node]


@dataclass(frozen=True)
class AogmWeights:
    """Operation weights; the defaults are the standard published values."""

    ns: float = 5.0
    fn: float = 10.0
    fp: float = 1.0
    ed: float = 1.0
    ea: float = 1.5
    ec: float = 1.0

    def __post_init__(self):
        for name in ("ns", "fn", "fp", "ed", "ea", "ec"):
            if getattr(self, name) < 0:
                raise ValidationError(f"weight {name} must be >= 0")


@dataclass(frozen=True)
class AogmReport:
    """Operation counts plus the aggregate scores."""

    ns: int
    fn: int
    fp: int
    ed: int
    ea: int
    ec: int
    aogm: float
    aogm_0: float
    tra: float

    @property
    def splits(self) -> int:
        """Division-detection errors (vertex-split operations)."""
        return self.ns

    @property
    def fp_edges(self) -> int:
        return self.ed

    @property
    def fn_edges(self) -> int:
        return self.ea


@dataclass(frozen=True)
class ErrorDeltas:
    """Category-wise error differences between two runs (b - a)."""

    splits: int
    fp_edges: int
    fn_edges: int


@dataclass
class TrackingGraph:
    """Marker nodes and typed links, as observed in the label images."""

    nodes: set[Node] = field(default_factory=set)
    edges: dict[Edge, str] = field(default_factory=dict)


def build_tracking_graph(
    records: list[TrackRecord] | tuple[TrackRecord, ...],
    label_frames: list[np.ndarray],
) -> TrackingGraph:
    """Assemble the graph from a track file plus per-frame label images.

    Nodes are the nonzero markers present in the images.  A track link
    joins a track's markers in consecutive frames; a parent link joins a
    parent's last marker to a daughter's first.  Edges require both
    endpoint markers to be present.  Markers with labels absent from the
    track records, or outside their track's frame span, are rejected.
    """
    by_label = {rec.label: rec for rec in records}
    graph = TrackingGraph()
    for frame, img in enumerate(label_frames):
        for label in np.unique(np.asarray(img)):
            if label == 0:
                continue
            rec = by_label.get(int(label))
            if rec is None:
                raise ValidationError(f"frame {frame}: marker {label} not in track file")
            if not rec.begin <= frame <= rec.end:
                raise ValidationError(
                    f"frame {frame}: marker {label} outside track span "
                    f"[{rec.begin}, {rec.end}]"
                )
            graph.nodes.add((frame, int(label)))

    for rec in records:
        for t in range(rec.begin, rec.end):
            a, b = (t, rec.label), (t + 1, rec.label)
            if a in graph.nodes and b in graph.nodes:
                graph.edges[(a, b)] = TRACK_LINK
        if rec.parent != 0:
            parent = by_label.get(rec.parent)
            if parent is not None:
                a, b = (parent.end, rec.parent), (rec.begin, rec.label)
                if a in graph.nodes and b in graph.nodes:
                    graph.edges[(a, b)] = PARENT_LINK
    return graph


def match_markers(gt_frame: np.ndarray, pred_frame: np.ndarray) -> dict[int, int]:
    """Map each GT marker to the prediction marker covering > half of it.

    Majority coverage makes the match unique per GT marker; ties at exactly
    half leave the marker unmatched.  One prediction marker may match
    several GT markers.
    """
    gt = np.asarray(gt_frame)
    pred = np.asarray(pred_frame)
    if gt.shape != pred.shape:
        raise ValidationError(f"frame shapes differ: {gt.shape} vs {pred.shape}")

    matches: dict[int, int] = {}
    gt_labels, gt_sizes = np.unique(gt, return_counts=True)
    size_of = {int(l): int(s) for l, s in zip(gt_labels, gt_sizes) if l != 0}
    if not size_of:
        return matches

    pair = gt.astype(np.int64) << 32 | pred.astype(np.int64)
    combos, counts = np.unique(pair, return_counts=True)
    for combo, count in zip(combos, counts):
        g = int(combo >> 32)
        p = int(combo & 0xFFFFFFFF)
        if g == 0 or p == 0:
            continue
        if 2 * int(count) > size_of[g]:
            matches[g] = p
    return matches


def count_aogm(
    gt_records,
    gt_frames: list[np.ndarray],
    pred_records,
    pred_frames: list[np.ndarray],
    weights: AogmWeights = AogmWeights(),
) -> AogmReport:
    """Count the operations turning the prediction graph into the GT graph.

    Node stage (per frame, majority matching): NS counts one split per
    extra GT marker sharing a prediction marker, FN the unmatched GT
    markers, FP the unmatched prediction markers.  Edge stage: a GT edge is
    realized iff both endpoints are matched and the induced prediction edge
    exists; unrealized GT edges count as EA, prediction edges induced by no
    GT edge as ED, and edges present on both sides with different kinds as
    EC (not EA + ED).
    """
    if len(gt_frames) != len(pred_frames):
        raise ValidationError(
            f"frame counts differ: {len(gt_frames)} GT vs {len(pred_frames)} predicted"
        )
    gt_graph = build_tracking_graph(gt_records, gt_frames)
    pred_graph = build_tracking_graph(pred_records, pred_frames)

    node_match: dict[Node, Node] = {}
    pred_hits: dict[Node, int] = {}
    for frame, (gt_img, pred_img) in enumerate(zip(gt_frames, pred_frames)):
        for g_label, p_label in match_markers(gt_img, pred_img).items():
            g_node, p_node = (frame, g_label), (frame, p_label)
            node_match[g_node] = p_node
            pred_hits[p_node] = pred_hits.get(p_node, 0) + 1

    ns = sum(hits - 1 for hits in pred_hits.values() if hits >= 2)
    fn = len(gt_graph.nodes) - len(node_match)
    fp = len(pred_graph.nodes) - len(pred_hits)

    ea = 0
    ec = 0
    explained: set[Edge] = set()
    for (a, b), kind in gt_graph.edges.items():
        pa, pb = node_match.get(a), node_match.get(b)
        if pa is None or pb is None:
            ea += 1
            continue
        pred_kind = pred_graph.edges.get((pa, pb))
        if pred_kind is None:
            ea += 1
            continue
        explained.add((pa, pb))
        if pred_kind != kind:
            ec += 1
    ed = len(pred_graph.edges) - len(explained)

    aogm = (
        weights.ns * ns
        + weights.fn * fn
        + weights.fp * fp
        + weights.ed * ed
        + weights.ea * ea
        + weights.ec * ec
    )
    aogm_0 = aogm_empty(gt_graph, weights)
    return AogmReport(
        ns=ns, fn=fn, fp=fp, ed=ed, ea=ea, ec=ec,
        aogm=aogm, aogm_0=aogm_0, tra=tra_score(aogm, aogm_0),
    )


def aogm_empty(gt_graph: TrackingGraph, weights: AogmWeights = AogmWeights()) -> float:
    """Cost of building the ground-truth graph from an empty prediction."""
    return weights.fn * len(gt_graph.nodes) + weights.ea * len(gt_graph.edges)


def tra_score(aogm: float, aogm_0: float) -> float:
    """Normalized tracking accuracy: 1 - min(AOGM, AOGM_0) / AOGM_0."""
    if aogm_0 <= 0:
        raise ValidationError("AOGM_0 must be positive (empty ground truth?)")
    return 1.0 - min(aogm, aogm_0) / aogm_0


def error_breakdown(report_a: AogmReport, report_b: AogmReport) -> ErrorDeltas:
    """Error-count differences (b - a); negative means b improved."""
    return ErrorDeltas(
        splits=report_b.splits - report_a.splits,
        fp_edges=report_b.fp_edges - report_a.fp_edges,
        fn_edges=report_b.fn_edges - report_a.fn_edges,
    )
