import numpy as np
import pytest

from cellforge.core import RandomSource, TrackRecord, ValidationError
from cellforge.tra import (
    PARENT_LINK,
    TRACK_LINK,
    AogmReport,
    AogmWeights,
    aogm_empty,
    build_tracking_graph,
    count_aogm,
    error_breakdown,
    match_markers,
    tra_score,
)


def square_marker(img, r0, c0, size, label):
    img[r0 : r0 + size, c0 : c0 + size] = label
    return img


def two_track_frames(labels=(1, 2)):
    """Two tracks alive in frames 0 and 1, markers far apart."""
    frames = []
    for _ in range(2):
        img = np.zeros((32, 32), dtype=np.uint16)
        square_marker(img, 4, 4, 5, labels[0])
        square_marker(img, 20, 20, 5, labels[1])
        frames.append(img)
    return frames


class TestMatchMarkers:
    def test_identical_images_match_one_to_one(self):
        gt = two_track_frames()[0]
        assert match_markers(gt, gt) == {1: 1, 2: 2}

    def test_minority_coverage_unmatched(self):
        gt = np.zeros((10, 10), dtype=np.uint16)
        gt[0:1, 0:10] = 1  # 10 pixels
        pred = np.zeros((10, 10), dtype=np.uint16)
        pred[0:1, 0:4] = 7  # covers 40%
        assert match_markers(gt, pred) == {}

    def test_exact_half_is_unmatched(self):
        gt = np.zeros((10, 10), dtype=np.uint16)
        gt[0, 0:10] = 1
        pred = np.zeros((10, 10), dtype=np.uint16)
        pred[0, 0:5] = 7  # exactly half
        assert match_markers(gt, pred) == {}

    def test_one_prediction_may_match_many_gt(self):
        gt = np.zeros((10, 10), dtype=np.uint16)
        gt[0:2, 0:4] = 1
        gt[5:7, 0:4] = 2
        pred = np.ones((10, 10), dtype=np.uint16) * 9
        assert match_markers(gt, pred) == {1: 9, 2: 9}

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            match_markers(np.zeros((4, 4), np.uint16), np.zeros((5, 5), np.uint16))

    def test_matches_brute_force_tabulation(self):
        rng = RandomSource(51)
        for _ in range(25):
            gt = rng.integers(0, 4, (12, 12)).astype(np.uint16)
            pred = rng.integers(0, 4, (12, 12)).astype(np.uint16)
            # brute force: count overlaps per (g, p) with explicit loops
            overlap: dict = {}
            sizes: dict = {}
            for r in range(12):
                for c in range(12):
                    g, p = int(gt[r, c]), int(pred[r, c])
                    if g:
                        sizes[g] = sizes.get(g, 0) + 1
                        if p:
                            overlap[(g, p)] = overlap.get((g, p), 0) + 1
            expected = {}
            for (g, p), n in overlap.items():
                if 2 * n > sizes[g]:
                    expected[g] = p
            assert match_markers(gt, pred) == expected


class TestGraphBuilding:
    def test_nodes_and_edges(self):
        records = [TrackRecord(1, 0, 1, 0), TrackRecord(2, 0, 1, 0)]
        graph = build_tracking_graph(records, two_track_frames())
        assert graph.nodes == {(0, 1), (0, 2), (1, 1), (1, 2)}
        assert graph.edges == {
            ((0, 1), (1, 1)): TRACK_LINK,
            ((0, 2), (1, 2)): TRACK_LINK,
        }

    def test_parent_link(self):
        records = [
            TrackRecord(1, 0, 0, 0),
            TrackRecord(2, 1, 1, 1),
            TrackRecord(3, 1, 1, 1),
        ]
        f0 = np.zeros((32, 32), dtype=np.uint16)
        square_marker(f0, 12, 12, 6, 1)
        f1 = np.zeros((32, 32), dtype=np.uint16)
        square_marker(f1, 4, 4, 5, 2)
        square_marker(f1, 20, 20, 5, 3)
        graph = build_tracking_graph(records, [f0, f1])
        assert graph.edges[((0, 1), (1, 2))] == PARENT_LINK
        assert graph.edges[((0, 1), (1, 3))] == PARENT_LINK

    def test_every_node_has_at_most_one_incoming_edge(self):
        records = [
            TrackRecord(1, 0, 1, 0),
            TrackRecord(2, 2, 3, 1),
            TrackRecord(3, 2, 3, 1),
        ]
        frames = []
        for t in range(4):
            img = np.zeros((32, 32), dtype=np.uint16)
            if t < 2:
                square_marker(img, 12, 12, 6, 1)
            else:
                square_marker(img, 4, 4, 5, 2)
                square_marker(img, 20, 20, 5, 3)
            frames.append(img)
        graph = build_tracking_graph(records, frames)
        incoming: dict = {}
        for (_, b) in graph.edges:
            incoming[b] = incoming.get(b, 0) + 1
        assert all(v == 1 for v in incoming.values())

    def test_unknown_marker_rejected(self):
        img = np.zeros((16, 16), dtype=np.uint16)
        img[2, 2] = 9
        with pytest.raises(ValidationError, match="not in track file"):
            build_tracking_graph([TrackRecord(1, 0, 0, 0)], [img])

    def test_marker_outside_span_rejected(self):
        img = np.zeros((16, 16), dtype=np.uint16)
        img[2, 2] = 1
        with pytest.raises(ValidationError, match="outside"):
            build_tracking_graph([TrackRecord(1, 1, 2, 0)], [img, img, img])

    def test_gap_frames_produce_no_edge(self):
        records = [TrackRecord(1, 0, 2, 0)]
        present = np.zeros((16, 16), dtype=np.uint16)
        square_marker(present, 4, 4, 4, 1)
        absent = np.zeros((16, 16), dtype=np.uint16)
        graph = build_tracking_graph(records, [present, absent, present])
        assert graph.nodes == {(0, 1), (2, 1)}
        assert graph.edges == {}


class TestCountAogm:
    def _gt(self):
        return [TrackRecord(1, 0, 1, 0), TrackRecord(2, 0, 1, 0)], two_track_frames()

    def test_perfect_prediction(self):
        records, frames = self._gt()
        report = count_aogm(records, frames, records, frames)
        assert (report.ns, report.fn, report.fp, report.ed, report.ea, report.ec) == (0,) * 6
        assert report.aogm == 0.0
        assert report.tra == 1.0

    def test_empty_prediction_costs_aogm0(self):
        records, frames = self._gt()
        empty_frames = [np.zeros_like(f) for f in frames]
        report = count_aogm(records, frames, [], empty_frames)
        assert report.fn == 4
        assert report.ea == 2
        assert (report.ns, report.fp, report.ed, report.ec) == (0, 0, 0, 0)
        assert report.aogm == report.aogm_0
        assert report.tra == 0.0

    def test_hand_counted_missing_link(self):
        # 4 nodes, 2 edges; prediction breaks one track into two labels
        records, frames = self._gt()
        pred_records = [
            TrackRecord(1, 0, 1, 0),
            TrackRecord(2, 0, 0, 0),
            TrackRecord(3, 1, 1, 0),
        ]
        pred_frames = [two_track_frames(labels=(1, 2))[0], two_track_frames(labels=(1, 3))[1]]
        report = count_aogm(records, frames, pred_records, pred_frames)
        assert report.aogm_0 == 43.0  # 4 * 10 + 2 * 1.5
        assert report.ea == 1
        assert (report.ns, report.fn, report.fp, report.ed, report.ec) == (0, 0, 0, 0, 0)
        assert report.aogm == 1.5
        assert abs(report.tra - (1.0 - 1.5 / 43.0)) < 1e-12

    def test_track_link_instead_of_parent_link_counts_ec(self):
        gt_records = [
            TrackRecord(1, 0, 0, 0),
            TrackRecord(2, 1, 1, 1),
            TrackRecord(3, 1, 1, 1),
        ]
        f0 = np.zeros((32, 32), dtype=np.uint16)
        square_marker(f0, 4, 4, 5, 1)
        f1 = np.zeros((32, 32), dtype=np.uint16)
        square_marker(f1, 4, 4, 5, 2)
        square_marker(f1, 20, 20, 5, 3)
        # prediction continues label 1 through the division and adds label 4
        pred_records = [TrackRecord(1, 0, 1, 0), TrackRecord(4, 1, 1, 0)]
        p1 = np.zeros((32, 32), dtype=np.uint16)
        square_marker(p1, 4, 4, 5, 1)
        square_marker(p1, 20, 20, 5, 4)
        report = count_aogm(gt_records, [f0, f1], pred_records, [f0, p1])
        assert report.ec == 1  # parent link present as a track link
        assert report.ea == 1  # second daughter's link missing entirely
        assert report.ed == 0  # the mis-typed edge is changed, not deleted
        assert report.aogm == AogmWeights().ec + AogmWeights().ea

    def test_spurious_marker_and_edge(self):
        records, frames = self._gt()
        pred_records = [
            TrackRecord(1, 0, 1, 0),
            TrackRecord(2, 0, 1, 0),
            TrackRecord(9, 0, 1, 0),
        ]
        pred_frames = [f.copy() for f in frames]
        for f in pred_frames:
            square_marker(f, 27, 4, 4, 9)
        report = count_aogm(records, frames, pred_records, pred_frames)
        assert report.fp == 2  # spurious marker in both frames
        assert report.ed == 1  # its connecting edge
        assert report.tra == 1.0 - (2 * 1.0 + 1 * 1.0) / 43.0

    def test_node_split_counted(self):
        records, frames = self._gt()
        # prediction merges both GT markers into one giant marker per frame
        pred_records = [TrackRecord(5, 0, 1, 0)]
        pred_frames = []
        for _ in range(2):
            img = np.zeros((32, 32), dtype=np.uint16)
            img[:, :] = 5
            pred_frames.append(img)
        report = count_aogm(records, frames, pred_records, pred_frames)
        assert report.ns == 2  # one split per frame
        assert report.fn == 0 and report.fp == 0

    def test_frame_count_mismatch(self):
        records, frames = self._gt()
        with pytest.raises(ValidationError, match="frame counts"):
            count_aogm(records, frames, records, frames[:1])


class TestScores:
    def test_aogm_empty_formula(self):
        records = [TrackRecord(1, 0, 1, 0), TrackRecord(2, 0, 1, 0)]
        graph = build_tracking_graph(records, two_track_frames())
        assert aogm_empty(graph) == 43.0
        assert aogm_empty(graph, AogmWeights(fn=1, ea=1)) == 6.0

    def test_aogm_empty_of_empty_graph(self):
        graph = build_tracking_graph([], [np.zeros((8, 8), np.uint16)])
        assert aogm_empty(graph) == 0.0

    def test_empty_prediction_consistency_on_random_graphs(self):
        rng = RandomSource(52)
        for trial in range(10):
            n_tracks = int(rng.integers(1, 5))
            records = [TrackRecord(k + 1, 0, 3, 0) for k in range(n_tracks)]
            frames = []
            for t in range(4):
                img = np.zeros((40, 40), dtype=np.uint16)
                for k in range(n_tracks):
                    if rng.uniform(0, 1) < 0.85:  # occasional gaps
                        square_marker(img, 2 + 9 * k, 2 + 9 * t, 4, k + 1)
                frames.append(img)
            graph = build_tracking_graph(records, frames)
            report = count_aogm(records, frames, [], [np.zeros_like(f) for f in frames])
            assert report.aogm == aogm_empty(graph)

    def test_tra_score_values(self):
        assert tra_score(0.0, 43.0) == 1.0
        assert tra_score(43.0, 43.0) == 0.0
        assert abs(tra_score(1.5, 43.0) - (1.0 - 1.5 / 43.0)) < 1e-12

    def test_min_clamp_keeps_tra_nonnegative(self):
        assert tra_score(100.0, 43.0) == 0.0

    def test_empty_ground_truth_rejected(self):
        with pytest.raises(ValidationError):
            tra_score(1.0, 0.0)

    def test_deleting_a_correct_edge_never_increases_tra(self):
        records = [TrackRecord(1, 0, 3, 0), TrackRecord(2, 0, 3, 0)]
        frames = []
        for t in range(4):
            img = np.zeros((32, 32), dtype=np.uint16)
            square_marker(img, 4, 4, 5, 1)
            square_marker(img, 20, 20, 5, 2)
            frames.append(img)
        full = count_aogm(records, frames, records, frames)
        for break_at in range(3):
            # relabel track 1 after the break so one link disappears
            pred_records = [
                TrackRecord(1, 0, break_at, 0),
                TrackRecord(7, break_at + 1, 3, 0),
                TrackRecord(2, 0, 3, 0),
            ]
            pred_frames = []
            for t in range(4):
                img = np.zeros((32, 32), dtype=np.uint16)
                square_marker(img, 4, 4, 5, 1 if t <= break_at else 7)
                square_marker(img, 20, 20, 5, 2)
                pred_frames.append(img)
            broken = count_aogm(records, frames, pred_records, pred_frames)
            assert broken.tra <= full.tra


class TestErrorBreakdown:
    def _report(self, **kwargs):
        fields = dict(ns=0, fn=0, fp=0, ed=0, ea=0, ec=0, aogm=0.0, aogm_0=43.0, tra=1.0)
        fields.update(kwargs)
        return AogmReport(**fields)

    def test_identical_reports_zero_deltas(self):
        a = self._report(ns=2, ed=1, ea=3)
        deltas = error_breakdown(a, a)
        assert (deltas.splits, deltas.fp_edges, deltas.fn_edges) == (0, 0, 0)

    def test_one_fewer_missing_edge(self):
        a = self._report(ea=3)
        b = self._report(ea=2)
        assert error_breakdown(a, b).fn_edges == -1

    def test_matches_direct_subtraction(self):
        rng = RandomSource(53)
        for _ in range(20):
            vals = rng.integers(0, 10, 6)
            a = self._report(ns=int(vals[0]), ed=int(vals[1]), ea=int(vals[2]))
            b = self._report(ns=int(vals[3]), ed=int(vals[4]), ea=int(vals[5]))
            d = error_breakdown(a, b)
            assert d.splits == b.ns - a.ns
            assert d.fp_edges == b.ed - a.ed
            assert d.fn_edges == b.ea - a.ea
