"""2D cell-motion engine.

Cells are disks in the unit square.  A population is initialized at uniform
random positions, evolves by a random walk whose step magnitude is gamma
distributed and direction uniform, splits stochastically into daughter
pairs, and is kept overlap-free by an iterative pairwise repulsion scheme.

Overlap convention: disks i and j overlap iff ``dx*dx + dy*dy <
(r_i + r_j)**2`` evaluated in double precision.  Engine and tests share
this predicate, so the no-overlap guarantee is exact rather than
tolerance-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    Cell,
    ConvergenceError,
    DatasetStatistics,
    PopulationState,
    RandomSource,
    SimulationConfig,
    TimeLapseTrajectory,
    TrackRecord,
    mitosis_clock_table,
    validate_lineage,
)

__all__ = [
    "RepulsionParams",
    "DivisionEvent",
    "reflect_unit",
    "sample_positive_areas",
    "init_population",
    "step_positions",
    "maybe_split",
    "resolve_overlaps",
    "simulate",
]


@dataclass(frozen=True)
class RepulsionParams:
    """Jitter and iteration budget for overlap resolution.

    ``deterministic_mode`` forces both jitters to zero, which makes the
    pairwise updates exactly reproducible by hand.
    """

    angle_jitter: float = 0.1  # theta noise ~ U(-angle_jitter, +angle_jitter)
    magnitude_jitter: float = 0.2  # displacement factor 1 + U(0, magnitude_jitter)
    max_iterations: int = 10_000
    deterministic_mode: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class DivisionEvent:
    """A split: parent disappears, two daughters appear at ``frame``."""

    parent_id: int
    daughter_ids: tuple[int, int]
    frame: int


def reflect_unit(values: np.ndarray | float):
    """Fold coordinates into [0, 1] by mirror reflection at the walls."""
    folded = np.mod(values, 2.0)
    return np.where(folded > 1.0, 2.0 - folded, folded)


def sample_positive_areas(count: int, stats: DatasetStatistics, rng: RandomSource) -> np.ndarray:
    """Draw areas from N(mean_area, std_area/10), redrawing until positive."""
    areas = np.asarray(rng.normal(stats.mean_area, stats.std_area / 10.0, count), dtype=np.float64)
    for _ in range(1000):
        bad = areas <= 0.0
        n_bad = int(bad.sum())
        if n_bad == 0:
            return areas
        areas[bad] = rng.normal(stats.mean_area, stats.std_area / 10.0, n_bad)
    raise ConvergenceError("area sampling failed to produce positive draws")


# The repulsion update shrinks a pair's gap geometrically, so it can
# neither reach zero in floating point nor propagate through jammed
# contact chains in reasonable time.  Once the remaining overlap drops
# below this fraction of the contact distance (sub-pixel for typical cell
# sizes and raster resolutions) the pair is placed directly at contact.
_SNAP_RELATIVE_OVERLAP = 1e-2


def _overlapping_among(
    xs: np.ndarray, ys: np.ndarray, rad: np.ndarray, rows: np.ndarray
) -> set[tuple[int, int]]:
    """Overlapping pairs (i, j), i < j, that involve at least one row index."""
    dx = xs[rows][:, None] - xs[None, :]
    dy = ys[rows][:, None] - ys[None, :]
    rsum = rad[rows][:, None] + rad[None, :]
    k_idx, j_idx = np.nonzero(dx * dx + dy * dy < rsum * rsum)
    i_idx = rows[k_idx]
    keep = i_idx != j_idx
    lo = np.minimum(i_idx[keep], j_idx[keep])
    hi = np.maximum(i_idx[keep], j_idx[keep])
    return set(zip(lo.tolist(), hi.tolist()))


def _push_apart(xs: list, ys: list, i: int, j: int, rsum: float, dist_sq: float,
                params: RepulsionParams, rng: RandomSource) -> None:
    """Apply the symmetric repulsion update to one overlapping pair.

    The displacement along the center line is
    ``F = (r_i + r_j - d) * (r_i + r_j) / 2``, with angle and magnitude
    jitter unless ``deterministic_mode``; coincident centers get a uniform
    random direction.  When the remaining overlap is sub-physical
    (below ``_SNAP_RELATIVE_OVERLAP`` of the contact distance) the pair is
    placed symmetrically about its midpoint at the smallest representable
    separation satisfying the no-overlap predicate.
    """
    dx = xs[i] - xs[j]
    dy = ys[i] - ys[j]
    dist = math.sqrt(dist_sq)
    if dist == 0.0:
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
    else:
        theta = math.atan2(dy, dx)
        if not params.deterministic_mode:
            theta += float(rng.uniform(-params.angle_jitter, params.angle_jitter))
    ux = math.cos(theta)
    uy = math.sin(theta)

    overlap = rsum - dist
    if overlap <= rsum * _SNAP_RELATIVE_OVERLAP:
        mid_x = (xs[i] + xs[j]) / 2.0
        mid_y = (ys[i] + ys[j]) / 2.0
        slack = 2.0**-50  # smallest representable separation wins
        for _ in range(200):
            h = (rsum / 2.0) * (1.0 + slack)
            xi, yi = mid_x + h * ux, mid_y + h * uy
            xj, yj = mid_x - h * ux, mid_y - h * uy
            ddx, ddy = xi - xj, yi - yj
            if ddx * ddx + ddy * ddy >= rsum * rsum:
                xs[i], ys[i] = xi, yi
                xs[j], ys[j] = xj, yj
                return
            slack *= 2.0
        raise ConvergenceError("snap-to-contact failed")  # pragma: no cover

    push = overlap * (rsum / 2.0)
    if not params.deterministic_mode:
        push *= 1.0 + float(rng.uniform(0.0, params.magnitude_jitter))
    xs[i] += push * ux
    ys[i] += push * uy
    xs[j] -= push * ux
    ys[j] -= push * uy


def _fold_unit(v: float) -> float:
    """Scalar mirror reflection into [0, 1] (same convention as reflect_unit)."""
    v %= 2.0
    return 2.0 - v if v > 1.0 else v


def resolve_overlaps(
    state: PopulationState,
    params: RepulsionParams,
    rng: RandomSource,
) -> PopulationState:
    """Push overlapping disk pairs apart until no overlaps remain.

    Each iteration processes the current overlapping pairs in (i, j)
    lexicographic order, recomputing each pair's separation on the live
    positions (earlier pushes within the same iteration are visible), then
    re-reflects the moved positions into the unit square.  Candidate pairs
    for the next iteration are rediscovered around the cells that moved; a
    pair whose cells have not moved since it was last checked stays
    separated, so the final frame is overlap-free under the exact
    predicate.

    Raises ConvergenceError if overlaps persist after ``max_iterations``
    iterations (the population is too dense).
    """
    cells = state.cells
    if len(cells) < 2:
        return state
    xs = [c.position[0] for c in cells]
    ys = [c.position[1] for c in cells]
    radii = [c.radius for c in cells]
    px = np.array(xs, dtype=np.float64)
    py = np.array(ys, dtype=np.float64)
    rad = np.array(radii, dtype=np.float64)

    candidates = _overlapping_among(px, py, rad, np.arange(len(cells)))
    if not candidates:
        return state

    for _ in range(params.max_iterations):
        if not candidates:
            break
        moved: set[int] = set()
        for i, j in sorted(candidates):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            rsum = radii[i] + radii[j]
            dist_sq = dx * dx + dy * dy
            if dist_sq >= rsum * rsum:
                continue  # separated by an earlier push this iteration
            _push_apart(xs, ys, i, j, rsum, dist_sq, params, rng)
            moved.add(i)
            moved.add(j)
        for k in moved:
            if not 0.0 <= xs[k] <= 1.0:
                xs[k] = _fold_unit(xs[k])
            if not 0.0 <= ys[k] <= 1.0:
                ys[k] = _fold_unit(ys[k])
            px[k] = xs[k]
            py[k] = ys[k]
        if moved:
            candidates = _overlapping_among(
                px, py, rad, np.fromiter(moved, dtype=np.intp)
            )
        else:
            candidates = set()
    else:
        if candidates:
            raise ConvergenceError(
                f"overlaps persist after {params.max_iterations} iterations "
                f"({len(cells)} cells): population too dense"
            )

    new_cells = tuple(
        replace(c, position=(x, y)) for c, x, y in zip(cells, xs, ys)
    )
    return PopulationState(state.frame_index, new_cells)


def init_population(
    config: SimulationConfig,
    rng: RandomSource,
    repulsion: RepulsionParams = RepulsionParams(),
) -> PopulationState:
    """Initial frame: uniform positions, sampled areas, overlaps resolved.

    Cells get track ids 1..n in draw order and start in interphase.
    """
    stats = config.effective_stats
    n = stats.initial_cell_count
    positions = np.asarray(rng.uniform(0.0, 1.0, (n, 2)), dtype=np.float64)
    areas = sample_positive_areas(n, stats, rng)
    cells = tuple(
        Cell(
            track_id=i + 1,
            position=(float(positions[i, 0]), float(positions[i, 1])),
            radius=config.normalized_radius(float(areas[i])),
            area=float(areas[i]),
        )
        for i in range(n)
    )
    return resolve_overlaps(PopulationState(0, cells), repulsion, rng)


def step_positions(
    state: PopulationState,
    stats: DatasetStatistics,
    rng: RandomSource,
) -> PopulationState:
    """Advance every cell by one random-walk step.

    Draw order: one array of angles ~ U(0, 2*pi), then one array of
    magnitudes ~ Gamma(shape, scale), both in cell order.  New positions
    are reflected at the unit-square walls; division clocks advance by one
    frame; track ids are unchanged.
    """
    n = len(state.cells)
    angles = np.asarray(rng.uniform(0.0, 2.0 * math.pi, n), dtype=np.float64)
    magnitudes = np.asarray(rng.gamma(stats.gamma_shape, stats.gamma_scale, n), dtype=np.float64)
    new_cells = []
    for cell, phi, mag in zip(state.cells, angles, magnitudes):
        x = reflect_unit(cell.position[0] + mag * math.cos(phi))
        y = reflect_unit(cell.position[1] + mag * math.sin(phi))
        clock = None if cell.mitosis_clock is None else cell.mitosis_clock + 1
        new_cells.append(replace(cell, position=(float(x), float(y)), mitosis_clock=clock))
    return PopulationState(state.frame_index + 1, tuple(new_cells))


def maybe_split(
    state: PopulationState,
    stats: DatasetStatistics,
    config: SimulationConfig,
    rng: RandomSource,
) -> tuple[PopulationState, list[DivisionEvent]]:
    """Let each eligible cell divide with probability ``split_probability``.

    A cell still inside a mitosis window (division clock < half the cycle
    length) is not eligible.  One decision draw u ~ U(0, 1) is consumed per
    cell, in cell order, regardless of eligibility; a splitting cell then
    draws the axis angle ~ U(0, 2*pi), the offset factor d ~ U(0.7, 0.8)
    and two daughter areas.  Daughters sit at ``p +- d * r * (cos, sin)``
    (r = parent radius), reflected into the unit square, carry fresh track
    ids and a division clock of +1, and are appended after the surviving
    cells.  The parent is absent from the returned frame.
    """
    half = config.mitosis_cycle_length / 2.0
    next_id = max((c.track_id for c in state.cells), default=0) + 1
    survivors: list[Cell] = []
    daughters: list[Cell] = []
    events: list[DivisionEvent] = []

    for cell in state.cells:
        decision = float(rng.uniform(0.0, 1.0))
        eligible = cell.mitosis_clock is None or cell.mitosis_clock >= half
        if not (eligible and decision < stats.split_probability):
            survivors.append(cell)
            continue
        phi = float(rng.uniform(0.0, 2.0 * math.pi))
        d = float(rng.uniform(0.7, 0.8))
        areas = sample_positive_areas(2, stats, rng)
        offset_x = d * cell.radius * math.cos(phi)
        offset_y = d * cell.radius * math.sin(phi)
        ids = (next_id, next_id + 1)
        next_id += 2
        for k, sign in enumerate((1.0, -1.0)):
            x = float(reflect_unit(cell.position[0] + sign * offset_x))
            y = float(reflect_unit(cell.position[1] + sign * offset_y))
            daughters.append(
                Cell(
                    track_id=ids[k],
                    position=(x, y),
                    radius=config.normalized_radius(float(areas[k])),
                    area=float(areas[k]),
                    mitosis_clock=1,
                    parent_id=cell.track_id,
                )
            )
        events.append(DivisionEvent(cell.track_id, ids, state.frame_index))

    new_state = PopulationState(state.frame_index, tuple(survivors + daughters))
    return new_state, events


def _lineage_from_frames(frames: list[PopulationState]) -> tuple[TrackRecord, ...]:
    begin: dict[int, int] = {}
    end: dict[int, int] = {}
    parent: dict[int, int] = {}
    for st in frames:
        for cell in st.cells:
            begin.setdefault(cell.track_id, st.frame_index)
            end[cell.track_id] = st.frame_index
            parent.setdefault(cell.track_id, cell.parent_id or 0)
    return tuple(
        TrackRecord(label, begin[label], end[label], parent[label])
        for label in sorted(begin)
    )


def _stamp_mitosis_clocks(
    frames: list[PopulationState],
    lineage: tuple[TrackRecord, ...],
    cycle_length: int,
) -> tuple[PopulationState, ...]:
    table = mitosis_clock_table(lineage, cycle_length)
    stamped = []
    for st in frames:
        cells = tuple(
            replace(c, mitosis_clock=table.get((c.track_id, st.frame_index)))
            for c in st.cells
        )
        stamped.append(PopulationState(st.frame_index, cells))
    return tuple(stamped)


def simulate(
    config: SimulationConfig,
    rng: RandomSource,
    repulsion: RepulsionParams = RepulsionParams(),
) -> TimeLapseTrajectory:
    """Run the full motion model for ``frames_per_video`` frames.

    Frames are produced forward in time: initialization, then per frame a
    random-walk step, stochastic splitting, and overlap resolution.  The
    returned trajectory carries the lineage forest and division clocks
    stamped from it (onset ramp on the parent's last frames, reversion
    ramp on the daughters' first frames).  Pure given (config, seed).
    """
    stats = config.effective_stats
    state = init_population(config, rng, repulsion)
    frames = [state]
    for _ in range(1, config.frames_per_video):
        state = step_positions(state, stats, rng)
        state, _events = maybe_split(state, stats, config, rng)
        state = resolve_overlaps(state, repulsion, rng)
        frames.append(state)

    lineage = _lineage_from_frames(frames)
    validate_lineage(lineage)
    stamped = _stamp_mitosis_clocks(frames, lineage, config.mitosis_cycle_length)
    return TimeLapseTrajectory(stamped, lineage)
