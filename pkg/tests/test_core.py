import numpy as np
import pytest

from cellforge.core import (
    Cell,
    DatasetStatistics,
    PopulationState,
    RandomSource,
    SimulationConfig,
    TrackRecord,
    ValidationError,
    derive_child_seed,
    mitosis_clock_table,
    validate_lineage,
)


class TestDeriveChildSeed:
    def test_distinct_for_adjacent_indices(self):
        s = 123456789
        assert derive_child_seed(s, 0) != derive_child_seed(s, 1)

    def test_deterministic(self):
        assert derive_child_seed(42, 7) == derive_child_seed(42, 7)

    def test_collision_free_over_10k_indices(self):
        seeds = {derive_child_seed(99, k) for k in range(10_000)}
        assert len(seeds) == 10_000

    def test_rejects_negative_index(self):
        with pytest.raises(ValidationError):
            derive_child_seed(1, -1)


class TestRandomSource:
    def test_identical_seed_identical_sequence(self):
        a, b = RandomSource(7), RandomSource(7)
        assert a.uniform(0, 1) == b.uniform(0, 1)
        assert np.array_equal(a.normal(0, 1, 5), b.normal(0, 1, 5))
        assert np.array_equal(a.gamma(3.0, 0.5, 5), b.gamma(3.0, 0.5, 5))
        assert a.integers(0, 100) == b.integers(0, 100)

    def test_spawn_is_deterministic_and_independent(self):
        a = RandomSource(7).spawn(3)
        b = RandomSource(7).spawn(3)
        c = RandomSource(7).spawn(4)
        assert a.seed == b.seed == derive_child_seed(7, 3)
        assert a.seed != c.seed
        assert a.uniform(0, 1) == b.uniform(0, 1)

    def test_gamma_sampling_moments(self):
        # empirical mean within 1% of shape*scale, variance within 2% of shape*scale^2
        shape, scale = 3.0, 0.02
        draws = RandomSource(2024).gamma(shape, scale, 1_000_000)
        assert abs(draws.mean() - shape * scale) <= 0.01 * shape * scale
        assert abs(draws.var() - shape * scale**2) <= 0.02 * shape * scale**2


class TestDomainTypes:
    def test_statistics_validation(self):
        ok = DatasetStatistics(400, 50, 3.0, 0.02, 0.01, 10)
        assert ok.mean_area == 400
        for kwargs in [
            dict(mean_area=0),
            dict(std_area=-1),
            dict(gamma_shape=0),
            dict(gamma_scale=0),
            dict(split_probability=1.5),
            dict(split_probability=-0.1),
            dict(initial_cell_count=0),
        ]:
            fields = dict(
                mean_area=400, std_area=50, gamma_shape=3.0,
                gamma_scale=0.02, split_probability=0.01, initial_cell_count=10,
            )
            fields.update(kwargs)
            with pytest.raises(ValidationError):
                DatasetStatistics(**fields)

    def test_track_record_validation(self):
        with pytest.raises(ValidationError):
            TrackRecord(1, 5, 3, 0)
        with pytest.raises(ValidationError):
            TrackRecord(0, 0, 1, 0)
        with pytest.raises(ValidationError):
            TrackRecord(1, -1, 1, 0)

    def test_population_rejects_duplicate_ids(self):
        cell = Cell(1, (0.5, 0.5), 0.01, 100.0)
        with pytest.raises(ValidationError):
            PopulationState(0, (cell, cell))

    def test_config_validation(self):
        stats = DatasetStatistics(400, 50, 3.0, 0.02, 0.01, 10)
        with pytest.raises(ValidationError):
            SimulationConfig(stats=stats, frames_per_video=0)
        with pytest.raises(ValidationError):
            SimulationConfig(stats=stats, mitosis_cycle_length=1)
        with pytest.raises(ValidationError):
            SimulationConfig(stats=stats, image_size=(32, 512))
        with pytest.raises(ValidationError):
            SimulationConfig(stats=stats, count_multiplier=0)

    def test_effective_stats_applies_multipliers(self):
        stats = DatasetStatistics(400, 50, 3.0, 0.02, 0.4, 10)
        config = SimulationConfig(
            stats=stats,
            count_multiplier=2.5,
            displacement_multiplier=3.0,
            split_multiplier=4.0,
        )
        eff = config.effective_stats
        assert eff.initial_cell_count == 25
        assert eff.gamma_scale == pytest.approx(0.06)
        assert eff.split_probability == 1.0  # clamped
        assert eff.mean_area == 400

    def test_normalized_radius(self):
        stats = DatasetStatistics(400, 50, 3.0, 0.02, 0.01, 10)
        config = SimulationConfig(stats=stats, image_size=(512, 512))
        r = config.normalized_radius(400.0)
        assert r == pytest.approx(np.sqrt(400 / (512 * 512) / np.pi))


class TestLineageValidation:
    def test_valid_forest_passes(self):
        records = [
            TrackRecord(1, 0, 4, 0),
            TrackRecord(2, 5, 9, 1),
            TrackRecord(3, 5, 9, 1),
        ]
        validate_lineage(records)

    def test_unknown_parent(self):
        with pytest.raises(ValidationError, match="unknown parent"):
            validate_lineage([TrackRecord(1, 0, 4, 9)])

    def test_frame_mismatch(self):
        records = [TrackRecord(1, 0, 4, 0), TrackRecord(2, 7, 9, 1), TrackRecord(3, 5, 9, 1)]
        with pytest.raises(ValidationError, match="begins at"):
            validate_lineage(records)

    def test_single_daughter_rejected(self):
        records = [TrackRecord(1, 0, 4, 0), TrackRecord(2, 5, 9, 1)]
        with pytest.raises(ValidationError, match="daughters"):
            validate_lineage(records)

    def test_self_parent_rejected(self):
        with pytest.raises(ValidationError):
            validate_lineage([TrackRecord(1, 0, 4, 1)])

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            validate_lineage([TrackRecord(1, 0, 4, 0), TrackRecord(1, 5, 9, 0)])


class TestMitosisClockTable:
    def test_symmetric_ramp_around_division(self):
        records = [
            TrackRecord(1, 0, 4, 0),
            TrackRecord(2, 5, 9, 1),
            TrackRecord(3, 5, 9, 1),
        ]
        table = mitosis_clock_table(records, mitosis_cycle_length=6)
        # half = 3: parent carries clocks -2..0, daughters +1..+2
        assert table[(1, 4)] == 0
        assert table[(1, 3)] == -1
        assert table[(1, 2)] == -2
        assert (1, 1) not in table
        assert table[(2, 5)] == 1
        assert table[(2, 6)] == 2
        assert (2, 7) not in table
        assert table[(3, 5)] == 1

    def test_birth_ramp_wins_on_overlap(self):
        # track 2 divides again right after its own birth window
        records = [
            TrackRecord(1, 0, 4, 0),
            TrackRecord(2, 5, 6, 1),
            TrackRecord(3, 5, 9, 1),
            TrackRecord(4, 7, 9, 2),
            TrackRecord(5, 7, 9, 2),
        ]
        table = mitosis_clock_table(records, mitosis_cycle_length=6)
        # birth ramp of track 2 keeps frames 5 and 6; its division ramp stops
        assert table[(2, 5)] == 1
        assert table[(2, 6)] == 2
        assert table[(4, 7)] == 1
        assert table[(5, 7)] == 1

    def test_interphase_absent(self):
        records = [TrackRecord(1, 0, 9, 0)]
        assert mitosis_clock_table(records, 6) == {}
