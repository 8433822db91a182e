import numpy as np
import pytest

from qusync import lindblad as lb
from qusync.experiments import PhaseDiagram
from qusync.measures import (
    DegenerateNormalizationError,
    TimeSeries,
    UndefinedCorrelationError,
    WindowSpec,
    concurrence_series,
    nm_entanglement,
    nm_from_distance_series,
    normalize_diagram,
    pearson,
    positive_increment_total,
    running_positive_increments,
    sliding_pearson,
)
from qusync.qcore import ket, projector


def series(values, t0=0.0, dt=1.0):
    return TimeSeries(t0, dt, np.asarray(values, dtype=float))


class TestPearson:
    def test_perfect_positive_linearity(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)

    def test_perfect_negative_linearity(self):
        assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_evaluated_half(self):
        # deviations give numerator 1 over denominator 2
        assert pearson([1, 2, 3], [-1, 1, 0]) == pytest.approx(0.5, abs=1e-12)

    def test_zero_variance_raises(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_affine_invariance_and_sign_flip(self, rng):
        x = rng.normal(size=50)
        for a, b in [(2.5, 1.0), (0.3, -4.0), (-1.7, 0.2), (-0.01, 5.0)]:
            expected = 1.0 if a > 0 else -1.0
            assert pearson(x, a * x + b) == pytest.approx(expected, abs=1e-12)

    def test_symmetry(self, rng):
        x, y = rng.normal(size=30), rng.normal(size=30)
        assert pearson(x, y) == pytest.approx(pearson(y, x), abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2, 3])


class TestSlidingPearson:
    def test_identical_series_gives_all_ones(self, rng):
        x = series(rng.normal(size=400))
        out = sliding_pearson(x, x, WindowSpec(100, 50))
        assert np.allclose(out.values, 1.0, atol=1e-12)

    def test_window_count_and_starts(self):
        x = series(np.sin(np.arange(350)))
        out = sliding_pearson(x, x, WindowSpec(250, 200))
        assert len(out) == 3
        # centers sit at start + window // 2 on the sample grid
        assert np.allclose(out.times(), [125.0, 175.0, 225.0])

    def test_global_sign_flip(self, rng):
        x = series(rng.normal(size=300))
        y = series(-x.values)
        out = sliding_pearson(x, y, WindowSpec(100, 0))
        assert np.allclose(out.values, -1.0, atol=1e-12)

    def test_zero_variance_window_is_nan(self):
        values = np.concatenate([np.ones(100), np.sin(np.arange(100))])
        x = series(values)
        y = series(np.arange(200, dtype=float))
        out = sliding_pearson(x, y, WindowSpec(100, 0))
        assert np.isnan(out.values[0])
        assert np.isfinite(out.values[1])

    def test_short_series_rejected(self):
        x = series(np.arange(10, dtype=float))
        with pytest.raises(ValueError):
            sliding_pearson(x, x, WindowSpec(20, 10))

    def test_collision_grid_timestamps(self):
        x = series(np.sin(0.3 * np.arange(1, 501)), t0=1.0, dt=1.0)
        out = sliding_pearson(x, x, WindowSpec(250, 200))
        assert out.times()[0] == 1.0 + 125.0


class TestPositiveIncrements:
    def test_monotone_decay_gives_exact_zero(self):
        assert nm_from_distance_series([1.0, 0.8, 0.6, 0.4]) == 0.0

    def test_single_revival(self):
        assert nm_from_distance_series([1.0, 0.5, 0.7, 0.4]) == pytest.approx(0.2, abs=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            nm_from_distance_series([1.0, 1.5, 0.2])

    def test_decoupled_master_equation_has_no_memory(self):
        params = lb.SystemParams(omega1=1.1, lam=0.0, gamma0=0.01)
        _, distances = lb.pair_distance_series(params, t_end=100.0)
        assert nm_from_distance_series(distances) == 0.0

    def test_running_totals_are_cumulative(self):
        running = running_positive_increments([1.0, 0.5, 0.7, 0.4, 0.6])
        assert np.allclose(running, [0.0, 0.0, 0.2, 0.2, 0.4], atol=1e-12)
        assert np.all(np.diff(running) >= 0)


class TestEntanglementMeasure:
    @staticmethod
    def bell_mixture(p):
        bell = projector((ket(0, 0) + ket(1, 1)) / np.sqrt(2))
        return p * bell + (1 - p) * np.eye(4) / 4

    def test_bell_state_starts_at_full_concurrence(self):
        values = concurrence_series([self.bell_mixture(1.0)])
        assert values[0] == pytest.approx(1.0, abs=1e-12)

    def test_monotone_series_scores_zero(self):
        traj = [self.bell_mixture(p) for p in (1.0, 0.8, 0.6, 0.4)]
        assert nm_entanglement(traj) == 0.0

    def test_single_revival_sum(self):
        # concurrence of the mixture is (3p - 1)/2, so these p values give
        # the concurrence series [1.0, 0.4, 0.7, 0.1]
        ps = [(2 * e + 1) / 3 for e in (1.0, 0.4, 0.7, 0.1)]
        traj = [self.bell_mixture(p) for p in ps]
        assert nm_entanglement(traj) == pytest.approx(0.3, abs=1e-12)

    def test_witness_local_unitary_invariance(self, rng):
        from conftest import random_unitary

        traj = [self.bell_mixture(p) for p in (0.9, 0.5, 0.75, 0.2)]
        u = np.kron(random_unitary(rng, 2), np.eye(2))
        rotated = [u @ m @ u.conj().T for m in traj]
        ref = concurrence_series(traj)
        got = concurrence_series(rotated)
        assert np.max(np.abs(ref - got)) < 1e-9


class TestNormalizeDiagram:
    @staticmethod
    def diagram(cells):
        cells = np.asarray(cells, dtype=float)
        return PhaseDiagram(
            metric="nm-trace",
            x_name="x",
            x_values=tuple(range(cells.shape[1])),
            y_name="y",
            y_values=tuple(range(cells.shape[0])),
            cells=cells,
        )

    def test_divides_by_grid_maximum(self):
        out = normalize_diagram(self.diagram([[0.0, 0.2], [0.4, 0.1]]))
        assert np.allclose(out.cells, [[0.0, 0.5], [1.0, 0.25]], atol=1e-15)

    def test_idempotent_on_normalized_grid(self):
        once = normalize_diagram(self.diagram([[0.0, 0.2], [0.4, 0.1]]))
        twice = normalize_diagram(once)
        assert np.array_equal(once.cells, twice.cells)

    def test_single_cell(self):
        out = normalize_diagram(self.diagram([[0.7]]))
        assert out.cells[0, 0] == 1.0

    def test_all_zero_grid_rejected(self):
        with pytest.raises(DegenerateNormalizationError):
            normalize_diagram(self.diagram([[0.0, 0.0]]))

    def test_missing_cells_stay_missing(self):
        out = normalize_diagram(self.diagram([[np.nan, 0.5], [0.25, 0.0]]))
        assert np.isnan(out.cells[0, 0])
        assert out.cells[0, 1] == 1.0


class TestRefinementStability:
    def test_reference_point_measure_is_sampling_stable(self):
        # doubling the sample rate moves the measure by far less than 2%
        params = lb.SystemParams(omega1=1.05, lam=0.05, gamma0=0.01)
        _, coarse = lb.pair_distance_series(params, t_end=500.0, stride=10)
        _, fine = lb.pair_distance_series(params, t_end=500.0, stride=5)
        nm_coarse = nm_from_distance_series(coarse)
        nm_fine = nm_from_distance_series(fine)
        assert abs(nm_fine - nm_coarse) / nm_coarse < 0.02


class TestValidation:
    def test_window_spec_bounds(self):
        with pytest.raises(ValueError):
            WindowSpec(1, 0)
        with pytest.raises(ValueError):
            WindowSpec(10, 10)
        assert WindowSpec(10, 4).stride == 6

    def test_time_series_checks(self):
        with pytest.raises(ValueError):
            TimeSeries(0.0, 0.0, np.ones(3))
        with pytest.raises(ValueError):
            TimeSeries(0.0, 1.0, np.ones((2, 2)))
