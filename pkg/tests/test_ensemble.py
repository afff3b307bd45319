"""
Tests for disorder sampling, ensemble statistics and parameter sweeps.
"""

import math

import numpy as np
import pytest

from sshh_walk.core.berry import SubsetSelector, TwistGrid, phase_distance
from sshh_walk.core.dynamics import PropagatorConfig
from sshh_walk.core.ensemble import (
    DisorderConfig,
    circular_statistic,
    disorder_averaged_berry,
    disorder_averaged_polarization,
    disordered_spec,
    linear_statistic,
    run_sweep,
    sample_disorder,
)
from sshh_walk.core.lattice import LatticeSpec
from sshh_walk.core.walks import WalkRecipe, setup_injections

LOWER_BAND = SubsetSelector.index_range(0, 4)


class TestDisorderSampling:
    """Test cases for Philox disorder streams."""

    def test_validation(self):
        """Test rejection of bad disorder settings."""
        with pytest.raises(ValueError):
            DisorderConfig(W=-0.1)
        with pytest.raises(ValueError):
            DisorderConfig(kind="bond")
        with pytest.raises(ValueError):
            DisorderConfig(realizations=0)
        with pytest.raises(ValueError):
            DisorderConfig(seed=2**64)
        with pytest.raises(ValueError):
            DisorderConfig(rng="mt19937")

    def test_reproducible_per_realization(self):
        """Test that a realization does not depend on the ensemble size."""
        small = DisorderConfig(W=0.5, kind="both", realizations=3, seed=20240101)
        large = DisorderConfig(W=0.5, kind="both", realizations=100, seed=20240101)
        for a, b in zip(sample_disorder(small, 2, 8), sample_disorder(large, 2, 8)):
            np.testing.assert_array_equal(a, b)
        other = sample_disorder(large, 3, 8)
        assert not np.array_equal(other[0], sample_disorder(large, 2, 8)[0])

    def test_amplitude_and_kind(self):
        """Test the uniform window and disabled kinds."""
        cfg = DisorderConfig(W=0.4, kind="onsite", realizations=2, seed=1)
        hopping, onsite = sample_disorder(cfg, 0, 50)
        assert not hopping.any()
        assert np.all(np.abs(onsite) <= 0.2)
        assert onsite.std() > 0
        clean = sample_disorder(DisorderConfig(W=0.0, kind="both"), 0, 8)
        assert not clean[0].any() and not clean[1].any()
        with pytest.raises(ValueError):
            sample_disorder(cfg, 2, 8)

    def test_disordered_spec(self):
        """Test that sampled offsets land on the spec."""
        cfg = DisorderConfig(W=0.3, realizations=1, seed=5)
        spec = disordered_spec(LatticeSpec(L=8, delta=0.2), cfg, 0)
        assert not spec.is_clean
        np.testing.assert_array_equal(spec.hopping_disorder, sample_disorder(cfg, 0, 8)[0])


class TestStatistics:
    """Test cases for circular and linear statistics."""

    def test_circular_mean_across_branch_cut(self):
        """Test that phases near ±π average to π."""
        stat = circular_statistic([math.pi - 0.01, -math.pi + 0.01])
        assert phase_distance(stat.mean, math.pi) < 1e-12
        assert stat.resultant == pytest.approx(math.cos(0.01))
        assert stat.count == 2

    def test_identical_phases(self):
        """Test a perfectly concentrated sample."""
        stat = circular_statistic([0.5, 0.5, 0.5])
        assert stat.mean == pytest.approx(0.5)
        assert stat.stderr == pytest.approx(0.0, abs=1e-6)

    def test_empty_samples(self):
        """Test that empty samples give NaN means."""
        assert math.isnan(circular_statistic([]).mean)
        assert math.isnan(linear_statistic([]).mean)

    def test_linear(self):
        """Test the mean and standard error."""
        stat = linear_statistic([1.0, 2.0, 3.0])
        assert stat.mean == pytest.approx(2.0)
        assert stat.stderr == pytest.approx(1.0 / math.sqrt(3.0))
        assert linear_statistic([4.0]).stderr == 0.0


class TestDisorderAveragedBerry:
    """Test cases for disorder_averaged_berry."""

    def test_clean_limit(self):
        """Test that W=0 reproduces the clean phases with unit resultant."""
        spec = LatticeSpec(L=8)
        cfg = DisorderConfig(W=0.0, realizations=2)
        result = disorder_averaged_berry(spec, TwistGrid(8), LOWER_BAND, cfg, [-0.5, 0.5])
        means = result.means("gamma_B")
        assert phase_distance(means[0], 0.0) < 1e-6
        assert phase_distance(means[1], math.pi) < 1e-6
        for point in result.points:
            assert point.valid
            assert point.statistics["gamma_B"].resultant == pytest.approx(1.0)

    def test_schedule_independent(self):
        """Test identical results for serial and parallel execution."""
        spec = LatticeSpec(L=8, delta=0.5)
        cfg = DisorderConfig(W=0.2, realizations=4, seed=11)
        serial = disorder_averaged_berry(spec, TwistGrid(6), LOWER_BAND, cfg)
        parallel = disorder_averaged_berry(spec, TwistGrid(6), LOWER_BAND, cfg, n_jobs=2)
        expected = parallel.means("gamma_B")[0]
        assert serial.means("gamma_B")[0] == pytest.approx(expected, abs=1e-12)

    def test_failed_realizations(self):
        """Test that gap closures are counted as failures."""
        spec = LatticeSpec(L=8, delta=0.0)
        cfg = DisorderConfig(W=0.0, realizations=3)
        result = disorder_averaged_berry(spec, TwistGrid(4), LOWER_BAND, cfg)
        point = result.points[0]
        assert len(point.failures) == 3
        assert not point.valid
        assert point.statistics["gamma_B"].count == 0

    def test_folded_estimator(self):
        """Test the folded estimator and rejection of unknown ones."""
        spec = LatticeSpec(L=8, delta=-0.5)
        cfg = DisorderConfig(W=0.0, realizations=2)
        result = disorder_averaged_berry(
            spec, TwistGrid(4), LOWER_BAND, cfg, estimator="folded"
        )
        assert result.kind == "folded"
        assert result.points[0].statistics["gamma_B"].mean == pytest.approx(0.0, abs=1e-6)
        topological = disorder_averaged_berry(
            spec, TwistGrid(8), LOWER_BAND, cfg, [0.5], estimator="folded"
        )
        mean = topological.points[0].statistics["gamma_B"].mean
        assert -math.pi < mean <= math.pi
        assert phase_distance(mean, math.pi) < 1e-6
        with pytest.raises(ValueError):
            disorder_averaged_berry(spec, TwistGrid(4), LOWER_BAND, cfg, estimator="median")


class TestSweeps:
    """Test cases for polarization averages and run_sweep."""

    def test_polarization_average(self):
        """Test the per-dimerization statistics of a short walk."""
        spec = LatticeSpec(L=6, U=4.0, n_flavors=2)
        recipe = WalkRecipe(setup_injections("A", 2, 2), PropagatorConfig(dt=0.05, t_max=1.0))
        cfg = DisorderConfig(W=0.2, realizations=2, seed=3)
        result = disorder_averaged_polarization(spec, recipe, cfg, [0.3])
        point = result.points[0]
        assert set(point.statistics) == {"P1c", "PNc"}
        assert point.statistics["P1c"].count == 2
        assert result.kind == "linear"

    def test_grid_order(self):
        """Test that sweeps are W-major over the (δ, W) grid."""
        spec = LatticeSpec(L=8)
        cfg = DisorderConfig(realizations=2, seed=7)
        result = run_sweep(
            spec, [-0.5, 0.5], [0.0, 0.1], cfg, grid=TwistGrid(4), sel=LOWER_BAND
        )
        np.testing.assert_allclose(result.axis("W"), [0.0, 0.0, 0.1, 0.1])
        np.testing.assert_allclose(result.axis("delta"), [-0.5, 0.5, -0.5, 0.5])
        assert len(result.to_rows()) == 4
        assert result.metadata["observable"] == "berry"

    def test_missing_inputs(self):
        """Test that sweeps refuse incomplete configurations."""
        spec = LatticeSpec(L=8)
        cfg = DisorderConfig()
        with pytest.raises(ValueError):
            run_sweep(spec, [0.5], [0.0], cfg, observable="energy")
        with pytest.raises(ValueError):
            run_sweep(spec, [0.5], [0.0], cfg, grid=TwistGrid(4))
        with pytest.raises(ValueError):
            run_sweep(spec, [0.5], [0.0], cfg, observable="polarization")


@pytest.mark.slow
class TestTrionBandRobustness:
    """Test cases for the trion-band Berry phase under hopping disorder."""

    def test_jump_survives_hopping_disorder(self):
        """Test the circular-mean γ of 100 realizations at W=0.5 and |δ| >= 0.2."""
        spec = LatticeSpec(L=8, U=3.0, n_flavors=3)
        cfg = DisorderConfig(W=0.5, kind="hopping", realizations=100, seed=20240101)
        deltas = [-0.5, -0.3, 0.3, 0.5]
        result = disorder_averaged_berry(
            spec, TwistGrid(20), SubsetSelector.band("lower_trion"), cfg, deltas, n_jobs=-1
        )
        means = result.means("gamma_B")
        for delta, mean in zip(deltas, means):
            clean = math.pi if delta > 0 else 0.0
            assert phase_distance(mean, clean) < 0.15
        for i in range(2):
            assert phase_distance(means[i], means[-1 - i]) == pytest.approx(math.pi, abs=0.2)
        assert all(point.valid for point in result.points)
