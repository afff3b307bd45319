"""
Tests for injection setups and multiparticle walks.
"""

import numpy as np
import pytest

from sshh_walk.core.dynamics import FULL_SPECTRUM, KRYLOV, PropagatorConfig
from sshh_walk.core.effective import nion_velocity
from sshh_walk.core.lattice import FlavorOccupancy, LatticeSpec
from sshh_walk.core.observables import analytic_P1, front_velocity
from sshh_walk.core.walks import (
    WalkRecipe,
    default_injection_site,
    occupancy_of,
    resolve_t_max,
    run_walk,
    setup_injections,
)


class TestSetups:
    """Test cases for named injection setups."""

    def test_named_setups(self):
        """Test the placements of setups A to E."""
        assert setup_injections("A", 2, 4) == ((4, 0), (4, 1))
        assert setup_injections("B", 2, 4) == ((4, 0), (5, 1))
        assert setup_injections("C", 3, 4) == ((4, 0), (4, 1), (4, 2))
        assert setup_injections("D", 3, 4) == ((3, 0), (4, 1), (5, 2))
        assert setup_injections("E", 3, 4) == ((4, 0), (4, 1), (5, 2))

    def test_nion_setup(self):
        """Test one N-ion per listed site."""
        placements = setup_injections("nion", 3, 14, sites=[14, 16])
        assert len(placements) == 6
        assert occupancy_of(placements, 3) == FlavorOccupancy.uniform(3, 2)
        assert setup_injections("nion", 2, 6) == ((6, 0), (6, 1))

    def test_flavor_mismatch(self):
        """Test that setups refuse the wrong number of flavors."""
        with pytest.raises(ValueError):
            setup_injections("C", 2, 4)
        with pytest.raises(ValueError):
            setup_injections("F", 2, 4)

    def test_default_site(self):
        """Test that the default injection site is sublattice A of cell L//4."""
        assert default_injection_site(30) == 14
        assert default_injection_site(8) == 4


class TestWalkRecipe:
    """Test cases for WalkRecipe."""

    def test_injection_site(self):
        """Test that the largest cluster sets the injection site."""
        recipe = WalkRecipe(setup_injections("E", 3, 6))
        assert recipe.injection_site == 6
        assert recipe.cluster_size == 2
        two = WalkRecipe(setup_injections("nion", 3, 14, sites=[16, 14]))
        assert two.injection_site == 14

    def test_conventions(self):
        """Test the three cell-origin choices."""
        placements = setup_injections("A", 2, 6)
        assert WalkRecipe(placements).convention(12).origin == 3.0
        assert WalkRecipe(placements, origin="center").convention(12).origin == 2.5
        assert WalkRecipe(placements, origin=1.0).convention(12).origin == 1.0

    def test_validation(self):
        """Test rejection of empty walks and unknown origins."""
        with pytest.raises(ValueError):
            WalkRecipe(())
        with pytest.raises(ValueError):
            WalkRecipe(((0, 0),), origin="left")

    def test_cap_t_max(self):
        """Test capping the run at the trion's boundary arrival time."""
        spec = LatticeSpec(L=30, delta=0.5, U=3.0, n_flavors=3)
        recipe = WalkRecipe(
            setup_injections("C", 3, 14), PropagatorConfig(t_max=0.0), cap_t_max=True
        )
        velocity = 2.0 * 3 * 0.5**3 / (2 * 9.0)
        assert resolve_t_max(spec, recipe).t_max == pytest.approx(14 / velocity)
        short = WalkRecipe(recipe.placements, PropagatorConfig(t_max=5.0), cap_t_max=True)
        assert resolve_t_max(spec, short).t_max == 5.0


class TestRunWalk:
    """Test cases for run_walk."""

    def test_bound_doublon(self):
        """Test a strongly bound doublon walk on a short chain."""
        spec = LatticeSpec(L=8, delta=0.3, U=20.0, n_flavors=2)
        recipe = WalkRecipe(setup_injections("A", 2, 4), PropagatorConfig(dt=0.05, t_max=2.0))
        walk = run_walk(spec, recipe)
        assert walk.nion_number[0] == pytest.approx(1.0)
        assert walk.P1.values[0] == pytest.approx(0.0)
        assert walk.PN.values[0] == pytest.approx(0.0)
        assert walk.nion_reliable.all()
        assert walk.nion_number.min() > 0.9
        assert walk.metadata["dimension"] == 64

        rows = walk.polarization_rows()
        assert len(rows) == len(walk.times)
        assert set(rows[0]) == {"t", "P1", "P1c", "PN", "PNc", "nN"}
        assert len(walk.density_rows()) == 8 * len(walk.times)

    def test_separated_pair_is_unreliable_at_start(self):
        """Test that setup B has no N-ion weight at t=0."""
        spec = LatticeSpec(L=6, delta=0.2, U=2.0, n_flavors=2)
        recipe = WalkRecipe(setup_injections("B", 2, 2), PropagatorConfig(dt=0.05, t_max=1.0))
        walk = run_walk(spec, recipe)
        assert not walk.nion_reliable[0]
        assert walk.PN.values[0] == 0.0
        assert walk.nion_number[-1] > 0.0

    def test_noninteracting_doublon_matches_single_particle(self):
        """Test that at U=0 each flavor follows the single-particle P1(t)."""
        for delta in (-0.5, 0.5):
            spec = LatticeSpec(L=40, delta=delta, n_flavors=2)
            recipe = WalkRecipe(
                setup_injections("A", 2, default_injection_site(40)),
                PropagatorConfig(dt=0.05, t_max=10.0),
            )
            walk = run_walk(spec, recipe)
            expected = analytic_P1(delta, 1.0, walk.times)
            assert np.max(np.abs(walk.P1.values - expected)) < 1e-3


class TestNionLightCone:
    """Test cases for the light cones of bound N-ions."""

    def test_doublon_front(self):
        """Test the doublon front against 4J^2/U at U=8, δ=0."""
        spec = LatticeSpec(L=40, U=8.0, n_flavors=2)
        recipe = WalkRecipe(
            setup_injections("A", 2, 20),
            PropagatorConfig(method=FULL_SPECTRUM, dt=0.1, t_max=30.0),
        )
        walk = run_walk(spec, recipe)
        v = front_velocity(walk.trajectory, observable="nion_density")
        assert v == pytest.approx(nion_velocity(2, 1.0, 8.0, 0.0), rel=0.2)

    @pytest.mark.slow
    def test_trion_front(self):
        """Test the trion front against 3J^3/U^2 at U=3, δ=0."""
        spec = LatticeSpec(L=30, U=3.0, n_flavors=3)
        recipe = WalkRecipe(
            setup_injections("C", 3, 14),
            PropagatorConfig(method=KRYLOV, dt=0.1, t_max=36.0),
        )
        walk = run_walk(spec, recipe)
        v = front_velocity(walk.trajectory, observable="nion_density")
        assert v == pytest.approx(nion_velocity(3, 1.0, 3.0, 0.0), rel=0.2)


@pytest.mark.slow
class TestTrionWalks:
    """Test cases for desk-scale trion walks."""

    def test_trion_polarization(self):
        """Test the cumulative P_3 and P_1 plateaus of a trion walk on L=30."""
        for delta, target in ((-0.5, 0.0), (0.5, 0.5)):
            spec = LatticeSpec(L=30, delta=delta, U=3.0, n_flavors=3)
            recipe = WalkRecipe(
                setup_injections("C", 3, 14),
                PropagatorConfig(method=KRYLOV, dt=0.05, t_max=40.0),
            )
            walk = run_walk(spec, recipe)
            assert walk.metadata["dimension"] == 27000
            assert walk.PN.final == pytest.approx(target, abs=0.1)
            assert walk.P1.final == pytest.approx(target, abs=0.1)

    def test_trion_survival(self):
        """Test that a U=8 trion stays bound until its front reaches the chain end."""
        spec = LatticeSpec(L=14, delta=0.1, U=8.0, n_flavors=3)
        recipe = WalkRecipe(
            setup_injections("C", 3, default_injection_site(14)),
            PropagatorConfig(method=FULL_SPECTRUM, dt=0.5, t_max=0.0),
            cap_t_max=True,
        )
        walk = run_walk(spec, recipe)
        assert walk.times[-1] > 100.0
        assert walk.nion_number.min() >= 0.9

    def test_two_trion_polarization(self):
        """Test the P_3 jump of two adjacent trions on L=12 across δ=0."""
        finals = {}
        for delta in (-0.2, 0.2):
            spec = LatticeSpec(L=12, delta=delta, U=3.0, n_flavors=3)
            recipe = WalkRecipe(
                setup_injections("nion", 3, 4, sites=[4, 6]),
                PropagatorConfig(method=KRYLOV, dt=0.1, t_max=20.0),
            )
            walk = run_walk(spec, recipe)
            assert walk.metadata["dimension"] == 287496
            finals[delta] = walk.PN.final
        assert finals[0.2] - finals[-0.2] == pytest.approx(0.5, abs=0.3)
