"""
Tests for effective N-ion chains and band comparisons.
"""

import numpy as np
import pytest

from sshh_walk.core.effective import (
    band_compare,
    band_compare_sweep,
    build_effective_ssh,
    doublon_params,
    effective_chain_from_spec,
    find_edge_states,
    max_group_velocity,
    nion_params,
    nion_velocity,
    trion_params,
)
from sshh_walk.core.exceptions import BandIdentificationError
from sshh_walk.core.lattice import Boundary, LatticeSpec


class TestParams:
    """Test cases for the closed-form N-ion parameters."""

    def test_doublon(self):
        """Test E₂, J₂ and δ₂ of the doublon chain."""
        params = doublon_params(1.0, 8.0, 0.5)
        assert params.E_N == pytest.approx(8.0 + 4.0 * 1.25 / 8.0)
        assert params.J_N == pytest.approx(0.25 * 1.25)
        assert params.delta_N == pytest.approx(0.8)
        assert params.hopping == pytest.approx((0.0625, 0.5625))

    def test_trion(self):
        """Test E₃, J₃ and δ₃ of the trion chain."""
        params = trion_params(1.0, 4.0, 0.2)
        assert params.E_N == pytest.approx(12.0 + 3.0 * 1.04 / 4.0)
        assert params.J_N == pytest.approx(3.0 * 1.12 / 32.0)
        assert params.delta_N == pytest.approx(3.04 * 0.2 / 1.12)

    def test_refusals(self):
        """Test N < 2 and U = 0."""
        with pytest.raises(ValueError):
            nion_params(1, 1.0, 8.0, 0.0)
        with pytest.raises(ZeroDivisionError):
            nion_params(2, 1.0, 0.0, 0.0)


class TestVelocities:
    """Test cases for light-cone velocities."""

    def test_nion_velocity(self):
        """Test v₁ = 2J(1-|δ|) and the doublon velocity."""
        assert nion_velocity(1, 1.0, 0.0, -0.1) == pytest.approx(1.8)
        assert nion_velocity(2, 1.0, 8.0, 0.5) == pytest.approx(0.125)
        assert doublon_params(1.0, 8.0, 0.5).max_velocity == pytest.approx(0.125)

    def test_group_velocity_matches_weaker_bond(self):
        """Test that the band slope maximum is twice the weaker hopping."""
        for delta in (0.0, 0.5):
            params = doublon_params(1.0, 8.0, delta)
            assert max_group_velocity(params) == pytest.approx(params.max_velocity, rel=1e-3)
        assert max_group_velocity(doublon_params(1.0, 8.0, 0.0), L=8) <= 0.5 + 1e-12


class TestEffectiveChains:
    """Test cases for effective chain matrices and edge states."""

    def test_uniform_chain_spectrum(self):
        """Test E₂ + 2J₂cos(k) for the clean periodic doublon chain."""
        params = doublon_params(1.0, 8.0, 0.0)
        energies = np.linalg.eigvalsh(build_effective_ssh(params, 8))
        k = 2 * np.pi * np.arange(8) / 8
        np.testing.assert_allclose(energies, np.sort(params.E_N + 0.5 * np.cos(k)), atol=1e-12)

    def test_spec_route_matches_closed_form(self):
        """Test that parent bonds reproduce the closed-form chain."""
        spec = LatticeSpec(L=8, delta=0.3, U=8.0, n_flavors=2)
        from_spec = effective_chain_from_spec(spec)
        closed = build_effective_ssh(doublon_params(1.0, 8.0, 0.3), 8)
        np.testing.assert_allclose(from_spec, closed, atol=1e-12)

    def test_open_edge_shift(self):
        """Test that open chains lose the virtual hop across the missing bond."""
        params = doublon_params(1.0, 8.0, 0.5)
        onsite = params.onsite_energies(8, Boundary.open())
        assert onsite[0] == pytest.approx(params.E_N - 2.0 * 2.25 / 8.0)
        assert onsite[3] == pytest.approx(params.E_N)
        with pytest.raises(ValueError):
            build_effective_ssh(params, 7)

    def test_edge_states(self):
        """Test zero modes on the ends of a topological open chain."""
        topological = LatticeSpec(L=20, delta=0.5, boundary=Boundary.open())
        edges = find_edge_states(effective_chain_from_spec(topological))
        assert len(edges.indices) == 2
        assert max(abs(e) for e in edges.energies) < 1e-3
        trivial = topological.replace(delta=-0.5)
        assert find_edge_states(effective_chain_from_spec(trivial)).indices == ()


class TestBandCompare:
    """Test cases for band_compare."""

    def test_doublon_band(self):
        """Test the SU(2) doublon band against its effective chain."""
        spec = LatticeSpec(L=8, delta=0.3, U=8.0, n_flavors=2)
        comparison = band_compare(spec)
        assert comparison.max_abs_error < 0.1
        assert comparison.band_gap > 1.0
        closed = band_compare(spec, doublon_params(1.0, 8.0, 0.3))
        np.testing.assert_allclose(closed.effective_energies, comparison.effective_energies)

    def test_trion_band(self):
        """Test the SU(3) trion band against its effective chain."""
        spec = LatticeSpec(L=6, delta=-0.3, U=8.0, n_flavors=3)
        assert band_compare(spec).max_abs_error < 0.1

    def test_open_chain_reports_bulk_error(self):
        """Test that open chains separate edge and bulk errors."""
        spec = LatticeSpec(L=8, delta=0.3, U=8.0, n_flavors=2, boundary=Boundary.open())
        comparison = band_compare(spec)
        assert comparison.bulk_max_abs_error is not None
        assert comparison.max_abs_error < 0.1

    def test_unresolved_band(self):
        """Test that overlapping bands raise BandIdentificationError."""
        with pytest.raises(BandIdentificationError):
            band_compare(LatticeSpec(L=4, U=0.0, n_flavors=2))

    def test_sweep(self):
        """Test a dimerization sweep of band comparisons."""
        spec = LatticeSpec(L=6, U=8.0, n_flavors=2)
        sweep = band_compare_sweep(spec, [-0.3, 0.0, 0.3])
        assert sweep.per_delta_errors.shape == (3,)
        assert sweep.max_abs_error < 0.1
        np.testing.assert_allclose(sweep.deltas, [-0.3, 0.0, 0.3])

    def test_trion_band_accuracy(self):
        """Test the SU(3) L=10 trion band at U=8 across eleven dimerizations."""
        spec = LatticeSpec(L=10, U=8.0, n_flavors=3)
        sweep = band_compare_sweep(spec, np.linspace(-0.5, 0.5, 11))
        assert sweep.max_abs_error <= 0.02
        weaker = band_compare(spec.replace(delta=0.3)).max_abs_error
        stronger = band_compare(spec.replace(delta=0.3, U=16.0)).max_abs_error
        assert stronger < weaker

    def test_doublon_band_accuracy(self):
        """Test the second-order SU(2) band bound at L=20 and its decay with U."""
        spec = LatticeSpec(L=20, U=8.0, n_flavors=2)
        sweep = band_compare_sweep(spec, np.linspace(-0.5, 0.5, 11))
        assert sweep.max_abs_error < 0.15
        assert sweep.per_delta_errors[5] < sweep.per_delta_errors[0]
        errors = [
            band_compare(spec.replace(delta=0.3, U=U)).max_abs_error for U in (8.0, 16.0)
        ]
        assert errors[1] < 0.5 * errors[0]
