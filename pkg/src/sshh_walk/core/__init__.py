"""Simulation core: lattices, Fock bases, Hamiltonians, dynamics and topology."""

from .basis import FockBasis, StateVector, enumerate_basis, inject_nion, inject_particles
from .berry import BerryPhaseResult, SubsetSelector, TwistGrid, berry_phase
from .dynamics import PropagatorConfig, WalkTrajectory, evolve, propagate
from .effective import band_compare, nion_params
from .ensemble import DisorderConfig, run_sweep
from .exceptions import (
    BandIdentificationError,
    CapacityError,
    GapClosureError,
    NoFrontError,
    NumericError,
    RecipeError,
    SSHHError,
)
from .hamiltonian import SparseOperator, build_hamiltonian
from .lattice import Boundary, FlavorOccupancy, LatticeSpec
from .walks import WalkRecipe, run_walk

__all__ = [
    "BandIdentificationError",
    "BerryPhaseResult",
    "Boundary",
    "CapacityError",
    "DisorderConfig",
    "FlavorOccupancy",
    "FockBasis",
    "GapClosureError",
    "LatticeSpec",
    "NoFrontError",
    "NumericError",
    "PropagatorConfig",
    "RecipeError",
    "SSHHError",
    "SparseOperator",
    "StateVector",
    "SubsetSelector",
    "TwistGrid",
    "WalkRecipe",
    "WalkTrajectory",
    "band_compare",
    "berry_phase",
    "build_hamiltonian",
    "enumerate_basis",
    "evolve",
    "inject_nion",
    "inject_particles",
    "nion_params",
    "propagate",
    "run_sweep",
    "run_walk",
]
