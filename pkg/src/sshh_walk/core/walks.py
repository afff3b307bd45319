"""
Multiparticle quantum walks: injection setups, propagation and polarization series.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .basis import Placement, enumerate_basis, inject_particles
from .dynamics import PropagatorConfig, WalkTrajectory, boundary_time, evolve
from .effective import nion_velocity
from .hamiltonian import build_hamiltonian
from .lattice import FlavorOccupancy, LatticeSpec
from .observables import (
    DEFAULT_NION_FLOOR,
    PolarizationSeries,
    UnitCellConvention,
    cumulative_average,
    density_profile,
    nion_density,
)

logger = logging.getLogger(__name__)

SETUPS = ("A", "B", "C", "D", "E", "nion")
ORIGIN_INJECTION = "injection"
ORIGIN_CENTER = "center"


def default_injection_site(L: int) -> int:
    """Sublattice A of cell L//4."""
    return 2 * (L // 4)


def setup_injections(
    setup: str, n_flavors: int, site: int, sites: Optional[Sequence[int]] = None
) -> Tuple[Placement, ...]:
    """
    Named initial configurations as ``(site, flavor)`` placements.

    A: doublon at ``site`` (SU(2)). B: opposite flavors on adjacent sites
    (SU(2)). C: trion at ``site`` (SU(3)). D: three flavors on three adjacent
    sites (SU(3)). E: doublon at ``site`` plus the third flavor next to it
    (SU(3)). ``nion``: one N-ion on each of ``sites`` (default ``[site]``).
    """
    required = {"A": 2, "B": 2, "C": 3, "D": 3, "E": 3}
    if setup not in SETUPS:
        raise ValueError(f"Unknown injection setup: {setup}")
    if setup in required and n_flavors != required[setup]:
        raise ValueError(f"Setup {setup} needs {required[setup]} flavors, got {n_flavors}")

    if setup == "A":
        return ((site, 0), (site, 1))
    if setup == "B":
        return ((site, 0), (site + 1, 1))
    if setup == "C":
        return tuple((site, a) for a in range(3))
    if setup == "D":
        return ((site - 1, 0), (site, 1), (site + 1, 2))
    if setup == "E":
        return ((site, 0), (site, 1), (site + 1, 2))
    return tuple((s, a) for a in range(n_flavors) for s in (sites or [site]))


def occupancy_of(placements: Sequence[Placement], n_flavors: int) -> FlavorOccupancy:
    counts = Counter(flavor for _, flavor in placements)
    return FlavorOccupancy(tuple(counts.get(a, 0) for a in range(n_flavors)))


@dataclass(frozen=True)
class WalkRecipe:
    placements: Tuple[Placement, ...]
    propagator: PropagatorConfig = field(default_factory=PropagatorConfig)
    origin: Union[str, float] = ORIGIN_INJECTION
    nion_floor: float = DEFAULT_NION_FLOOR
    cap_t_max: bool = False

    def __post_init__(self) -> None:
        if not self.placements:
            raise ValueError("A walk needs at least one injected particle")
        if isinstance(self.origin, str) and self.origin not in (ORIGIN_INJECTION, ORIGIN_CENTER):
            raise ValueError(f"Unknown cell origin: {self.origin}")

    @property
    def injection_site(self) -> int:
        """Site holding the largest cluster of injected particles."""
        counts = Counter(site for site, _ in self.placements)
        return min(counts, key=lambda s: (-counts[s], s))

    @property
    def cluster_size(self) -> int:
        return max(Counter(site for site, _ in self.placements).values())

    def convention(self, L: int) -> UnitCellConvention:
        if self.origin == ORIGIN_INJECTION:
            return UnitCellConvention.centered_on(L, self.injection_site)
        if self.origin == ORIGIN_CENTER:
            return UnitCellConvention(L)
        return UnitCellConvention(L, float(self.origin))

    def front_velocity_estimate(self, spec: LatticeSpec) -> float:
        """Light-cone velocity of the injected cluster."""
        order = self.cluster_size if spec.U != 0 else 1
        return nion_velocity(order, spec.J, spec.U, spec.delta)


@dataclass
class WalkResult:
    trajectory: WalkTrajectory
    convention: UnitCellConvention
    P1: PolarizationSeries
    PN: PolarizationSeries
    nion_number: np.ndarray
    nion_reliable: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times

    def polarization_rows(self) -> List[Dict[str, float]]:
        return [
            {
                "t": float(t),
                "P1": float(self.P1.values[i]),
                "P1c": float(self.P1.cumulative[i]),  # type: ignore[index]
                "PN": float(self.PN.values[i]),
                "PNc": float(self.PN.cumulative[i]),  # type: ignore[index]
                "nN": float(self.nion_number[i]),
            }
            for i, t in enumerate(self.times)
        ]

    def density_rows(self, observable: str = "density") -> List[Dict[str, float]]:
        profiles = self.trajectory.observable(observable)
        return [
            {"t": float(t), "x": int(x), "n": float(profiles[i, x])}
            for i, t in enumerate(self.times)
            for x in range(profiles.shape[1])
        ]


def resolve_t_max(spec: LatticeSpec, recipe: WalkRecipe) -> PropagatorConfig:
    """Propagator with t_max capped at the boundary arrival time when requested."""
    cfg = recipe.propagator
    if not recipe.cap_t_max:
        return cfg
    velocity = recipe.front_velocity_estimate(spec)
    limit = boundary_time(spec, recipe.injection_site, velocity)
    if cfg.t_max == 0 or cfg.t_max > limit:
        logger.info(f"Capping t_max at the boundary arrival time {limit:.3f}")
        return replace(cfg, t_max=limit)
    return cfg


def run_walk(spec: LatticeSpec, recipe: WalkRecipe) -> WalkResult:
    """Inject, propagate and reduce a walk to density and polarization series."""
    occupancy = occupancy_of(recipe.placements, spec.n_flavors)
    basis = enumerate_basis(spec, occupancy)
    H = build_hamiltonian(spec, basis)
    psi0 = inject_particles(basis, recipe.placements)
    cfg = resolve_t_max(spec, recipe)

    trajectory = evolve(
        H, psi0, cfg, observers={"density": density_profile, "nion_density": nion_density}
    )

    conv = recipe.convention(spec.L)
    weights = conv.site_weights()
    density = trajectory.observable("density")
    nion = trajectory.observable("nion_density")
    nN = nion.sum(axis=1)
    reliable = nN > recipe.nion_floor
    with np.errstate(divide="ignore", invalid="ignore"):
        PN_values = np.where(nN > 0, (nion @ weights) / nN, 0.0)
    P1_values = (density @ weights) / basis.n_particles

    if not reliable.all():
        logger.warning(
            f"N-ion weight below {recipe.nion_floor:.0e} in {int((~reliable).sum())} snapshots"
        )

    times = trajectory.times
    if len(times) >= 2:
        P1 = cumulative_average(PolarizationSeries(times, P1_values))
        PN = cumulative_average(PolarizationSeries(times, PN_values))
    else:
        P1 = PolarizationSeries(times, P1_values, P1_values.copy())
        PN = PolarizationSeries(times, PN_values, PN_values.copy())

    return WalkResult(
        trajectory=trajectory,
        convention=conv,
        P1=P1,
        PN=PN,
        nion_number=nN,
        nion_reliable=reliable,
        metadata={
            "dimension": basis.dimension,
            "injection_site": recipe.injection_site,
            "t_max": cfg.t_max,
            "max_norm_drift": trajectory.max_norm_drift,
        },
    )
