"""
Densities, chiral polarizations and light-cone extraction.

Unit cells pair internal sites (2m, 2m+1) as sublattices (A, B). The chiral
displacement weight of site x is c(x)σ(x) with σ = +1 on A and -1 on B.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid

from .basis import FockBasis, StateVector
from .dynamics import WalkTrajectory
from .exceptions import NoFrontError
from .hamiltonian import SparseOperator

logger = logging.getLogger(__name__)

DEFAULT_NION_FLOOR = 1e-6
DEFAULT_K_GRID = 1024

# Fractions of the current peak. Coincident unbound particles put a
# background under N-ion profiles.
FRONT_THRESHOLDS = {"density": 1e-3, "nion_density": 1e-2}


@dataclass(frozen=True)
class UnitCellConvention:
    """
    Cell bookkeeping for polarization sums.

    ``origin`` is the cell index mapped to coordinate 0. The default (L-2)/4
    puts the inversion center of the chain at the origin; :meth:`centered_on`
    anchors the origin on the cell of an injection site instead.
    """

    L: int
    origin: Optional[float] = None

    def __post_init__(self) -> None:
        if self.L < 2 or self.L % 2:
            raise ValueError(f"L must be even and >= 2, got {self.L}")
        if self.origin is None:
            object.__setattr__(self, "origin", (self.L - 2) / 4.0)

    @classmethod
    def centered_on(cls, L: int, site: int) -> "UnitCellConvention":
        return cls(L, float(site // 2))

    @property
    def n_cells(self) -> int:
        return self.L // 2

    def cell_of_site(self, x: int) -> Tuple[int, str]:
        return x // 2, "A" if x % 2 == 0 else "B"

    def cell_coordinate(self, m: int) -> float:
        return m - float(self.origin)  # type: ignore[arg-type]

    def site_weights(self) -> np.ndarray:
        """c(x)σ(x) for every site."""
        sites = np.arange(self.L)
        coordinates = sites // 2 - float(self.origin)  # type: ignore[arg-type]
        sublattice = np.where(sites % 2 == 0, 1.0, -1.0)
        return coordinates * sublattice


@dataclass(frozen=True)
class PolarizationSeries:
    times: np.ndarray
    values: np.ndarray
    cumulative: Optional[np.ndarray] = None

    @property
    def final(self) -> float:
        """Cumulative value at the last recorded time."""
        if self.cumulative is None:
            raise ValueError("Cumulative average not computed")
        return float(self.cumulative[-1])


@dataclass(frozen=True)
class NIonPolarization:
    value: float
    nion_weight: float
    reliable: bool


def _probabilities(psi: StateVector) -> np.ndarray:
    return psi.probabilities()


def _marginal(probabilities: np.ndarray, flavor: int) -> np.ndarray:
    axes = tuple(a for a in range(probabilities.ndim) if a != flavor)
    return probabilities.sum(axis=axes) if axes else probabilities


def flavor_density_profile(psi: StateVector) -> np.ndarray:
    """(n_flavors, L) array of ⟨n_{x,α}⟩."""
    p = _probabilities(psi)
    basis = psi.basis
    return np.array(
        [_marginal(p, a) @ basis.flavor_occupations[a] for a in range(basis.n_flavors)]
    )


def density_profile(psi: StateVector) -> np.ndarray:
    """Total density ⟨n(x)⟩ summed over flavors."""
    return flavor_density_profile(psi).sum(axis=0)


def nion_density(psi: StateVector) -> np.ndarray:
    """⟨Π_α n_{x,α}⟩ per site: the density of complete N-ions."""
    p = _probabilities(psi)
    basis = psi.basis
    n = basis.n_flavors
    operands: list = [p, list(range(n))]
    for a in range(n):
        operands += [basis.flavor_occupations[a].astype(np.float64), [a, n]]
    return np.einsum(*operands, [n], optimize=True)


def nion_number(psi: StateVector) -> float:
    """Expected number of N-ions Σ_x ⟨Π_α n_{x,α}⟩."""
    return float(nion_density(psi).sum())


def chiral_polarization_1(psi: StateVector, conv: UnitCellConvention) -> float:
    """Chiral displacement per particle from the density profile."""
    return float(conv.site_weights() @ density_profile(psi)) / psi.basis.n_particles


def chiral_displacement_operator(basis: FockBasis, conv: UnitCellConvention) -> SparseOperator:
    """Diagonal operator Σ_{x,α} c(x)σ(x) n_{x,α} / N_particles."""
    weights = conv.site_weights()
    diagonal = sum(basis.site_values(a, weights) for a in range(basis.n_flavors))
    return SparseOperator(basis, sp.diags(diagonal / basis.n_particles), hermitian=True)


def chiral_polarization_N(
    psi: StateVector,
    conv: UnitCellConvention,
    floor: float = DEFAULT_NION_FLOOR,
) -> NIonPolarization:
    """Chiral displacement of the N-ion density normalized by the N-ion number."""
    profile = nion_density(psi)
    weight = float(profile.sum())
    numerator = float(conv.site_weights() @ profile)
    reliable = weight > floor
    if not reliable:
        logger.debug(f"N-ion weight {weight:.2e} below floor {floor:.0e}")
    value = numerator / weight if weight > 0 else 0.0
    return NIonPolarization(value, weight, reliable)


def cumulative_average(series: PolarizationSeries) -> PolarizationSeries:
    """Running mean (1/t)∫₀ᵗ P dt' by the trapezoidal rule; the t=0 entry is P(0)."""
    times = np.asarray(series.times, dtype=np.float64)
    values = np.asarray(series.values, dtype=np.float64)
    if len(times) < 2:
        raise ValueError("Cumulative average needs at least two samples")
    integral = cumulative_trapezoid(values, times, initial=0.0)
    cumulative = np.empty_like(values)
    cumulative[0] = values[0]
    cumulative[1:] = integral[1:] / times[1:]
    return replace(series, times=times, values=values, cumulative=cumulative)


def _bloch_quantities(delta: float, J: float, k_grid: int) -> Tuple[np.ndarray, np.ndarray]:
    if not abs(delta) < 1:
        raise ValueError(f"|delta| must be < 1, got {delta}")
    if k_grid < 64:
        raise ValueError(f"k_grid must be >= 64, got {k_grid}")
    k = 2.0 * np.pi * (np.arange(k_grid) + 0.5) / k_grid - np.pi
    intra = J * (1.0 - delta)
    inter = J * (1.0 + delta)
    energy_sq = intra**2 + inter**2 + 2.0 * intra * inter * np.cos(k)
    winding_density = (intra * inter * np.cos(k) + inter**2) / energy_sq
    return np.sqrt(energy_sq), winding_density


def winding_number(delta: float, J: float = 1.0, k_grid: int = DEFAULT_K_GRID) -> int:
    """Winding of the SSH Bloch vector; the Zak phase is π times this value."""
    if delta == 0:
        raise ValueError("Winding number is undefined at the gapless point delta=0")
    _, density = _bloch_quantities(delta, J, k_grid)
    return int(round(float(density.mean())))


def zak_phase(delta: float, J: float = 1.0) -> float:
    return math.pi * winding_number(delta, J)


def analytic_P1(
    delta: float,
    J: float,
    t: Union[float, np.ndarray],
    k_grid: int = DEFAULT_K_GRID,
) -> Union[float, np.ndarray]:
    """
    Noninteracting chiral polarization of a walker started on an A site.

    P₁(t) = ν/2 − ∫dk/4π cos(2E_k t) w(k), with w the winding density.
    """
    energy, density = _bloch_quantities(delta, J, k_grid)
    nu = winding_number(delta, J, k_grid)
    times = np.atleast_1d(np.asarray(t, dtype=np.float64))
    oscillation = np.cos(2.0 * np.outer(times, energy)) @ density / k_grid
    result = nu / 2.0 - 0.5 * oscillation
    return float(result[0]) if np.ndim(t) == 0 else result


def front_velocity(
    traj: WalkTrajectory,
    threshold: Optional[float] = None,
    observable: str = "density",
    discard: float = 0.2,
    t_limit: Optional[float] = None,
) -> float:
    """
    Light-cone velocity in sites per unit time.

    The front is the furthest site, measured from the initial density peak,
    where the profile exceeds ``threshold`` times its current maximum. The
    default threshold depends on ``observable`` (:data:`FRONT_THRESHOLDS`).
    Only snapshots taken before the front reaches the nearer chain end, and
    before ``t_limit`` when given, enter the fit; the first ``discard``
    fraction of those is dropped as transient.
    """
    if threshold is None:
        threshold = FRONT_THRESHOLDS.get(observable, FRONT_THRESHOLDS["density"])
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    profiles = np.asarray(traj.observable(observable))
    times = np.asarray(traj.times)
    if len(times) < 10:
        raise ValueError(f"Front extraction needs >= 10 snapshots, got {len(times)}")

    origin = int(np.argmax(profiles[0]))
    sites = np.arange(profiles.shape[1])
    edge = min(origin, profiles.shape[1] - 1 - origin)
    distances = np.zeros(len(times))
    for i, profile in enumerate(profiles):
        peak = profile.max()
        if peak <= 0:
            continue
        above = sites[profile > threshold * peak]
        distances[i] = np.abs(above - origin).max() if above.size else 0.0

    if not np.any(distances > 0):
        raise NoFrontError(f"No site ever exceeded {threshold} of the peak {observable}")

    # the window closes at the first snapshot whose front touches the chain end
    reached = np.flatnonzero(distances >= edge)
    stop = int(reached[0]) if reached.size else len(times)
    if t_limit is not None:
        stop = min(stop, int(np.searchsorted(times, t_limit, side="right")))
    start = int(math.floor(discard * stop))
    if stop - start < 3:
        raise NoFrontError(
            f"Only {stop - start} snapshots before the front reaches the chain end"
        )
    slope = np.polyfit(times[start:stop], distances[start:stop], 1)[0]
    logger.debug(f"Front velocity from {stop - start} samples: {slope:.4f}")
    return float(slope)
