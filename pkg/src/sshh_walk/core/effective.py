"""
Effective single-particle chains for bound N-ions at strong coupling.

An N-ion hops as a whole at N-th order in J/U and picks up a second-order
on-site shift from virtual single-particle hops. Both enter a dimerized
tight-binding chain of the same geometry as the parent lattice.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .basis import enumerate_basis
from .exceptions import BandIdentificationError
from .hamiltonian import DENSE_DIMENSION_CAP, build_hamiltonian
from .lattice import Boundary, FlavorOccupancy, LatticeSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EffectiveParams:
    """
    Closed-form parameters of the N-ion chain.

    ``hopping`` holds the (intra-cell, inter-cell) amplitudes J_N(1 ∓ δ_N).
    """

    N: int
    J: float
    U: float
    delta: float
    E_N: float
    J_N: float
    delta_N: float
    hopping: Tuple[float, float]
    onsite_profile: Optional[Tuple[float, ...]] = None

    @property
    def max_velocity(self) -> float:
        """Largest group velocity in sites per unit time, 2 min(t_intra, t_inter)."""
        return 2.0 * min(abs(self.hopping[0]), abs(self.hopping[1]))

    def bond_amplitude(self, x: int) -> float:
        return self.hopping[x % 2]

    def onsite_energies(self, L: int, boundary: Boundary) -> np.ndarray:
        """On-site energies; open chains lose the virtual hop across the missing bond."""
        if self.onsite_profile is not None:
            if len(self.onsite_profile) != L:
                raise ValueError(
                    f"onsite_profile has length {len(self.onsite_profile)}, expected {L}"
                )
            return np.array(self.onsite_profile, dtype=np.float64)
        energies = np.full(L, self.E_N, dtype=np.float64)
        if boundary.is_open and self.N > 1:
            parent_edge = self.J * (1.0 + self.delta)
            correction = self.N / ((self.N - 1) * self.U) * parent_edge**2
            energies[0] -= correction
            energies[-1] -= correction
        return energies


def _split_hopping(
    prefactor: float, J: float, delta: float, N: int
) -> Tuple[float, float, float, float]:
    intra = prefactor * (J * (1.0 - delta)) ** N
    inter = prefactor * (J * (1.0 + delta)) ** N
    J_N = (intra + inter) / 2.0
    delta_N = (inter - intra) / (inter + intra)
    return intra, inter, J_N, delta_N


def nion_params(N: int, J: float, U: float, delta: float) -> EffectiveParams:
    """
    N-ion chain: on-site UN(N−1)/2 + 2N/(N−1) J²(1+δ²)/U and hopping
    N J^N (1±δ)^N / ((N−1)! U^{N−1}).
    """
    if N < 2:
        raise ValueError(f"N-ion chains need N >= 2, got {N}")
    if U == 0:
        raise ZeroDivisionError("Effective N-ion chains are undefined at U=0")
    prefactor = N / (math.factorial(N - 1) * U ** (N - 1))
    intra, inter, J_N, delta_N = _split_hopping(prefactor, J, delta, N)
    E_N = U * N * (N - 1) / 2.0 + 2.0 * N / (N - 1) * J**2 * (1.0 + delta**2) / U
    return EffectiveParams(N, J, U, delta, E_N, J_N, delta_N, (intra, inter))


def doublon_params(J: float, U: float, delta: float) -> EffectiveParams:
    """E₂ = U + 4J²(1+δ²)/U, J₂ = (2J²/U)(1+δ²), δ₂ = 2δ/(1+δ²)."""
    return nion_params(2, J, U, delta)


def trion_params(J: float, U: float, delta: float) -> EffectiveParams:
    """E₃ = 3U + 3J²(1+δ²)/U, J₃ = 3J³(1+3δ²)/2U², δ₃ = (3+δ²)δ/(1+3δ²)."""
    return nion_params(3, J, U, delta)


def nion_velocity(N: int, J: float, U: float, delta: float) -> float:
    """Maximal light-cone velocity of a single particle (N=1) or of a bound N-ion."""
    damped = J * (1.0 - abs(delta))
    if N == 1:
        return 2.0 * damped
    if U == 0:
        raise ZeroDivisionError("N-ion velocity is undefined at U=0")
    return 2.0 * N * damped**N / (math.factorial(N - 1) * abs(U) ** (N - 1))


def max_group_velocity(
    params: EffectiveParams, L: Optional[int] = None, n_k: int = 4096
) -> float:
    """
    Largest |dE/dk| of the two Bloch bands, converted to sites per unit time.

    With ``L`` the momenta are those allowed on a periodic chain of L sites.
    """
    intra, inter = params.hopping
    if L is not None:
        k = 2.0 * np.pi * np.arange(L // 2) / (L // 2)
    else:
        k = np.linspace(-np.pi, np.pi, n_k)
    energy = np.sqrt(intra**2 + inter**2 + 2.0 * intra * inter * np.cos(k))
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(
            energy > 0,
            intra * inter * np.abs(np.sin(k)) / energy,
            min(abs(intra), abs(inter)),
        )
    return float(2.0 * slope.max())


def _twist_phase(boundary: Boundary, n_flavors: int) -> complex:
    if boundary.kind != "twisted":
        return 1.0
    twisted = n_flavors if boundary.flavor_mask is None else len(boundary.flavor_mask)
    return complex(np.exp(1j * twisted * boundary.theta))


def _chain_matrix(
    onsite: np.ndarray, amplitudes: Sequence[float], boundary: Boundary, n_flavors: int
) -> np.ndarray:
    L = len(onsite)
    phase = _twist_phase(boundary, n_flavors)
    dtype = np.complex128 if phase != 1.0 else np.float64
    matrix = np.diag(onsite).astype(dtype)
    last = L - 1 if boundary.is_open else L
    for x in range(last):
        y = (x + 1) % L
        amplitude = amplitudes[x] * (phase if x == L - 1 else 1.0)
        matrix[y, x] += amplitude
        matrix[x, y] += np.conj(amplitude)
    return matrix


def build_effective_ssh(
    params: EffectiveParams, L: int, boundary: Optional[Boundary] = None
) -> np.ndarray:
    """Dense L×L single-particle Hamiltonian of the effective N-ion chain."""
    if L < 2 or L % 2:
        raise ValueError(f"L must be even and >= 2, got {L}")
    boundary = boundary or Boundary.periodic()
    onsite = params.onsite_energies(L, boundary)
    amplitudes = [params.bond_amplitude(x) for x in range(L)]
    return _chain_matrix(onsite, amplitudes, boundary, params.N)


def effective_chain_from_spec(spec: LatticeSpec, N: Optional[int] = None) -> np.ndarray:
    """
    Effective chain built from the parent bonds, including disorder and −Nμ.

    On-site: UN(N−1)/2 + N/((N−1)U) Σ_adjacent t_b² + Nδμ_x − Nμ.
    Hopping: N t_b^N / ((N−1)! U^{N−1}). For N=1 this is the parent chain.
    """
    N = spec.n_flavors if N is None else N
    amplitudes = spec.bond_amplitudes()
    onsite = N * (np.asarray(spec.onsite_disorder) - spec.mu)
    if N == 1:
        hopping = amplitudes
    else:
        if spec.U == 0:
            raise ZeroDivisionError("Effective N-ion chains are undefined at U=0")
        squares = amplitudes**2
        adjacent = squares + np.roll(squares, 1)
        onsite = onsite + spec.U * N * (N - 1) / 2.0 + N / ((N - 1) * spec.U) * adjacent
        hopping = N * amplitudes**N / (math.factorial(N - 1) * spec.U ** (N - 1))
    return _chain_matrix(onsite, list(hopping), spec.boundary, N)


@dataclass(frozen=True)
class EdgeStates:
    indices: Tuple[int, ...]
    energies: Tuple[float, ...]
    edge_weight: np.ndarray
    ipr: np.ndarray


def find_edge_states(
    matrix: np.ndarray, edge_sites: Optional[int] = None, weight_threshold: float = 0.5
) -> EdgeStates:
    """
    Eigenstates of a single-particle chain concentrated on its ends.

    A state counts as an edge state when at least ``weight_threshold`` of its
    weight sits on the outermost ``edge_sites`` sites of either end.
    """
    L = matrix.shape[0]
    edge_sites = edge_sites or max(2, L // 8)
    energies, vectors = np.linalg.eigh(matrix)
    density = np.abs(vectors) ** 2
    edge_weight = density[:edge_sites].sum(axis=0) + density[L - edge_sites :].sum(axis=0)
    ipr = (density**2).sum(axis=0)
    indices = tuple(int(i) for i in np.flatnonzero(edge_weight >= weight_threshold))
    return EdgeStates(indices, tuple(float(energies[i]) for i in indices), edge_weight, ipr)


@dataclass
class BandComparison:
    max_abs_error: float
    errors: np.ndarray
    full_energies: np.ndarray
    effective_energies: np.ndarray
    band_gap: float
    edge_state_energies: Tuple[float, ...] = ()
    bulk_max_abs_error: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


def _top_band(spec: LatticeSpec, dense_cap: int) -> Tuple[np.ndarray, float]:
    L = spec.L
    occupancy = FlavorOccupancy.one_per_flavor(spec.n_flavors)
    basis = enumerate_basis(spec, occupancy)
    energies = build_hamiltonian(spec, basis).eigvalsh(dense_cap)
    band = energies[-L:]
    if len(energies) == L:
        return band, math.inf
    gap = float(band[0] - energies[-L - 1])
    spacing = float(band[-1] - band[0]) / max(L - 1, 1)
    if gap <= max(spacing, 1e-8):
        raise BandIdentificationError(
            f"Top {L} states are not separated from the rest (gap {gap:.3e}, "
            f"mean level spacing {spacing:.3e}); U={spec.U} is too small"
        )
    return band, gap


def band_compare(
    spec: LatticeSpec,
    params: Optional[EffectiveParams] = None,
    dense_cap: int = DENSE_DIMENSION_CAP,
) -> BandComparison:
    """
    Compare the top L many-body levels with the effective N-ion chain.

    Without ``params`` the chain is built from the parent bonds, which carries
    disorder and open-boundary edge shifts.
    """
    full, gap = _top_band(spec, dense_cap)
    if params is None:
        matrix = effective_chain_from_spec(spec)
    else:
        matrix = build_effective_ssh(params, spec.L, spec.boundary)
    effective = np.linalg.eigvalsh(matrix)
    errors = np.abs(full - effective)

    edge_energies: Tuple[float, ...] = ()
    bulk_error = None
    if spec.boundary.is_open:
        edges = find_edge_states(matrix)
        edge_energies = edges.energies
        bulk = np.setdiff1d(np.arange(spec.L), edges.indices)
        bulk_error = float(errors[bulk].max()) if bulk.size else 0.0

    comparison = BandComparison(
        max_abs_error=float(errors.max()),
        errors=errors,
        full_energies=full,
        effective_energies=effective,
        band_gap=gap,
        edge_state_energies=edge_energies,
        bulk_max_abs_error=bulk_error,
        metadata={"delta": spec.delta, "U": spec.U, "N": spec.n_flavors},
    )
    logger.debug(
        f"Band comparison delta={spec.delta}, U={spec.U}: max error {comparison.max_abs_error:.3e}"
    )
    return comparison


@dataclass
class BandSweep:
    deltas: np.ndarray
    comparisons: List[BandComparison]

    @property
    def per_delta_errors(self) -> np.ndarray:
        return np.array([c.max_abs_error for c in self.comparisons])

    @property
    def max_abs_error(self) -> float:
        return float(self.per_delta_errors.max())


def band_compare_sweep(
    spec: LatticeSpec,
    deltas: Sequence[float],
    params_fn: Optional[Callable[[float], EffectiveParams]] = None,
    n_jobs: int = 1,
) -> BandSweep:
    """:func:`band_compare` across a dimerization sweep."""
    comparisons = Parallel(n_jobs=n_jobs)(
        delayed(band_compare)(
            spec.replace(delta=float(d)), None if params_fn is None else params_fn(float(d))
        )
        for d in deltas
    )
    sweep = BandSweep(np.asarray(deltas, dtype=np.float64), list(comparisons))
    logger.info(
        f"Band comparison over {len(deltas)} dimerizations: "
        f"max error {sweep.max_abs_error:.3e}"
    )
    return sweep
