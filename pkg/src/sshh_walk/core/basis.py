"""
Fixed-particle-number Fock basis of an SU(N) chain.

Each flavor carries its own sorted list of L-bit occupation patterns (plain
Python ints, so chains longer than 64 sites work). The many-body basis is the
tensor product of the flavor bases with flavor 0 varying slowest, which is the
lexicographic order on the concatenated patterns.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import CapacityError
from .lattice import FlavorOccupancy, LatticeSpec

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION_CAP = 2**27

CREATE = "create"
ANNIHILATE = "annihilate"


def fermion_apply(
    pattern: int, op_kind: str, site: int, n_sites: Optional[int] = None
) -> Optional[Tuple[int, int]]:
    """
    Apply c†_site or c_site to a single-flavor occupation pattern.

    Returns ``(new_pattern, sign)`` with sign (-1)^(occupied sites below
    ``site``), or ``None`` when the move is Pauli-blocked.
    """
    if site < 0 or (n_sites is not None and site >= n_sites):
        raise ValueError(f"Site {site} out of range")
    if op_kind not in (CREATE, ANNIHILATE):
        raise ValueError(f"Unknown operator kind: {op_kind}")

    bit = 1 << site
    occupied = bool(pattern & bit)
    if occupied == (op_kind == CREATE):
        return None

    sign = -1 if bin(pattern & (bit - 1)).count("1") % 2 else 1
    return pattern ^ bit, sign


def _flavor_patterns(L: int, n: int) -> Tuple[Tuple[int, ...], np.ndarray]:
    """Sorted patterns with n of L bits set, plus their (count, L) occupations."""
    patterns = sorted(sum(1 << s for s in combo) for combo in itertools.combinations(range(L), n))
    occupations = np.zeros((len(patterns), L), dtype=np.int8)
    for i, p in enumerate(patterns):
        for s in range(L):
            if p >> s & 1:
                occupations[i, s] = 1
    return tuple(patterns), occupations


class FockBasis:
    """Canonically ordered many-body basis for one particle-number sector."""

    def __init__(self, spec: LatticeSpec, occupancy: FlavorOccupancy):
        occupancy.check(spec)
        self.spec = spec
        self.occupancy = occupancy
        self.L = spec.L

        self.flavor_states: List[Tuple[int, ...]] = []
        self.flavor_occupations: List[np.ndarray] = []
        self._flavor_index: List[Dict[int, int]] = []
        cache: Dict[int, Tuple[Tuple[int, ...], np.ndarray]] = {}
        for n in occupancy.particles_per_flavor:
            if n not in cache:
                cache[n] = _flavor_patterns(spec.L, n)
            patterns, occupations = cache[n]
            self.flavor_states.append(patterns)
            self.flavor_occupations.append(occupations)
            self._flavor_index.append({p: i for i, p in enumerate(patterns)})

        self.shape: Tuple[int, ...] = tuple(len(p) for p in self.flavor_states)
        self.dimension = math.prod(self.shape)

    def __len__(self) -> int:
        return self.dimension

    def __repr__(self) -> str:
        return (
            f"FockBasis(L={self.L}, occupancy={self.occupancy.particles_per_flavor}, "
            f"dimension={self.dimension})"
        )

    @property
    def n_flavors(self) -> int:
        return len(self.shape)

    @property
    def n_particles(self) -> int:
        return self.occupancy.total

    @cached_property
    def ranks(self) -> np.ndarray:
        """(n_flavors, dimension) per-flavor pattern ranks of every basis state."""
        return np.array(np.unravel_index(np.arange(self.dimension), self.shape))

    def state(self, index: int) -> Tuple[int, ...]:
        """Per-flavor patterns of basis state ``index``."""
        if not 0 <= index < self.dimension:
            raise IndexError(f"Basis index {index} out of range")
        ranks = np.unravel_index(index, self.shape)
        return tuple(self.flavor_states[a][int(r)] for a, r in enumerate(ranks))

    @property
    def states(self) -> List[Tuple[int, ...]]:
        return [self.state(i) for i in range(self.dimension)]

    def index_of(self, patterns: Sequence[int]) -> int:
        """Inverse of :meth:`state`; raises KeyError for patterns outside the sector."""
        if len(patterns) != self.n_flavors:
            raise ValueError(f"Expected {self.n_flavors} patterns, got {len(patterns)}")
        ranks = tuple(self._flavor_index[a][p] for a, p in enumerate(patterns))
        return int(np.ravel_multi_index(ranks, self.shape))

    def contains(self, patterns: Sequence[int]) -> bool:
        return len(patterns) == self.n_flavors and all(
            p in index for p, index in zip(patterns, self._flavor_index)
        )

    def flavor_rank(self, flavor: int, pattern: int) -> int:
        return self._flavor_index[flavor][pattern]

    def site_values(self, flavor: int, values: np.ndarray) -> np.ndarray:
        """Σ_x values[x] n_{x,flavor} for every basis state."""
        per_pattern = self.flavor_occupations[flavor] @ np.asarray(values)
        return per_pattern[self.ranks[flavor]]

    @cached_property
    def same_site_pairs(self) -> np.ndarray:
        """Σ_x Σ_{α<β} n_{x,α} n_{x,β} for every basis state."""
        pairs = np.zeros(self.dimension, dtype=np.int64)
        occ = [o.astype(np.int64) for o in self.flavor_occupations]
        for a, b in itertools.combinations(range(self.n_flavors), 2):
            overlap = occ[a] @ occ[b].T
            pairs += overlap[self.ranks[a], self.ranks[b]]
        return pairs

    def manifold_sizes(self) -> np.ndarray:
        """Number of basis states per same-site pair count."""
        return np.bincount(self.same_site_pairs)

    def is_compatible(self, spec: LatticeSpec) -> bool:
        return spec.L == self.L and spec.n_flavors == self.n_flavors


@dataclass
class StateVector:
    """Amplitudes over a :class:`FockBasis`."""

    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.basis.dimension,):
            raise ValueError(
                f"Amplitude vector of shape {self.amplitudes.shape} does not match "
                f"basis dimension {self.basis.dimension}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return abs(self.norm() - 1.0) < tol

    def normalized(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes / self.norm())

    def copy(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes.copy())

    def probabilities(self) -> np.ndarray:
        """|amplitude|² reshaped to the per-flavor basis shape."""
        return (np.abs(self.amplitudes) ** 2).reshape(self.basis.shape)

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def enumerate_basis(
    spec: LatticeSpec,
    occupancy: FlavorOccupancy,
    cap: int = DEFAULT_DIMENSION_CAP,
) -> FockBasis:
    """Enumerate the sector ``occupancy`` of ``spec``, refusing sectors above ``cap``."""
    occupancy.check(spec)
    dimension = occupancy.dimension(spec.L)
    if dimension > cap:
        raise CapacityError(
            f"Sector {occupancy.particles_per_flavor} on L={spec.L} has {dimension} "
            f"states, above the cap of {cap}",
            dimension=dimension,
            cap=cap,
        )
    basis = FockBasis(spec, occupancy)
    logger.debug(f"Enumerated {basis!r}")
    return basis


Placement = Tuple[int, int]


def inject_particles(basis: FockBasis, placements: Sequence[Placement]) -> StateVector:
    """
    Localized product state from ``(site, flavor)`` placements.

    Creation operators are ordered flavor-major with ascending sites left to
    right, so the single nonzero amplitude is +1.
    """
    patterns = [0] * basis.n_flavors
    for site, flavor in placements:
        if not 0 <= flavor < basis.n_flavors:
            raise ValueError(f"Flavor {flavor} outside 0..{basis.n_flavors - 1}")
        if not 0 <= site < basis.L:
            raise ValueError(f"Site {site} outside 0..{basis.L - 1}")
        if patterns[flavor] >> site & 1:
            raise ValueError(f"Site {site} already holds a flavor-{flavor} particle")
        patterns[flavor] |= 1 << site

    counts = tuple(bin(p).count("1") for p in patterns)
    if counts != basis.occupancy.particles_per_flavor:
        raise ValueError(
            f"Placements fill {counts}, basis sector is {basis.occupancy.particles_per_flavor}"
        )

    amplitudes = np.zeros(basis.dimension, dtype=np.complex128)
    amplitudes[basis.index_of(patterns)] = 1.0
    return StateVector(basis, amplitudes)


def inject_nion(basis: FockBasis, site: Union[int, Sequence[int]]) -> StateVector:
    """Place an N-ion (all flavors) on ``site``, or one N-ion on each listed site."""
    sites = [site] if isinstance(site, (int, np.integer)) else list(site)
    placements = [(int(s), a) for a in range(basis.n_flavors) for s in sites]
    return inject_particles(basis, placements)
