"""
Many-body Berry phases from twisted boundary conditions.

For twist angles θ_n = 2πn/M the selected eigenstates of H(θ_n) are chained
through the overlap matrices

    S^{(n,n+1)} = ⟨Ψ^{(n)}| exp(2πi X / (M L)) |Ψ^{(n+1)}⟩,

with X = Σ x̃ n_{x,α} over the twisted flavors and x̃ = x − L/2 + 1/2, and the
phase is γ = −Σ_n arg det S^{(n,n+1)} reduced to (−π, π].
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linear_sum_assignment

from .basis import FockBasis
from .exceptions import GapClosureError
from .hamiltonian import DENSE_DIMENSION_CAP, build_hamiltonian
from .lattice import LatticeSpec

logger = logging.getLogger(__name__)

DEFAULT_GAP_FLOOR = 1e-8
TRUST_FACTOR = 10.0
OFF_DIAGONAL_TOL = 1e-2
GAP_POLICIES = ("raise", "flag")

INDEX_RANGE = "index_range"
BAND_TAG = "band_tag"
BAND_TAGS = (
    "lower_trion",
    "full_trion",
    "all_below_gap",
    "scattering_only",
    "doublon_band",
    "custom",
)


def wrap_phase(phase: float) -> float:
    """Reduce an angle to (−π, π]."""
    return float(math.pi - ((math.pi - phase) % (2.0 * math.pi)))


def phase_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle."""
    return abs(wrap_phase(a - b))


def quantization_distance(gamma: float) -> float:
    """Distance of ``gamma`` to the nearer of {0, π}."""
    return min(phase_distance(gamma, 0.0), phase_distance(gamma, math.pi))


@dataclass(frozen=True)
class TwistGrid:
    M: int
    flavor_mask: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError(f"Twist grid needs M >= 1, got {self.M}")
        if self.flavor_mask is not None:
            object.__setattr__(self, "flavor_mask", tuple(sorted(set(self.flavor_mask))))

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.M) / self.M

    def for_flavor(self, flavor: int) -> "TwistGrid":
        return TwistGrid(self.M, (flavor,))


@dataclass(frozen=True)
class SubsetSelector:
    """
    Contiguous block of energy-sorted eigenstates.

    Band tags resolve against the interaction manifolds of the basis: states
    with k same-site pairs form a block near energy kU. ``stop_shift`` moves
    the upper edge of the resolved block to add or drop states.
    """

    mode: str = BAND_TAG
    start: Optional[int] = None
    stop: Optional[int] = None
    band_tag: Optional[str] = "lower_trion"
    stop_shift: int = 0

    def __post_init__(self) -> None:
        if self.mode not in (INDEX_RANGE, BAND_TAG):
            raise ValueError(f"Unknown selector mode: {self.mode}")
        if self.mode == BAND_TAG and self.band_tag not in BAND_TAGS:
            raise ValueError(f"Unknown band tag: {self.band_tag}")
        explicit = self.mode == INDEX_RANGE or self.band_tag == "custom"
        if explicit:
            if self.start is None or self.stop is None:
                raise ValueError("Index-range selectors need start and stop")
            if not 0 <= self.start < self.stop:
                raise ValueError(f"Invalid index range [{self.start}, {self.stop})")

    @classmethod
    def index_range(cls, start: int, stop: int) -> "SubsetSelector":
        return cls(INDEX_RANGE, start, stop, None)

    @classmethod
    def band(cls, tag: str, stop_shift: int = 0) -> "SubsetSelector":
        return cls(BAND_TAG, None, None, tag, stop_shift)

    def shifted(self, stop_shift: int) -> "SubsetSelector":
        return SubsetSelector(self.mode, self.start, self.stop, self.band_tag, stop_shift)

    def describe(self) -> str:
        if self.mode == INDEX_RANGE or self.band_tag == "custom":
            label = f"[{self.start},{self.stop})"
        else:
            label = str(self.band_tag)
        return f"{label}{self.stop_shift:+d}" if self.stop_shift else label

    def resolve(self, basis: FockBasis) -> Tuple[int, int]:
        """Half-open index range [a, b) in the energy-sorted spectrum."""
        D = basis.dimension
        if self.mode == INDEX_RANGE or self.band_tag == "custom":
            a, b = int(self.start), int(self.stop)  # type: ignore[arg-type]
        else:
            sizes = basis.manifold_sizes()
            top = int(sizes[-1])
            edges = np.concatenate([[0], np.cumsum(sizes)])
            tag = self.band_tag
            if tag == "lower_trion":
                a, b = D - top, D - top // 2
            elif tag == "full_trion":
                a, b = D - top, D
            elif tag == "all_below_gap":
                a, b = 0, D - top // 2
            elif tag == "scattering_only":
                a, b = 0, D - top
            else:
                if len(sizes) < 2 or sizes[1] == 0:
                    raise ValueError("Sector has no single-pair (doublon) manifold")
                a, b = int(edges[1]), int(edges[2])
        b += self.stop_shift
        if not 0 <= a < b <= D:
            raise ValueError(f"Selector {self.describe()} resolves to [{a}, {b}) outside 0..{D}")
        return a, b


@dataclass
class BerryPhaseResult:
    gamma_B: float
    per_step_phases: np.ndarray
    min_gap: float
    subset_size: int
    subset: Tuple[int, int]
    M: int
    gaps: np.ndarray
    trusted: bool
    flavor_mask: Optional[Tuple[int, ...]] = None
    per_state_phases: Optional[np.ndarray] = None
    max_off_diagonal: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def quantization_distance(self) -> float:
        return quantization_distance(self.gamma_B)

    def to_row(self) -> Dict[str, Any]:
        return {
            "gamma_B": self.gamma_B,
            "min_gap": self.min_gap,
            "M": self.M,
            "subset_start": self.subset[0],
            "subset_stop": self.subset[1],
            "subset_size": self.subset_size,
            "trusted": int(self.trusted),
        }


def position_phase(
    basis: FockBasis, M: int, flavor_mask: Optional[Sequence[int]] = None
) -> np.ndarray:
    """Diagonal of exp(2πi X / (M L)) on ``basis``."""
    L = basis.L
    coordinates = np.arange(L) - L / 2.0 + 0.5
    flavors = range(basis.n_flavors) if flavor_mask is None else flavor_mask
    X = np.zeros(basis.dimension)
    for a in flavors:
        X += basis.site_values(a, coordinates)
    return np.exp(2j * np.pi * X / (M * L))


def overlap_phases(
    frames: Sequence[np.ndarray], phase: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Phases accumulated around a closed loop of twist angles.

    ``frames[n]`` holds the selected eigenvectors at θ_n as columns. Returns the
    per-step determinant phases, one Wilson-loop phase per selected state and
    the largest off-diagonal overlap magnitude.

    Each overlap is made unitary through its SVD before the loop product, so
    the eigenphases of the Wilson loop sum to the determinant phase on any
    grid. The eigenphases are matched to the columns of ``frames[0]`` by
    largest total weight; without mixing they reduce to the per-state
    products −Σ_n arg S_jj.
    """
    M = len(frames)
    k = frames[0].shape[1]
    steps = np.zeros(M)
    wilson = np.eye(k, dtype=np.complex128)
    off_diagonal = 0.0
    for n in range(M):
        bra = frames[n]
        ket = frames[(n + 1) % M]
        overlap = bra.conj().T @ (phase[:, None] * ket)
        sign, _ = np.linalg.slogdet(overlap)
        steps[n] = -np.angle(sign)
        left, _, right = np.linalg.svd(overlap)
        wilson = wilson @ (left @ right)
        if k > 1:
            off = np.abs(overlap - np.diag(np.diag(overlap)))
            off_diagonal = max(off_diagonal, float(off.max()))

    evals, evecs = np.linalg.eig(wilson)
    rows, cols = linear_sum_assignment(-np.abs(evecs) ** 2)
    per_state = np.zeros(k)
    per_state[rows] = -np.angle(evals[cols])
    return steps, per_state, off_diagonal


def _diagonalize_twist(
    spec: LatticeSpec,
    basis: FockBasis,
    theta: float,
    flavor_mask: Optional[Tuple[int, ...]],
    subset: Tuple[int, int],
    dense_cap: int,
) -> Tuple[np.ndarray, float]:
    H = build_hamiltonian(spec.with_twist(theta, flavor_mask), basis)
    energies, vectors = H.eigh(dense_cap)
    a, b = subset
    below = energies[a] - energies[a - 1] if a > 0 else math.inf
    above = energies[b] - energies[b - 1] if b < len(energies) else math.inf
    return vectors[:, a:b], float(min(below, above))


def berry_phase(
    spec: LatticeSpec,
    basis: FockBasis,
    grid: TwistGrid,
    sel: SubsetSelector,
    gap_floor: float = DEFAULT_GAP_FLOOR,
    gap_policy: str = "raise",
    n_jobs: int = 1,
    dense_cap: int = DENSE_DIMENSION_CAP,
) -> BerryPhaseResult:
    """Determinant-chain Berry phase of the selected eigenstates over ``grid``."""
    if spec.boundary.is_open:
        raise ValueError("Berry phases need a closed chain")
    if gap_policy not in GAP_POLICIES:
        raise ValueError(f"Unknown gap policy: {gap_policy}")
    if not basis.is_compatible(spec):
        raise ValueError("Basis does not match the lattice spec")
    mask = grid.flavor_mask
    if mask is not None and any(not 0 <= a < spec.n_flavors for a in mask):
        raise ValueError(f"Twist mask {mask} outside flavors 0..{spec.n_flavors - 1}")

    subset = sel.resolve(basis)
    angles = grid.angles
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_diagonalize_twist)(spec, basis, float(theta), mask, subset, dense_cap)
        for theta in angles
    )
    frames = [frame for frame, _ in outcomes]
    gaps = np.array([gap for _, gap in outcomes])

    for theta, gap in zip(angles, gaps):
        if gap < gap_floor:
            message = (
                f"Subset {sel.describe()} touches its complement "
                f"at theta={theta:.4f} (gap {gap:.2e})"
            )
            if gap_policy == "raise":
                raise GapClosureError(message, theta=float(theta), gap=float(gap))
            logger.warning(message)

    steps, per_state, off_diagonal = overlap_phases(frames, position_phase(basis, grid.M, mask))
    min_gap = float(gaps.min())
    result = BerryPhaseResult(
        gamma_B=wrap_phase(float(steps.sum())),
        per_step_phases=steps,
        min_gap=min_gap,
        subset_size=subset[1] - subset[0],
        subset=subset,
        M=grid.M,
        gaps=gaps,
        trusted=min_gap >= TRUST_FACTOR * gap_floor,
        flavor_mask=mask,
        per_state_phases=np.array([wrap_phase(p) for p in per_state]),
        max_off_diagonal=off_diagonal,
        metadata={"delta": spec.delta, "U": spec.U, "selector": sel.describe()},
    )
    if not result.trusted:
        logger.warning(f"Untrusted Berry phase: min gap {min_gap:.2e}")
    logger.debug(
        f"Berry phase delta={spec.delta}: gamma={result.gamma_B:.6f}, min gap={min_gap:.3e}"
    )
    return result


def berry_phase_per_state(
    spec: LatticeSpec,
    basis: FockBasis,
    grid: TwistGrid,
    sel: SubsetSelector,
    **kwargs: Any,
) -> List[float]:
    """
    One Berry phase per selected state, in energy order.

    The phases are Wilson-loop eigenphases, so their sum equals the
    determinant phase modulo 2π. When the overlaps mix states they belong to
    mixtures rather than to single eigenstates, and a warning is logged.
    """
    result = berry_phase(spec, basis, grid, sel, **kwargs)
    if result.max_off_diagonal > OFF_DIAGONAL_TOL:
        logger.warning(
            f"Largest off-diagonal overlap {result.max_off_diagonal:.3f}; "
            f"per-state phases belong to mixed states"
        )
    return [float(p) for p in result.per_state_phases]  # type: ignore[union-attr]


def single_point_berry(
    spec: LatticeSpec,
    basis: FockBasis,
    sel: SubsetSelector,
    flavor_mask: Optional[Sequence[int]] = None,
    **kwargs: Any,
) -> BerryPhaseResult:
    """M=1 Berry phase from a single diagonalization at θ=0."""
    mask = None if flavor_mask is None else tuple(flavor_mask)
    return berry_phase(spec, basis, TwistGrid(1, mask), sel, **kwargs)


def flavor_twist_berry(
    spec: LatticeSpec,
    basis: FockBasis,
    grid: TwistGrid,
    sel: SubsetSelector,
    flavor: int,
    **kwargs: Any,
) -> BerryPhaseResult:
    """Berry phase with the twist threaded through a single flavor."""
    if not 0 <= flavor < spec.n_flavors:
        raise ValueError(f"Flavor {flavor} outside 0..{spec.n_flavors - 1}")
    return berry_phase(spec, basis, grid.for_flavor(flavor), sel, **kwargs)
