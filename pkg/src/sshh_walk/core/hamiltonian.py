"""
Sparse SU(N) SSH-Hubbard Hamiltonian.

H = Σ_α Σ_bonds (t c†_{y,α} c_{x,α} + h.c.) + U Σ_x Σ_{α<β} n_{x,α} n_{x,β}
    + Σ_x δμ_x n_x − μ N

The hopping part is flavor diagonal, so it is assembled per flavor on the small
flavor basis and lifted with Kronecker products.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .basis import ANNIHILATE, CREATE, FockBasis, StateVector, enumerate_basis, fermion_apply
from .exceptions import CapacityError, NumericError
from .lattice import FlavorOccupancy, LatticeSpec

logger = logging.getLogger(__name__)

DENSE_DIMENSION_CAP = 20000
CHIRAL_VERIFY_CAP = 4096
HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class Bond:
    """Hop ``source -> target`` with amplitude for c†_target c_source."""

    source: int
    target: int
    amplitude: complex


def bond_table(spec: LatticeSpec, flavor: int = 0) -> List[Bond]:
    """Hopping bonds seen by ``flavor``; the boundary bond is last and absent when open."""
    bonds = []
    last = spec.L - 1 if spec.boundary.is_open else spec.L
    for x in range(last):
        amplitude = complex(spec.bond_amplitude(x))
        if x == spec.L - 1 and spec.boundary.twists(flavor):
            amplitude *= np.exp(1j * spec.boundary.theta)
        bonds.append(Bond(x, (x + 1) % spec.L, amplitude))
    return bonds


class SparseOperator:
    """Operator on a :class:`FockBasis` stored as CSR with both triangles explicit."""

    def __init__(self, basis: FockBasis, matrix: sp.spmatrix, hermitian: bool = True):
        matrix = sp.csr_matrix(matrix, dtype=np.complex128)
        if matrix.shape != (basis.dimension, basis.dimension):
            raise ValueError(
                f"Operator shape {matrix.shape} does not match basis dimension "
                f"{basis.dimension}"
            )
        matrix.sum_duplicates()
        matrix.sort_indices()
        self.basis = basis
        self.matrix = matrix
        self.hermitian = hermitian

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    def matvec(self, vector: Union[StateVector, np.ndarray]) -> np.ndarray:
        return matvec(self, vector)

    def expectation(self, vector: Union[StateVector, np.ndarray]) -> complex:
        v = vector.amplitudes if isinstance(vector, StateVector) else np.asarray(vector)
        return complex(np.vdot(v, self.matrix @ v))

    def hermiticity_error(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return self.hermiticity_error() < tol

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def to_dense(self, cap: int = DENSE_DIMENSION_CAP) -> np.ndarray:
        if self.dimension > cap:
            raise CapacityError(
                f"Dense matrix of dimension {self.dimension} exceeds the cap of {cap}",
                dimension=self.dimension,
                cap=cap,
            )
        return self.matrix.toarray()

    def eigh(self, cap: int = DENSE_DIMENSION_CAP) -> Tuple[np.ndarray, np.ndarray]:
        """Full dense diagonalization, eigenvalues ascending."""
        try:
            return np.linalg.eigh(self.to_dense(cap))
        except np.linalg.LinAlgError as e:
            raise NumericError(f"Dense diagonalization failed: {e}") from e

    def eigvalsh(self, cap: int = DENSE_DIMENSION_CAP) -> np.ndarray:
        try:
            return np.linalg.eigvalsh(self.to_dense(cap))
        except np.linalg.LinAlgError as e:
            raise NumericError(f"Dense diagonalization failed: {e}") from e


def matvec(H: SparseOperator, vector: Union[StateVector, np.ndarray]) -> np.ndarray:
    """Exact sparse product H·v (unnormalized)."""
    v = vector.amplitudes if isinstance(vector, StateVector) else np.asarray(vector)
    if v.shape[0] != H.dimension:
        raise ValueError(f"Vector of length {v.shape[0]} does not match dimension {H.dimension}")
    return H.matrix @ v


def flavor_hopping_matrix(
    spec: LatticeSpec, basis: FockBasis, flavor: int
) -> sp.csr_matrix:
    """Hopping block acting on the flavor basis of ``flavor`` alone."""
    patterns = basis.flavor_states[flavor]
    rows: List[int] = []
    cols: List[int] = []
    values: List[complex] = []

    def hop(column: int, pattern: int, source: int, target: int, amplitude: complex) -> None:
        removed = fermion_apply(pattern, ANNIHILATE, source)
        if removed is None:
            return
        added = fermion_apply(removed[0], CREATE, target)
        if added is None:
            return
        rows.append(basis.flavor_rank(flavor, added[0]))
        cols.append(column)
        values.append(amplitude * removed[1] * added[1])

    bonds = bond_table(spec, flavor)
    for i, pattern in enumerate(patterns):
        for bond in bonds:
            hop(i, pattern, bond.source, bond.target, bond.amplitude)
            hop(i, pattern, bond.target, bond.source, np.conj(bond.amplitude))

    size = len(patterns)
    block = sp.coo_matrix((values, (rows, cols)), shape=(size, size), dtype=np.complex128)
    return block.tocsr()


def _lift(block: sp.spmatrix, shape: Tuple[int, ...], flavor: int) -> sp.spmatrix:
    left = math.prod(shape[:flavor])
    right = math.prod(shape[flavor + 1 :])
    lifted = block
    if left > 1:
        lifted = sp.kron(sp.identity(left, format="csr"), lifted, format="csr")
    if right > 1:
        lifted = sp.kron(lifted, sp.identity(right, format="csr"), format="csr")
    return lifted


def diagonal_energies(spec: LatticeSpec, basis: FockBasis) -> np.ndarray:
    """Interaction, on-site disorder and chemical-potential energy of each basis state."""
    energies = spec.U * basis.same_site_pairs.astype(np.float64)
    onsite = np.asarray(spec.onsite_disorder)
    if np.any(onsite):
        for a in range(basis.n_flavors):
            energies += basis.site_values(a, onsite)
    return energies - spec.mu * basis.n_particles


def build_hamiltonian(spec: LatticeSpec, basis: FockBasis) -> SparseOperator:
    """Assemble H for ``spec`` on ``basis``."""
    if not basis.is_compatible(spec):
        raise ValueError(
            f"Basis built for L={basis.L}, N={basis.n_flavors} cannot host "
            f"spec with L={spec.L}, N={spec.n_flavors}"
        )

    blocks: Dict[Tuple[int, bool], sp.csr_matrix] = {}
    matrix = sp.diags(diagonal_energies(spec, basis).astype(np.complex128), format="csr")
    for a in range(basis.n_flavors):
        key = (basis.occupancy.particles_per_flavor[a], spec.boundary.twists(a))
        if key not in blocks:
            blocks[key] = flavor_hopping_matrix(spec, basis, a)
        if blocks[key].nnz:
            matrix = matrix + _lift(blocks[key], basis.shape, a)

    H = SparseOperator(basis, matrix, hermitian=True)
    logger.debug(f"Assembled H: dimension={H.dimension}, nnz={H.nnz}")
    return H


def inversion_operator(basis: FockBasis) -> sp.csr_matrix:
    """Mirror x -> L-1-x as a signed permutation on ``basis``."""
    L = basis.L
    perm_blocks = []
    for a, patterns in enumerate(basis.flavor_states):
        n = basis.occupancy.particles_per_flavor[a]
        sign = -1.0 if (n * (n - 1) // 2) % 2 else 1.0
        image = [
            basis.flavor_rank(a, int(format(p, f"0{L}b")[::-1], 2)) for p in patterns
        ]
        size = len(patterns)
        perm_blocks.append(
            sp.csr_matrix((np.full(size, sign), (image, np.arange(size))), shape=(size, size))
        )

    operator = perm_blocks[0]
    for block in perm_blocks[1:]:
        operator = sp.kron(operator, block, format="csr")
    return operator.astype(np.complex128)


def check_inversion_symmetry(
    spec: LatticeSpec,
    occupancy: Optional[FlavorOccupancy] = None,
    tol: float = HERMITICITY_TOL,
) -> bool:
    """Whether H commutes with the chain mirror in the given sector."""
    occupancy = occupancy or FlavorOccupancy.one_per_flavor(spec.n_flavors)
    basis = enumerate_basis(spec, occupancy)
    H = build_hamiltonian(spec, basis).matrix
    mirror = inversion_operator(basis)
    commutator = H @ mirror - mirror @ H
    error = float(np.abs(commutator.data).max()) if commutator.nnz else 0.0
    logger.debug(f"Inversion commutator max entry: {error:.3e}")
    return error < tol


@dataclass(frozen=True)
class ChiralReport:
    mu_required: float
    is_symmetric: Optional[bool]
    max_deviation: Optional[float] = None
    sector: Optional[Tuple[int, ...]] = None
    image_sector: Optional[Tuple[int, ...]] = None

    @property
    def verified(self) -> bool:
        return self.is_symmetric is not None


def check_chiral_symmetry(
    spec: LatticeSpec,
    occupancy: Optional[FlavorOccupancy] = None,
    verify: bool = True,
    cap: int = CHIRAL_VERIFY_CAP,
    tol: float = 1e-10,
) -> ChiralReport:
    """
    Chemical potential μ=(N-1)U/2 restoring chiral symmetry, optionally verified.

    Verification compares the spectrum of the sector with the spectrum of its
    particle-hole image n_α -> L - n_α at that μ. Hopping disorder keeps the
    chain bipartite and is accepted; on-site disorder is not.
    """
    if any(spec.onsite_disorder) or spec.is_twisted:
        raise ValueError("Chiral symmetry check needs an untwisted chain without on-site disorder")

    mu_required = (spec.n_flavors - 1) * spec.U / 2.0
    if not verify:
        return ChiralReport(mu_required, None)

    occupancy = occupancy or FlavorOccupancy.one_per_flavor(spec.n_flavors)
    image = occupancy.particle_hole(spec.L)
    largest = max(occupancy.dimension(spec.L), image.dimension(spec.L))
    if largest > cap:
        logger.warning(
            f"Chiral verification skipped: sector dimension {largest} above cap {cap}"
        )
        return ChiralReport(mu_required, None)

    tuned = spec.replace(mu=mu_required)
    spectra = []
    for sector in (occupancy, image):
        basis = enumerate_basis(tuned, sector)
        spectra.append(build_hamiltonian(tuned, basis).eigvalsh(cap))
    deviation = float(np.max(np.abs(spectra[0] - spectra[1])))
    return ChiralReport(
        mu_required,
        deviation < tol,
        deviation,
        occupancy.particles_per_flavor,
        image.particles_per_flavor,
    )
