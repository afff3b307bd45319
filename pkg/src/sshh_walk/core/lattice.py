"""
Physical configuration of an SU(N) SSH-Hubbard chain.

Sites are indexed 0..L-1. Bond ``x`` joins sites ``x`` and ``x+1`` (mod L) and
carries the amplitude ``J[1 + delta(-1)^(x+1)] + dJ_x``: the (even, odd) bonds
are the intra-cell bonds J(1-delta), the (odd, even) bonds the inter-cell bonds
J(1+delta), so delta > 0 is the topological phase.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

PERIODIC = "periodic"
OPEN = "open"
TWISTED = "twisted"
BOUNDARY_KINDS = (PERIODIC, OPEN, TWISTED)


@dataclass(frozen=True)
class Boundary:
    """Boundary condition of the chain; ``flavor_mask=None`` twists every flavor."""

    kind: str = PERIODIC
    theta: float = 0.0
    flavor_mask: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in BOUNDARY_KINDS:
            raise ValueError(f"Unknown boundary kind: {self.kind}")
        object.__setattr__(self, "theta", float(self.theta) % (2.0 * math.pi))
        if self.flavor_mask is not None:
            object.__setattr__(
                self, "flavor_mask", tuple(sorted(set(int(a) for a in self.flavor_mask)))
            )

    @classmethod
    def periodic(cls) -> "Boundary":
        return cls(PERIODIC)

    @classmethod
    def open(cls) -> "Boundary":
        return cls(OPEN)

    @classmethod
    def twisted(
        cls, theta: float, flavor_mask: Optional[Sequence[int]] = None
    ) -> "Boundary":
        mask = None if flavor_mask is None else tuple(flavor_mask)
        return cls(TWISTED, theta, mask)

    @property
    def is_open(self) -> bool:
        return self.kind == OPEN

    def twists(self, flavor: int) -> bool:
        """Whether the boundary bond of ``flavor`` carries the twist phase."""
        if self.kind != TWISTED:
            return False
        return self.flavor_mask is None or flavor in self.flavor_mask

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind}
        if self.kind == TWISTED:
            data["theta"] = self.theta
            data["flavor_mask"] = (
                None if self.flavor_mask is None else list(self.flavor_mask)
            )
        return data

    @classmethod
    def from_dict(cls, data: Any) -> "Boundary":
        if isinstance(data, str):
            return cls(data)
        mask = data.get("flavor_mask")
        return cls(
            data.get("kind", PERIODIC),
            data.get("theta", 0.0),
            None if mask is None else tuple(mask),
        )


@dataclass(frozen=True)
class LatticeSpec:
    """Full physical configuration; immutable and safe to share across workers."""

    L: int
    J: float = 1.0
    delta: float = 0.0
    U: float = 0.0
    mu: float = 0.0
    n_flavors: int = 1
    boundary: Boundary = field(default_factory=Boundary.periodic)
    hopping_disorder: Tuple[float, ...] = ()
    onsite_disorder: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.L < 2 or self.L % 2:
            raise ValueError(f"L must be even and >= 2, got {self.L}")
        if not abs(self.delta) < 1.0:
            raise ValueError(f"|delta| must be < 1, got {self.delta}")
        if self.n_flavors < 1:
            raise ValueError(f"n_flavors must be >= 1, got {self.n_flavors}")
        for name in ("hopping_disorder", "onsite_disorder"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                values = (0.0,) * self.L
            if len(values) != self.L:
                raise ValueError(f"{name} must have length L={self.L}, got {len(values)}")
            object.__setattr__(self, name, values)
        mask = self.boundary.flavor_mask
        if mask is not None and any(a < 0 or a >= self.n_flavors for a in mask):
            raise ValueError(
                f"flavor_mask {mask} outside flavors 0..{self.n_flavors - 1}"
            )

    @property
    def is_clean(self) -> bool:
        return not any(self.hopping_disorder) and not any(self.onsite_disorder)

    @property
    def is_twisted(self) -> bool:
        return self.boundary.kind == TWISTED and self.boundary.theta != 0.0

    def bond_amplitude(self, x: int) -> float:
        """Real amplitude of bond (x, x+1) before any twist phase."""
        sign = 1.0 if x % 2 else -1.0
        return self.J * (1.0 + self.delta * sign) + self.hopping_disorder[x]

    def bond_amplitudes(self) -> np.ndarray:
        """Amplitudes of all L bonds; the last one is zero for open chains."""
        amps = np.array([self.bond_amplitude(x) for x in range(self.L)])
        if self.boundary.is_open:
            amps[-1] = 0.0
        return amps

    def replace(self, **changes: Any) -> "LatticeSpec":
        return dataclasses.replace(self, **changes)

    def with_twist(
        self, theta: float, flavor_mask: Optional[Sequence[int]] = None
    ) -> "LatticeSpec":
        if self.boundary.is_open:
            raise ValueError("Twisted boundary conditions need a closed chain")
        return self.replace(boundary=Boundary.twisted(theta, flavor_mask))

    def with_disorder(
        self, hopping: Sequence[float], onsite: Sequence[float]
    ) -> "LatticeSpec":
        return self.replace(
            hopping_disorder=tuple(hopping), onsite_disorder=tuple(onsite)
        )

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "L": self.L,
            "J": self.J,
            "delta": self.delta,
            "U": self.U,
            "mu": self.mu,
            "n_flavors": self.n_flavors,
            "boundary": self.boundary.to_dict(),
        }
        if not self.is_clean:
            data["hopping_disorder"] = list(self.hopping_disorder)
            data["onsite_disorder"] = list(self.onsite_disorder)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LatticeSpec":
        return cls(
            L=int(data["L"]),
            J=float(data.get("J", 1.0)),
            delta=float(data.get("delta", 0.0)),
            U=float(data.get("U", 0.0)),
            mu=float(data.get("mu", 0.0)),
            n_flavors=int(data.get("n_flavors", 1)),
            boundary=Boundary.from_dict(data.get("boundary", PERIODIC)),
            hopping_disorder=tuple(data.get("hopping_disorder") or ()),
            onsite_disorder=tuple(data.get("onsite_disorder") or ()),
        )


@dataclass(frozen=True)
class FlavorOccupancy:
    """Particle number per flavor of a fixed-number sector."""

    particles_per_flavor: Tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(n) for n in self.particles_per_flavor)
        if any(n < 0 for n in counts):
            raise ValueError(f"Negative particle number in {counts}")
        object.__setattr__(self, "particles_per_flavor", counts)

    @classmethod
    def one_per_flavor(cls, n_flavors: int) -> "FlavorOccupancy":
        return cls((1,) * n_flavors)

    @classmethod
    def uniform(cls, n_flavors: int, n: int) -> "FlavorOccupancy":
        return cls((n,) * n_flavors)

    @property
    def n_flavors(self) -> int:
        return len(self.particles_per_flavor)

    @property
    def total(self) -> int:
        return sum(self.particles_per_flavor)

    def check(self, spec: LatticeSpec) -> None:
        if self.n_flavors != spec.n_flavors:
            raise ValueError(
                f"Occupancy has {self.n_flavors} flavors, spec has {spec.n_flavors}"
            )
        if any(n > spec.L for n in self.particles_per_flavor):
            raise ValueError(f"Occupancy {self.particles_per_flavor} exceeds L={spec.L}")

    def dimension(self, L: int) -> int:
        return math.prod(math.comb(L, n) for n in self.particles_per_flavor)

    def particle_hole(self, L: int) -> "FlavorOccupancy":
        """Image sector under the chiral map n -> L - n."""
        return FlavorOccupancy(tuple(L - n for n in self.particles_per_flavor))
