"""
Time evolution e^{-iHt}|ψ⟩ by Krylov (Lanczos) steps or full diagonalization.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .basis import FockBasis, StateVector
from .exceptions import CapacityError, NumericError
from .hamiltonian import DENSE_DIMENSION_CAP, SparseOperator
from .lattice import LatticeSpec

logger = logging.getLogger(__name__)

KRYLOV = "krylov"
FULL_SPECTRUM = "full_spectrum"
METHODS = (KRYLOV, FULL_SPECTRUM)

TARGET_SNAPSHOTS = 400
NORM_DRIFT_LIMIT = 1e-8
MIN_SUBSTEP = 1e-12
BREAKDOWN_TOL = 1e-14

Observer = Callable[[StateVector], Any]


@dataclass(frozen=True)
class PropagatorConfig:
    method: str = KRYLOV
    dt: float = 0.05
    t_max: float = 0.0
    krylov_dim: int = 30
    tolerance: float = 1e-10
    record_stride: Optional[int] = None
    store_states: bool = False
    dense_cap: int = DENSE_DIMENSION_CAP

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"Unknown propagation method: {self.method}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_max < 0:
            raise ValueError(f"t_max must be non-negative, got {self.t_max}")
        if self.krylov_dim < 2:
            raise ValueError(f"krylov_dim must be >= 2, got {self.krylov_dim}")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.t_max / self.dt - 1e-9) if self.t_max > 0 else 0

    @property
    def stride(self) -> int:
        if self.record_stride is not None:
            return self.record_stride
        return max(1, round(self.n_steps / TARGET_SNAPSHOTS))

    def step_times(self) -> np.ndarray:
        steps = np.arange(self.n_steps + 1) * self.dt
        return np.minimum(steps, self.t_max)

    def record_steps(self) -> List[int]:
        steps = list(range(0, self.n_steps + 1, self.stride))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return steps


@dataclass
class WalkTrajectory:
    """Recorded snapshots of a propagation run."""

    spec: LatticeSpec
    basis: FockBasis
    config: PropagatorConfig
    times: np.ndarray
    norms: np.ndarray
    energies: np.ndarray
    observables: Dict[str, np.ndarray] = field(default_factory=dict)
    states: Optional[np.ndarray] = None
    max_norm_drift: float = 0.0

    def __len__(self) -> int:
        return len(self.times)

    def snapshot(self, index: int) -> StateVector:
        if self.states is None:
            raise ValueError("Trajectory was recorded without states")
        return StateVector(self.basis, self.states[index])

    def final_state(self) -> StateVector:
        return self.snapshot(-1)

    def observable(self, name: str) -> np.ndarray:
        if name not in self.observables:
            raise KeyError(f"Observable '{name}' was not recorded")
        return self.observables[name]


class LanczosStepper:
    """Short-iterate Lanczos exponential with full reorthogonalization."""

    def __init__(self, H: SparseOperator, krylov_dim: int = 30, tolerance: float = 1e-10):
        self.H = H
        self.krylov_dim = min(krylov_dim, H.dimension)
        self.tolerance = tolerance
        self.halvings = 0

    def _krylov_space(
        self, v: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float, float]:
        beta0 = float(np.linalg.norm(v))
        m = self.krylov_dim
        V = np.zeros((m, v.shape[0]), dtype=np.complex128)
        alpha = np.zeros(m)
        beta = np.zeros(m)
        V[0] = v / beta0
        size = m
        for j in range(m):
            w = self.H.matrix @ V[j]
            alpha[j] = np.vdot(V[j], w).real
            w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
            w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
            beta[j] = np.linalg.norm(w)
            if beta[j] < BREAKDOWN_TOL * max(1.0, abs(alpha[j])):
                size = j + 1
                beta[j] = 0.0
                break
            if j + 1 < m:
                V[j + 1] = w / beta[j]

        if size == 1:
            evals, evecs = alpha[:1], np.ones((1, 1))
        else:
            try:
                evals, evecs = eigh_tridiagonal(alpha[:size], beta[: size - 1])
            except np.linalg.LinAlgError as e:
                raise NumericError(f"Tridiagonal eigensolver failed: {e}") from e
        return V[:size], evals, evecs, beta0, float(beta[size - 1])

    def propagate(self, v: np.ndarray, t: float) -> np.ndarray:
        """e^{-iHt} v for either sign of t, halving sub-steps until the error estimate is met."""
        remaining = float(t)
        direction = 1.0 if t >= 0 else -1.0
        current = v.astype(np.complex128, copy=True)
        while abs(remaining) > 0:
            V, evals, evecs, beta0, residual = self._krylov_space(current)
            tau = remaining
            while True:
                coefficients = evecs @ (np.exp(-1j * evals * tau) * evecs[0].conj())
                error = beta0 * residual * abs(coefficients[-1])
                if error <= self.tolerance:
                    break
                tau /= 2.0
                self.halvings += 1
                logger.debug(f"Krylov error {error:.2e} above tolerance, sub-step {tau:.3e}")
                if abs(tau) < MIN_SUBSTEP:
                    raise NumericError(
                        f"Krylov step collapsed below {MIN_SUBSTEP} (error {error:.2e})"
                    )
            current = beta0 * (coefficients @ V)
            remaining -= tau
            if direction * remaining < 0:
                remaining = 0.0
        return current


def _check_hermitian(H: SparseOperator) -> None:
    if not H.hermitian or not H.is_hermitian(1e-10):
        raise ValueError("Propagation requires a Hermitian Hamiltonian")


def _full_spectrum(H: SparseOperator, cap: int) -> Tuple[np.ndarray, np.ndarray]:
    try:
        return H.eigh(cap)
    except CapacityError as e:
        raise CapacityError(
            f"{e}; use method='krylov' to propagate without dense diagonalization",
            dimension=e.dimension,
            cap=e.cap,
        ) from e


def propagate(
    H: SparseOperator, psi: StateVector, t: float, cfg: Optional[PropagatorConfig] = None
) -> StateVector:
    """Single propagation e^{-iHt}ψ; negative t runs backwards."""
    cfg = cfg or PropagatorConfig()
    _check_hermitian(H)
    if cfg.method == FULL_SPECTRUM:
        evals, evecs = _full_spectrum(H, cfg.dense_cap)
        amplitudes = evecs @ (np.exp(-1j * evals * t) * (evecs.conj().T @ psi.amplitudes))
    else:
        stepper = LanczosStepper(H, cfg.krylov_dim, cfg.tolerance)
        amplitudes = psi.amplitudes
        n_steps = max(1, math.ceil(abs(t) / cfg.dt - 1e-9))
        step = t / n_steps
        for _ in range(n_steps):
            amplitudes = stepper.propagate(amplitudes, step)
    return StateVector(psi.basis, amplitudes)


def evolve(
    H: SparseOperator,
    psi0: StateVector,
    cfg: PropagatorConfig,
    observers: Optional[Mapping[str, Observer]] = None,
) -> WalkTrajectory:
    """Propagate ``psi0`` to ``cfg.t_max`` and record snapshots every ``cfg.stride`` steps."""
    _check_hermitian(H)
    if psi0.basis.dimension != H.dimension:
        raise ValueError("Initial state and Hamiltonian live on different bases")
    if not psi0.is_normalized(1e-10):
        raise ValueError(f"Initial state has norm {psi0.norm():.12f}")

    observers = dict(observers or {})
    step_times = cfg.step_times()
    record = set(cfg.record_steps())

    times: List[float] = []
    norms: List[float] = []
    energies: List[float] = []
    states: List[np.ndarray] = []
    values: Dict[str, List[Any]] = {name: [] for name in observers}
    max_drift = 0.0

    def snapshot(step: int, amplitudes: np.ndarray) -> None:
        state = StateVector(psi0.basis, amplitudes)
        times.append(float(step_times[step]))
        norms.append(state.norm())
        energies.append(H.expectation(amplitudes).real)
        if cfg.store_states:
            states.append(amplitudes.copy())
        for name, observer in observers.items():
            values[name].append(observer(state))

    logger.info(
        f"Evolving dimension {H.dimension} to t={cfg.t_max} with {cfg.method} "
        f"({cfg.n_steps} steps, {len(record)} snapshots)"
    )

    if cfg.method == FULL_SPECTRUM:
        evals, evecs = _full_spectrum(H, cfg.dense_cap)
        weights = evecs.conj().T @ psi0.amplitudes
        for step in sorted(record):
            t = float(step_times[step])
            if step == 0:
                amplitudes = psi0.amplitudes.copy()
            else:
                amplitudes = evecs @ (np.exp(-1j * evals * t) * weights)
            max_drift = max(max_drift, abs(np.linalg.norm(amplitudes) - 1.0))
            snapshot(step, amplitudes)
    else:
        stepper = LanczosStepper(H, cfg.krylov_dim, cfg.tolerance)
        amplitudes = psi0.amplitudes.copy()
        snapshot(0, amplitudes)
        for step in range(1, cfg.n_steps + 1):
            amplitudes = stepper.propagate(amplitudes, step_times[step] - step_times[step - 1])
            norm = float(np.linalg.norm(amplitudes))
            max_drift = max(max_drift, abs(norm - 1.0))
            amplitudes /= norm
            if step in record:
                snapshot(step, amplitudes)
        if stepper.halvings:
            logger.info(f"Krylov propagation halved its step {stepper.halvings} times")

    if max_drift > NORM_DRIFT_LIMIT:
        logger.warning(f"Norm drift {max_drift:.2e} exceeded {NORM_DRIFT_LIMIT}")

    return WalkTrajectory(
        spec=psi0.basis.spec,
        basis=psi0.basis,
        config=cfg,
        times=np.array(times),
        norms=np.array(norms),
        energies=np.array(energies),
        observables={name: np.array(v) for name, v in values.items()},
        states=np.array(states) if cfg.store_states else None,
        max_norm_drift=max_drift,
    )


def boundary_time(spec: LatticeSpec, injection_site: int, velocity: float) -> float:
    """Time for a front launched at ``injection_site`` to reach the nearer chain end."""
    if not velocity > 0:
        raise ValueError(f"velocity must be positive, got {velocity}")
    distance = min(injection_site, spec.L - 1 - injection_site)
    return distance / velocity
