"""
Disorder ensembles and parameter sweeps.

Every realization draws its disorder from a Philox stream keyed by
(seed, realization, kind), so any member of an ensemble can be rebuilt on its
own and a sweep is reproducible regardless of how tasks are scheduled.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .basis import FockBasis, enumerate_basis
from .berry import SubsetSelector, TwistGrid, berry_phase, wrap_phase
from .exceptions import CapacityError, SSHHError
from .lattice import FlavorOccupancy, LatticeSpec
from .walks import WalkRecipe, run_walk

logger = logging.getLogger(__name__)

HOPPING = "hopping"
ONSITE = "onsite"
BOTH = "both"
DISORDER_KINDS = (HOPPING, ONSITE, BOTH)
KIND_CODES = {HOPPING: 0, ONSITE: 1}

CIRCULAR = "circular"
FOLDED = "folded"
LINEAR = "linear"
ESTIMATORS = (CIRCULAR, FOLDED)

MIN_SUCCESS_FRACTION = 0.8


@dataclass(frozen=True)
class DisorderConfig:
    W: float = 0.0
    kind: str = HOPPING
    realizations: int = 1
    seed: int = 0
    rng: str = "philox"

    def __post_init__(self) -> None:
        if self.W < 0:
            raise ValueError(f"Disorder amplitude must be non-negative, got {self.W}")
        if self.kind not in DISORDER_KINDS:
            raise ValueError(f"Unknown disorder kind: {self.kind}")
        if self.realizations < 1:
            raise ValueError(f"realizations must be >= 1, got {self.realizations}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.rng != "philox":
            raise ValueError(f"Unsupported generator: {self.rng}")

    def enabled(self, kind: str) -> bool:
        return self.kind in (kind, BOTH)


def _stream(cfg: DisorderConfig, realization: int, kind: str) -> np.random.Generator:
    key = np.random.SeedSequence([cfg.seed, realization, KIND_CODES[kind]])
    return np.random.Generator(np.random.Philox(key))


def sample_disorder(
    cfg: DisorderConfig, realization: int, L: int
) -> Tuple[np.ndarray, np.ndarray]:
    """(δJ, δμ) offsets uniform on [−W/2, W/2]; disabled kinds are zero."""
    if not 0 <= realization < cfg.realizations:
        raise ValueError(f"Realization {realization} outside 0..{cfg.realizations - 1}")
    arrays = []
    for kind in (HOPPING, ONSITE):
        if cfg.enabled(kind) and cfg.W > 0:
            arrays.append(_stream(cfg, realization, kind).uniform(-cfg.W / 2, cfg.W / 2, L))
        else:
            arrays.append(np.zeros(L))
    return arrays[0], arrays[1]


def disordered_spec(spec: LatticeSpec, cfg: DisorderConfig, realization: int) -> LatticeSpec:
    hopping, onsite = sample_disorder(cfg, realization, spec.L)
    return spec.with_disorder(hopping, onsite)


@dataclass
class Statistic:
    mean: float
    stderr: float
    count: int
    resultant: Optional[float] = None


@dataclass
class SweepPoint:
    delta: float
    W: float
    statistics: Dict[str, Statistic]
    realizations: int
    failures: List[str] = field(default_factory=list)

    @property
    def successes(self) -> int:
        return self.realizations - len(self.failures)

    @property
    def valid(self) -> bool:
        return self.successes >= MIN_SUCCESS_FRACTION * self.realizations


@dataclass
class SweepResult:
    kind: str
    points: List[SweepPoint] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def axis(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    def means(self, statistic: str) -> np.ndarray:
        return np.array(
            [
                p.statistics[statistic].mean if statistic in p.statistics else np.nan
                for p in self.points
            ]
        )

    def to_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for p in self.points:
            for name, stat in p.statistics.items():
                rows.append(
                    {
                        "delta": p.delta,
                        "W": p.W,
                        "statistic": name,
                        "mean": stat.mean,
                        "stderr": stat.stderr,
                        "resultant": "" if stat.resultant is None else stat.resultant,
                        "count": stat.count,
                        "failures": len(p.failures),
                        "valid": int(p.valid),
                    }
                )
        return rows


def circular_statistic(phases: Sequence[float]) -> Statistic:
    """arg of the mean resultant, its length, and the circular standard error."""
    values = np.asarray(phases, dtype=np.float64)
    if values.size == 0:
        return Statistic(math.nan, math.nan, 0, 0.0)
    z = np.exp(1j * values).mean()
    R = float(min(abs(z), 1.0))
    spread = math.sqrt(-2.0 * math.log(R)) if R > 0 else math.inf
    mean = wrap_phase(float(np.angle(z)))
    return Statistic(mean, spread / math.sqrt(values.size), values.size, R)


def linear_statistic(values: Sequence[float]) -> Statistic:
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        return Statistic(math.nan, math.nan, 0)
    stderr = float(data.std(ddof=1) / math.sqrt(data.size)) if data.size > 1 else 0.0
    return Statistic(float(data.mean()), stderr, data.size)


def _berry_task(
    spec: LatticeSpec,
    basis: FockBasis,
    grid: TwistGrid,
    sel: SubsetSelector,
    cfg: DisorderConfig,
    realization: int,
) -> Tuple[Optional[float], Optional[str]]:
    try:
        result = berry_phase(disordered_spec(spec, cfg, realization), basis, grid, sel)
    except SSHHError as e:
        return None, f"realization {realization}: {type(e).__name__}: {e}"
    return result.gamma_B, None


def _aggregate(
    delta: float,
    cfg: DisorderConfig,
    outcomes: Sequence[Tuple[Any, Optional[str]]],
    reduce: Any,
) -> SweepPoint:
    values = [value for value, error in outcomes if error is None]
    failures = [error for _, error in outcomes if error is not None]
    for reason in failures:
        logger.warning(f"delta={delta}, W={cfg.W}: {reason}")
    point = SweepPoint(delta, cfg.W, reduce(values), cfg.realizations, failures)
    if not point.valid:
        logger.warning(
            f"delta={delta}, W={cfg.W}: only {point.successes}/{cfg.realizations} "
            f"realizations succeeded"
        )
    return point


def disorder_averaged_berry(
    spec: LatticeSpec,
    grid: TwistGrid,
    sel: SubsetSelector,
    cfg: DisorderConfig,
    deltas: Optional[Sequence[float]] = None,
    occupancy: Optional[FlavorOccupancy] = None,
    estimator: str = CIRCULAR,
    n_jobs: int = 1,
) -> SweepResult:
    """Average γ_B over disorder realizations at each dimerization."""
    if estimator not in ESTIMATORS:
        raise ValueError(f"Unknown phase estimator: {estimator}")
    deltas = [spec.delta] if deltas is None else list(deltas)
    occupancy = occupancy or FlavorOccupancy.one_per_flavor(spec.n_flavors)
    basis = enumerate_basis(spec, occupancy)

    tasks = [(d, r) for d in deltas for r in range(cfg.realizations)]
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_berry_task)(spec.replace(delta=float(d)), basis, grid, sel, cfg, r)
        for d, r in tasks
    )

    def reduce(values: List[float]) -> Dict[str, Statistic]:
        if estimator == CIRCULAR:
            return {"gamma_B": circular_statistic(values)}
        folded = linear_statistic([wrap_phase(v) for v in values])
        folded.resultant = circular_statistic(values).resultant
        return {"gamma_B": folded}

    result = SweepResult(kind=estimator, metadata={"selector": sel.describe(), "M": grid.M})
    for i, d in enumerate(deltas):
        chunk = outcomes[i * cfg.realizations : (i + 1) * cfg.realizations]
        point = _aggregate(float(d), cfg, chunk, reduce)
        result.points.append(point)
        stat = point.statistics["gamma_B"]
        logger.info(
            f"delta={d:+.3f}, W={cfg.W}: gamma_B={stat.mean:.4f} "
            f"(R={stat.resultant}, {stat.count} realizations)"
        )
    return result


def _walk_task(
    spec: LatticeSpec, recipe: WalkRecipe, cfg: DisorderConfig, realization: int
) -> Tuple[Optional[Tuple[float, float]], Optional[str]]:
    try:
        walk = run_walk(disordered_spec(spec, cfg, realization), recipe)
    except CapacityError:
        raise
    except SSHHError as e:
        return None, f"realization {realization}: {type(e).__name__}: {e}"
    return (walk.P1.final, walk.PN.final), None


def disorder_averaged_polarization(
    spec: LatticeSpec,
    recipe: WalkRecipe,
    cfg: DisorderConfig,
    deltas: Optional[Sequence[float]] = None,
    n_jobs: int = 1,
) -> SweepResult:
    """Mean and standard error of the final cumulative P₁ and P_N per dimerization."""
    deltas = [spec.delta] if deltas is None else list(deltas)
    tasks = [(d, r) for d in deltas for r in range(cfg.realizations)]
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_walk_task)(spec.replace(delta=float(d)), recipe, cfg, r) for d, r in tasks
    )

    def reduce(values: List[Tuple[float, float]]) -> Dict[str, Statistic]:
        return {
            "P1c": linear_statistic([v[0] for v in values]),
            "PNc": linear_statistic([v[1] for v in values]),
        }

    result = SweepResult(kind=LINEAR)
    for i, d in enumerate(deltas):
        chunk = outcomes[i * cfg.realizations : (i + 1) * cfg.realizations]
        result.points.append(_aggregate(float(d), cfg, chunk, reduce))
    return result


def run_sweep(
    spec: LatticeSpec,
    deltas: Sequence[float],
    amplitudes: Sequence[float],
    cfg: DisorderConfig,
    observable: str = "berry",
    grid: Optional[TwistGrid] = None,
    sel: Optional[SubsetSelector] = None,
    recipe: Optional[WalkRecipe] = None,
    estimator: str = CIRCULAR,
    n_jobs: int = 1,
    occupancy: Optional[FlavorOccupancy] = None,
) -> SweepResult:
    """Disorder averages over the (δ, W) grid, W-major."""
    if observable == "berry":
        if grid is None or sel is None:
            raise ValueError("Berry sweeps need a twist grid and a subset selector")
    elif observable == "polarization":
        if recipe is None:
            raise ValueError("Polarization sweeps need a walk recipe")
    else:
        raise ValueError(f"Unknown sweep observable: {observable}")

    combined = SweepResult(kind=estimator if observable == "berry" else LINEAR)
    for W in amplitudes:
        point_cfg = replace(cfg, W=float(W))
        if observable == "berry":
            assert grid is not None and sel is not None
            part = disorder_averaged_berry(
                spec,
                grid,
                sel,
                point_cfg,
                deltas,
                occupancy=occupancy,
                estimator=estimator,
                n_jobs=n_jobs,
            )
        else:
            assert recipe is not None
            part = disorder_averaged_polarization(spec, recipe, point_cfg, deltas, n_jobs)
        combined.points.extend(part.points)
        combined.metadata.update(part.metadata)
    combined.metadata["observable"] = observable
    return combined
