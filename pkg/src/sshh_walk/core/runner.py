"""
Experiment runner.

The runner that turns a resolved recipe into result tables and files.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config.config import (
    disorder_from_config,
    grid_from_config,
    occupancy_from_config,
    selector_from_config,
    spec_from_config,
    validate_config,
    walk_recipe_from_config,
)
from ..utils.output import Table, build_header, operator_table, save_states, write_tables
from .basis import DEFAULT_DIMENSION_CAP, enumerate_basis
from .berry import berry_phase, single_point_berry
from .dynamics import KRYLOV, boundary_time
from .effective import band_compare_sweep
from .ensemble import run_sweep
from .exceptions import SSHHError
from .hamiltonian import DENSE_DIMENSION_CAP, build_hamiltonian
from .lattice import FlavorOccupancy
from .walks import WalkRecipe, occupancy_of, resolve_t_max, run_walk

logger = logging.getLogger(__name__)

MEMORY_WARNING_BYTES = 4 * 2**30
COMPLEX_BYTES = 16
SPARSE_ENTRY_BYTES = COMPLEX_BYTES + 4

INFO = "info"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    level: str
    code: str
    message: str


@dataclass
class RunArtifacts:
    """Everything a run produces, held in memory until it is written."""

    tables: List[Table] = field(default_factory=list)
    states: Dict[str, Tuple[np.ndarray, Dict[str, np.ndarray]]] = field(default_factory=dict)

    def table(self, name: str) -> Table:
        for table in self.tables:
            if table.name == name:
                return table
        raise KeyError(f"No table named {name}")


def estimate_memory(dimension: int, n_particles: int, method: str, krylov_dim: int = 30) -> int:
    """Rough peak memory in bytes of the Hamiltonian plus the working vectors."""
    nnz = dimension * (1 + 2 * n_particles)
    if method == "dense":
        return dimension**2 * COMPLEX_BYTES * 2 + nnz * SPARSE_ENTRY_BYTES
    vectors = krylov_dim + 4 if method == KRYLOV else 4
    return nnz * SPARSE_ENTRY_BYTES + vectors * dimension * COMPLEX_BYTES


class ExperimentRunner:
    """
    Runs one experiment recipe.

    The recipe must already be resolved against the defaults table (see
    :func:`sshh_walk.config.config.resolve_recipe`).
    """

    def __init__(self, recipe: Dict[str, Any], n_jobs: int = 1):
        validate_config(recipe)
        self.recipe = recipe
        self.command: str = recipe["command"]
        self.n_jobs = n_jobs
        self.spec = spec_from_config(recipe)

    def _deltas(self, block: str) -> List[float]:
        deltas = self.recipe[block].get("deltas")
        return [self.spec.delta] if deltas is None else [float(d) for d in deltas]

    def _occupancy(self) -> FlavorOccupancy:
        return occupancy_from_config(self.recipe, self.spec)

    def _walk_recipe(self) -> WalkRecipe:
        return walk_recipe_from_config(self.recipe["walk"], self.spec)

    def compute(self) -> RunArtifacts:
        """Run the recipe's command without touching the filesystem."""
        logger.info(f"Running {self.command} on L={self.spec.L}, N={self.spec.n_flavors}")
        handlers = {
            "spectrum": self._spectrum,
            "walk": self._walk,
            "berry": self._berry,
            "effcmp": self._effcmp,
            "sweep": self._sweep,
        }
        return handlers[self.command]()

    def run(self, out_dir: Optional[Path] = None, fmt: Optional[str] = None) -> List[Path]:
        """Compute, then write every artifact of the run. Returns the written paths."""
        output = self.recipe["output"]
        out_dir = Path(out_dir if out_dir is not None else output["dir"])
        fmt = fmt or output["format"]
        artifacts = self.compute()

        header = build_header(self.recipe)
        paths = write_tables(artifacts.tables, out_dir, fmt, header)
        for name, (amplitudes, arrays) in artifacts.states.items():
            paths.append(save_states(out_dir / f"{name}.npz", amplitudes, header, **arrays))
        return paths

    def _spectrum(self) -> RunArtifacts:
        block = self.recipe["spectrum"]
        basis = enumerate_basis(self.spec, self._occupancy())
        H = build_hamiltonian(self.spec, basis)
        logger.info(f"Hamiltonian: dimension {H.dimension}, {H.nnz} nonzeros")

        artifacts = RunArtifacts()
        if block["eigenvectors"]:
            energies, vectors = H.eigh(block["dense_cap"])
            artifacts.states["spectrum_states"] = (vectors.T, {"energies": energies})
        else:
            energies = H.eigvalsh(block["dense_cap"])
        artifacts.tables.append(
            Table(
                "spectrum",
                ["index", "energy"],
                [{"index": i, "energy": float(e)} for i, e in enumerate(energies)],
            )
        )
        if block["dump_operator"]:
            artifacts.tables.append(operator_table("hamiltonian", H.matrix))
        return artifacts

    def _walk(self) -> RunArtifacts:
        block = self.recipe["walk"]
        recipe = self._walk_recipe()
        polarization = Table("walk_polarization", ["delta", "t", "P1", "P1c", "PN", "PNc", "nN"])
        density = Table("walk_density", ["delta", "t", "x", "n"])
        nion = Table("walk_nion_density", ["delta", "t", "x", "n"])
        artifacts = RunArtifacts(tables=[polarization])
        if block["density"]:
            artifacts.tables += [density, nion]

        for i, delta in enumerate(self._deltas("walk")):
            result = run_walk(self.spec.replace(delta=delta), recipe)
            polarization.rows += [dict(row, delta=delta) for row in result.polarization_rows()]
            if block["density"]:
                density.rows += [dict(r, delta=delta) for r in result.density_rows("density")]
                nion.rows += [dict(r, delta=delta) for r in result.density_rows("nion_density")]
            trajectory = result.trajectory
            if trajectory.states is not None:
                artifacts.states[f"walk_states_{i}"] = (
                    trajectory.states,
                    {"times": trajectory.times, "delta": np.array(delta)},
                )
            logger.info(
                f"delta={delta:+.3f}: P1c={result.P1.final:.4f}, PNc={result.PN.final:.4f}"
            )
        return artifacts

    def _berry(self) -> RunArtifacts:
        block = self.recipe["berry"]
        grid = grid_from_config(block)
        sel = selector_from_config(block["selector"])
        basis = enumerate_basis(self.spec, self._occupancy())

        table = Table(
            "berry",
            [
                "delta",
                "gamma_B",
                "quantization_distance",
                "min_gap",
                "M",
                "subset_start",
                "subset_stop",
                "subset_size",
                "trusted",
            ],
        )
        per_state = Table("berry_per_state", ["delta", "state", "phase"])
        for delta in self._deltas("berry"):
            result = berry_phase(
                self.spec.replace(delta=delta),
                basis,
                grid,
                sel,
                gap_floor=block["gap_floor"],
                gap_policy=block["gap_policy"],
                n_jobs=self.n_jobs,
            )
            table.rows.append(
                dict(
                    result.to_row(),
                    delta=delta,
                    quantization_distance=result.quantization_distance,
                )
            )
            if block["per_state"] and result.per_state_phases is not None:
                per_state.rows += [
                    {"delta": delta, "state": result.subset[0] + k, "phase": float(p)}
                    for k, p in enumerate(result.per_state_phases)
                ]
            logger.info(f"delta={delta:+.3f}: gamma_B={result.gamma_B:.6f}")
        return RunArtifacts(tables=[table, per_state] if block["per_state"] else [table])

    def _effcmp(self) -> RunArtifacts:
        sweep = band_compare_sweep(self.spec, self._deltas("effcmp"), n_jobs=self.n_jobs)
        levels = Table("effcmp_levels", ["delta", "level", "full", "effective", "error"])
        summary = Table(
            "effcmp_summary", ["delta", "max_abs_error", "bulk_max_abs_error", "band_gap"]
        )
        for delta, comparison in zip(sweep.deltas, sweep.comparisons):
            for level, (full, eff, err) in enumerate(
                zip(comparison.full_energies, comparison.effective_energies, comparison.errors)
            ):
                levels.rows.append(
                    {
                        "delta": float(delta),
                        "level": level,
                        "full": float(full),
                        "effective": float(eff),
                        "error": float(err),
                    }
                )
            bulk = comparison.bulk_max_abs_error
            summary.rows.append(
                {
                    "delta": float(delta),
                    "max_abs_error": comparison.max_abs_error,
                    "bulk_max_abs_error": "" if bulk is None else bulk,
                    "band_gap": comparison.band_gap,
                }
            )
        return RunArtifacts(tables=[summary, levels])

    def _sweep(self) -> RunArtifacts:
        block = self.recipe["sweep"]
        observable = block["observable"]
        cfg = disorder_from_config(block, self.recipe["seed"])
        kwargs: Dict[str, Any] = {}
        if observable == "berry":
            kwargs["grid"] = grid_from_config(self.recipe["berry"])
            kwargs["sel"] = selector_from_config(self.recipe["berry"]["selector"])
            kwargs["occupancy"] = self._occupancy()
        else:
            kwargs["recipe"] = self._walk_recipe()
        result = run_sweep(
            self.spec,
            block["deltas"],
            block["amplitudes"],
            cfg,
            observable=observable,
            estimator=block["estimator"],
            n_jobs=self.n_jobs,
            **kwargs,
        )
        columns = [
            "delta",
            "W",
            "statistic",
            "mean",
            "stderr",
            "resultant",
            "count",
            "failures",
            "valid",
        ]
        return RunArtifacts(tables=[Table("sweep", columns, result.to_rows())])

    def validate(self) -> List[Diagnostic]:
        """Preflight warnings only; a clean recipe returns an empty list."""
        return self.preflight()[0]

    def preflight(self) -> Tuple[List[Diagnostic], List[Diagnostic]]:
        """(warnings, info) from the sector estimates and preflight checks; never raises."""
        diagnostics: List[Diagnostic] = []
        try:
            diagnostics += self._sector_diagnostics()
            if self.command == "walk" or (
                self.command == "sweep" and self.recipe["sweep"]["observable"] != "berry"
            ):
                diagnostics += self._boundary_diagnostics()
            if self.command == "berry" or (
                self.command == "sweep" and self.recipe["sweep"]["observable"] == "berry"
            ):
                diagnostics += self._gap_diagnostics()
        except (SSHHError, ValueError) as e:
            diagnostics.append(Diagnostic(WARNING, "preflight", str(e)))

        for d in diagnostics:
            log = logger.warning if d.level == WARNING else logger.info
            log(f"[{d.code}] {d.message}")
        warnings = [d for d in diagnostics if d.level == WARNING]
        info = [d for d in diagnostics if d.level != WARNING]
        return warnings, info

    def _sector(self) -> Tuple[FlavorOccupancy, str, int]:
        uses_walk = self.command == "walk" or (
            self.command == "sweep" and self.recipe["sweep"]["observable"] != "berry"
        )
        if uses_walk:
            recipe = self._walk_recipe()
            propagator = recipe.propagator
            occupancy = occupancy_of(recipe.placements, self.spec.n_flavors)
            return occupancy, propagator.method, propagator.krylov_dim
        return self._occupancy(), "dense", 0

    def _sector_diagnostics(self) -> List[Diagnostic]:
        occupancy, method, krylov_dim = self._sector()
        dimension = occupancy.dimension(self.spec.L)
        memory = estimate_memory(dimension, occupancy.total, method, krylov_dim)
        diagnostics = [
            Diagnostic(
                INFO,
                "dimension",
                f"Sector {occupancy.particles_per_flavor} on L={self.spec.L}: {dimension} states",
            ),
            Diagnostic(INFO, "memory", f"Estimated peak memory {memory / 2**30:.3f} GiB"),
        ]
        factors = " x ".join(
            str(math.comb(self.spec.L, n)) for n in occupancy.particles_per_flavor
        )
        if dimension > DEFAULT_DIMENSION_CAP:
            diagnostics.append(
                Diagnostic(
                    WARNING,
                    "capacity",
                    f"Dimension {dimension} ({factors}) exceeds the cap {DEFAULT_DIMENSION_CAP}",
                )
            )
        elif memory > MEMORY_WARNING_BYTES:
            diagnostics.append(
                Diagnostic(
                    WARNING,
                    "capacity",
                    f"Dimension {dimension} ({factors}) needs about {memory / 2**30:.1f} GiB",
                )
            )
        if method != KRYLOV and dimension > self._dense_cap():
            diagnostics.append(
                Diagnostic(
                    WARNING,
                    "capacity",
                    f"Dimension {dimension} is above the dense diagonalization cap "
                    f"{self._dense_cap()}",
                )
            )
        return diagnostics

    def _dense_cap(self) -> int:
        if self.command == "spectrum":
            return int(self.recipe["spectrum"]["dense_cap"])
        return DENSE_DIMENSION_CAP

    def _boundary_diagnostics(self) -> List[Diagnostic]:
        recipe = self._walk_recipe()
        diagnostics = []
        deltas = self._deltas("sweep" if self.command == "sweep" else "walk")
        for delta in deltas:
            spec = self.spec.replace(delta=delta)
            velocity = recipe.front_velocity_estimate(spec)
            arrival = boundary_time(spec, recipe.injection_site, velocity)
            t_max = resolve_t_max(spec, recipe).t_max
            if t_max > arrival:
                diagnostics.append(
                    Diagnostic(
                        WARNING,
                        "reflection",
                        f"delta={delta:+.3f}: t_max={t_max} exceeds the boundary arrival "
                        f"time {arrival:.2f}; reflected fronts will distort the polarization",
                    )
                )
        return diagnostics

    def _gap_diagnostics(self) -> List[Diagnostic]:
        block = self.recipe["berry"]
        occupancy = self._occupancy()
        dimension = occupancy.dimension(self.spec.L)
        if dimension > DENSE_DIMENSION_CAP:
            return [Diagnostic(INFO, "gap", "Gap preflight skipped: sector too large")]

        basis = enumerate_basis(self.spec, occupancy)
        sel = selector_from_config(block["selector"])
        mask = block.get("flavor_mask")
        deltas = self._deltas("sweep" if self.command == "sweep" else "berry")
        diagnostics = []
        for delta in deltas:
            result = single_point_berry(
                self.spec.replace(delta=delta),
                basis,
                sel,
                flavor_mask=mask,
                gap_floor=block["gap_floor"],
                gap_policy="flag",
            )
            if result.min_gap < block["gap_floor"]:
                diagnostics.append(
                    Diagnostic(
                        WARNING,
                        "gap",
                        f"delta={delta:+.3f}: subset {sel.describe()} is not gapped at "
                        f"theta=0 (gap {result.min_gap:.2e})",
                    )
                )
        return diagnostics


def summarize(
    diagnostics: Sequence[Diagnostic], info: Sequence[Diagnostic] = ()
) -> Dict[str, Any]:
    """JSON-ready summary of :meth:`ExperimentRunner.preflight` output."""

    def records(items: Sequence[Diagnostic]) -> List[Dict[str, str]]:
        return [{"level": d.level, "code": d.code, "message": d.message} for d in items]

    return {
        "warnings": sum(d.level == WARNING for d in diagnostics),
        "diagnostics": records(diagnostics),
        "info": records(info),
    }


def run_recipe(recipe: Dict[str, Any], n_jobs: int = 1) -> RunArtifacts:
    """Convenience wrapper: compute a resolved recipe in memory."""
    return ExperimentRunner(recipe, n_jobs).compute()
