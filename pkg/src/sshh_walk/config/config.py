"""
Experiment recipes for sshh-walk.

A recipe is a JSON dictionary naming one command and the blocks it needs.
Missing keys are filled from a frozen, versioned defaults table so that a
resolved recipe fully determines a run.
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..core.berry import BAND_TAG, SubsetSelector, TwistGrid
from ..core.dynamics import PropagatorConfig
from ..core.ensemble import DisorderConfig
from ..core.exceptions import RecipeError
from ..core.lattice import FlavorOccupancy, LatticeSpec
from ..core.walks import WalkRecipe, default_injection_site, setup_injections
from ..utils.output import read_header

logger = logging.getLogger(__name__)

DEFAULTS_VERSION = 1

COMMANDS = ("spectrum", "walk", "berry", "effcmp", "sweep")
OUTPUT_FORMATS = ("csv", "json")

_SPEC_DEFAULTS: Dict[str, Any] = {
    "L": 8,
    "J": 1.0,
    "delta": 0.0,
    "U": 0.0,
    "mu": 0.0,
    "n_flavors": 1,
    "boundary": "periodic",
    "hopping_disorder": None,
    "onsite_disorder": None,
}

_PROPAGATOR_DEFAULTS: Dict[str, Any] = {
    "method": "krylov",
    "dt": 0.05,
    "t_max": 10.0,
    "krylov_dim": 30,
    "tolerance": 1e-10,
    "record_stride": None,
    "store_states": False,
}

_SELECTOR_DEFAULTS: Dict[str, Any] = {
    "mode": BAND_TAG,
    "band_tag": "lower_trion",
    "start": None,
    "stop": None,
    "stop_shift": 0,
}

_BLOCK_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "spectrum": {
        "eigenvectors": False,
        "dump_operator": False,
        "dense_cap": 20000,
    },
    "walk": {
        "setup": "nion",
        "site": None,
        "sites": None,
        "placements": None,
        "origin": "injection",
        "nion_floor": 1e-6,
        "cap_t_max": False,
        "density": True,
        "deltas": None,
        "propagator": _PROPAGATOR_DEFAULTS,
    },
    "berry": {
        "M": 20,
        "flavor_mask": None,
        "selector": _SELECTOR_DEFAULTS,
        "gap_floor": 1e-8,
        "gap_policy": "raise",
        "per_state": False,
        "deltas": None,
    },
    "effcmp": {
        "deltas": None,
    },
    "sweep": {
        "observable": "berry",
        "deltas": [0.0],
        "amplitudes": [0.0],
        "kind": "hopping",
        "realizations": 1,
        "estimator": "circular",
    },
}

# Blocks each command reads besides its own.
_REQUIRED_BLOCKS: Dict[str, List[str]] = {
    "spectrum": ["spectrum"],
    "walk": ["walk"],
    "berry": ["berry"],
    "effcmp": ["effcmp"],
    "sweep": ["sweep", "berry", "walk"],
}

# Keys whose value is a free-form dictionary or list rather than a sub-block.
_FREE_KEYS = {"boundary", "occupancy", "placements", "sites", "deltas", "amplitudes"}


def create_default_config(command: str = "berry") -> Dict[str, Any]:
    """Create a default recipe for ``command``."""
    if command not in COMMANDS:
        raise RecipeError(f"Unknown command: {command!r}; expected one of {COMMANDS}")
    config: Dict[str, Any] = {
        "command": command,
        "version": DEFAULTS_VERSION,
        "seed": 0,
        "spec": copy.deepcopy(_SPEC_DEFAULTS),
        "occupancy": None,
        "output": {"dir": ".", "format": "csv"},
    }
    for block in _REQUIRED_BLOCKS[command]:
        config[block] = copy.deepcopy(_BLOCK_DEFAULTS[block])
    return config


def _merge(defaults: Dict[str, Any], overrides: Dict[str, Any], path: str) -> Dict[str, Any]:
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise RecipeError(f"Unknown recipe key: {where}")
        if isinstance(defaults[key], dict) and key not in _FREE_KEYS:
            if not isinstance(value, dict):
                raise RecipeError(f"{where} must be an object")
            merged[key] = _merge(defaults[key], value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_recipe(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Deep-merge ``raw`` over the defaults of its command and validate it."""
    if not isinstance(raw, dict):
        raise RecipeError("A recipe must be a JSON object")
    command = raw.get("command")
    if command is None:
        raise RecipeError("Missing required configuration key: command")
    version = raw.get("version", DEFAULTS_VERSION)
    if version != DEFAULTS_VERSION:
        raise RecipeError(
            f"Recipe targets defaults version {version}, this build has {DEFAULTS_VERSION}"
        )
    recipe = _merge(create_default_config(command), raw, "")
    validate_config(recipe)
    return recipe


def _checked(what: str, build: Any, *args: Any) -> Any:
    try:
        return build(*args)
    except RecipeError:
        raise
    except (ValueError, TypeError, KeyError) as e:
        raise RecipeError(f"Invalid {what}: {e}") from e


def spec_from_config(recipe: Dict[str, Any]) -> LatticeSpec:
    return _checked("spec", LatticeSpec.from_dict, recipe["spec"])


def occupancy_from_config(
    recipe: Dict[str, Any], spec: Optional[LatticeSpec] = None
) -> FlavorOccupancy:
    """Explicit occupancy, or one particle per flavor."""
    spec = spec or spec_from_config(recipe)
    counts = recipe.get("occupancy")
    if counts is None:
        return FlavorOccupancy.one_per_flavor(spec.n_flavors)
    occupancy = _checked("occupancy", lambda: FlavorOccupancy(tuple(counts)))
    _checked("occupancy", occupancy.check, spec)
    return occupancy


def propagator_from_config(block: Dict[str, Any]) -> PropagatorConfig:
    return _checked("propagator", lambda b: PropagatorConfig(**b), block)


def grid_from_config(block: Dict[str, Any]) -> TwistGrid:
    def build() -> TwistGrid:
        mask = block.get("flavor_mask")
        return TwistGrid(int(block["M"]), None if mask is None else tuple(mask))

    return _checked("twist grid", build)


def selector_from_config(block: Dict[str, Any]) -> SubsetSelector:
    def build() -> SubsetSelector:
        return SubsetSelector(
            block["mode"],
            block.get("start"),
            block.get("stop"),
            block.get("band_tag"),
            int(block.get("stop_shift", 0)),
        )

    return _checked("subset selector", build)


def disorder_from_config(block: Dict[str, Any], seed: int, W: float = 0.0) -> DisorderConfig:
    """Disorder settings of a sweep block at amplitude ``W``."""

    def build() -> DisorderConfig:
        return DisorderConfig(float(W), block["kind"], int(block["realizations"]), int(seed))

    return _checked("disorder", build)


def walk_recipe_from_config(block: Dict[str, Any], spec: LatticeSpec) -> WalkRecipe:
    """Placements from an explicit list or a named setup, plus propagation settings."""

    def build() -> WalkRecipe:
        if block.get("placements") is not None:
            placements = tuple((int(s), int(a)) for s, a in block["placements"])
        else:
            site = block.get("site")
            site = default_injection_site(spec.L) if site is None else int(site)
            placements = setup_injections(
                block["setup"], spec.n_flavors, site, block.get("sites")
            )
        return WalkRecipe(
            placements=placements,
            propagator=propagator_from_config(block["propagator"]),
            origin=block["origin"],
            nion_floor=float(block["nion_floor"]),
            cap_t_max=bool(block["cap_t_max"]),
        )

    recipe = _checked("walk", build)
    for site, flavor in recipe.placements:
        if not (0 <= site < spec.L and 0 <= flavor < spec.n_flavors):
            raise RecipeError(f"Placement ({site}, {flavor}) lies outside the lattice")
    return recipe


def _check_deltas(block: str, deltas: Any) -> None:
    if deltas is None:
        return
    valid = isinstance(deltas, list) and all(
        isinstance(d, (int, float)) and not isinstance(d, bool) and abs(d) < 1 for d in deltas
    )
    if not valid:
        raise RecipeError(f"{block}.deltas must be a list of values in (-1, 1)")


def validate_config(recipe: Dict[str, Any]) -> bool:
    """Validate a resolved recipe; raises :class:`RecipeError` on schema violations."""
    required_keys = ["command", "version", "seed", "spec", "output"]
    for key in required_keys:
        if key not in recipe:
            raise RecipeError(f"Missing required configuration key: {key}")

    command = recipe["command"]
    if command not in COMMANDS:
        raise RecipeError(f"Unknown command: {command!r}")
    for block in _REQUIRED_BLOCKS[command]:
        if not isinstance(recipe.get(block), dict):
            raise RecipeError(f"Command {command} needs a {block} block")
    seed = recipe["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise RecipeError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    if recipe["output"].get("format") not in OUTPUT_FORMATS:
        raise RecipeError(f"output.format must be one of {OUTPUT_FORMATS}")

    if command == "sweep" and recipe["sweep"]["observable"] not in ("berry", "polarization"):
        raise RecipeError(f"Unknown sweep observable: {recipe['sweep']['observable']}")

    spec = spec_from_config(recipe)
    occupancy_from_config(recipe, spec)
    for block in _REQUIRED_BLOCKS[command]:
        _check_deltas(block, recipe[block].get("deltas"))

    if command == "walk" or (command == "sweep" and recipe["sweep"]["observable"] != "berry"):
        walk_recipe_from_config(recipe["walk"], spec)
    if command == "berry" or (command == "sweep" and recipe["sweep"]["observable"] == "berry"):
        grid_from_config(recipe["berry"])
        selector_from_config(recipe["berry"]["selector"])
        if recipe["berry"]["gap_policy"] not in ("raise", "flag"):
            raise RecipeError(f"Unknown gap policy: {recipe['berry']['gap_policy']}")
        if spec.boundary.is_open:
            raise RecipeError("Berry phases need a periodic or twisted boundary")
    if command == "sweep":
        sweep = recipe["sweep"]
        if sweep["estimator"] not in ("circular", "folded"):
            raise RecipeError(f"Unknown phase estimator: {sweep['estimator']}")
        amplitudes = sweep["amplitudes"]
        if not isinstance(amplitudes, list) or not amplitudes:
            raise RecipeError("sweep.amplitudes must be a non-empty list of W >= 0")
        if any(not isinstance(W, (int, float)) or W < 0 for W in amplitudes):
            raise RecipeError("sweep.amplitudes must be a non-empty list of W >= 0")
        for W in sweep["amplitudes"]:
            disorder_from_config(sweep, seed, W)
    return True


def load_recipe(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load a recipe from a JSON file or from the header of a previous output.

    Output files (CSV with a ``#`` header, or JSON tables) carry the resolved
    recipe that produced them, so they can be passed back in to replay a run.
    """
    path = Path(path)
    logger.info(f"Loading recipe from {path}")
    try:
        text = path.read_text()
    except OSError as e:
        raise RecipeError(f"Cannot read recipe {path}: {e}") from e

    if text.lstrip().startswith("#"):
        raw = read_header(path)["recipe"]
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise RecipeError(f"Recipe {path} is not valid JSON: {e}") from e
        if isinstance(raw, dict) and "header" in raw and "rows" in raw:
            raw = raw["header"]["recipe"]
    return resolve_recipe(raw)


def dump_recipe(recipe: Dict[str, Any]) -> str:
    return json.dumps(recipe, indent=2, sort_keys=True)


def save_recipe(recipe: Dict[str, Any], path: Union[str, Path]) -> None:
    Path(path).write_text(dump_recipe(recipe) + "\n")
