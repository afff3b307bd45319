"""
Tests for experiment recipes.
"""

import json

import pytest

from sshh_walk.config.config import (
    DEFAULTS_VERSION,
    create_default_config,
    disorder_from_config,
    load_recipe,
    resolve_recipe,
    save_recipe,
    validate_config,
    walk_recipe_from_config,
)
from sshh_walk.core.exceptions import RecipeError
from sshh_walk.core.lattice import LatticeSpec


def _berry(**changes):
    raw = {"command": "berry", "spec": {"L": 8, "n_flavors": 3, "U": 3.0}}
    raw.update(changes)
    return raw


class TestDefaults:
    """Test cases for create_default_config."""

    def test_blocks_per_command(self):
        """Test that each command gets its own blocks."""
        walk = create_default_config("walk")
        assert walk["walk"]["propagator"]["method"] == "krylov"
        assert "berry" not in walk
        sweep = create_default_config("sweep")
        assert {"sweep", "berry", "walk"} <= set(sweep)
        assert sweep["version"] == DEFAULTS_VERSION

    def test_unknown_command(self):
        """Test rejection of unknown commands."""
        with pytest.raises(RecipeError):
            create_default_config("plot")

    def test_defaults_validate(self):
        """Test that every default recipe is valid on its own."""
        for command in ("spectrum", "walk", "berry", "effcmp", "sweep"):
            assert validate_config(create_default_config(command))


class TestResolveRecipe:
    """Test cases for resolve_recipe."""

    def test_fills_defaults(self):
        """Test the deep merge over the defaults table."""
        recipe = resolve_recipe(_berry(berry={"selector": {"stop_shift": 1}}))
        assert recipe["berry"]["M"] == 20
        assert recipe["berry"]["selector"]["band_tag"] == "lower_trion"
        assert recipe["berry"]["selector"]["stop_shift"] == 1
        assert recipe["spec"]["delta"] == 0.0
        assert recipe["output"]["format"] == "csv"

    def test_unknown_key(self):
        """Test that misspelled keys are reported with their path."""
        with pytest.raises(RecipeError, match="berry.MM"):
            resolve_recipe(_berry(berry={"MM": 4}))

    def test_structural_errors(self):
        """Test missing commands, wrong versions and non-object blocks."""
        with pytest.raises(RecipeError):
            resolve_recipe({"spec": {"L": 8}})
        with pytest.raises(RecipeError):
            resolve_recipe(_berry(version=DEFAULTS_VERSION + 1))
        with pytest.raises(RecipeError):
            resolve_recipe(_berry(berry=5))
        with pytest.raises(RecipeError):
            resolve_recipe([1, 2])

    @pytest.mark.parametrize(
        "changes",
        [
            {"spec": {"L": 7}},
            {"spec": {"L": 8, "boundary": "helical"}},
            {"spec": {"L": 8, "boundary": "open"}},
            {"seed": -1},
            {"seed": True},
            {"output": {"format": "xml"}},
            {"occupancy": [1, 1]},
            {"berry": {"deltas": [1.5]}},
            {"berry": {"gap_policy": "ignore"}},
            {"berry": {"selector": {"band_tag": "upper_trion"}}},
        ],
    )
    def test_schema_violations(self, changes):
        """Test that invalid values become RecipeError."""
        with pytest.raises(RecipeError):
            resolve_recipe(_berry(**changes))

    def test_walk_placements(self):
        """Test placement bounds and setup flavor checks."""
        with pytest.raises(RecipeError):
            resolve_recipe({"command": "walk", "walk": {"placements": [[40, 0]]}})
        with pytest.raises(RecipeError):
            resolve_recipe(
                {"command": "walk", "spec": {"L": 8, "n_flavors": 2}, "walk": {"setup": "C"}}
            )

    def test_sweep_checks(self):
        """Test sweep observables, amplitudes and estimators."""
        assert resolve_recipe({"command": "sweep"})["sweep"]["realizations"] == 1
        for bad in (
            {"observable": "energy"},
            {"amplitudes": []},
            {"amplitudes": [-0.1]},
            {"estimator": "median"},
            {"kind": "bond"},
        ):
            with pytest.raises(RecipeError):
                resolve_recipe({"command": "sweep", "sweep": bad})


class TestBuilders:
    """Test cases for the recipe-to-object builders."""

    def test_default_injection(self):
        """Test that named setups default to sublattice A of cell L//4."""
        spec = LatticeSpec(L=30, U=3.0, n_flavors=3)
        block = create_default_config("walk")["walk"]
        block["setup"] = "C"
        recipe = walk_recipe_from_config(block, spec)
        assert recipe.placements == ((14, 0), (14, 1), (14, 2))
        block.update(setup="nion", sites=[14, 16])
        assert len(walk_recipe_from_config(block, spec).placements) == 6

    def test_disorder(self):
        """Test the disorder settings of a sweep block."""
        block = create_default_config("sweep")["sweep"]
        block.update(kind="onsite", realizations=10)
        cfg = disorder_from_config(block, 42, 0.5)
        assert (cfg.W, cfg.kind, cfg.realizations, cfg.seed) == (0.5, "onsite", 10, 42)


class TestRecipeFiles:
    """Test cases for loading and saving recipes."""

    def test_round_trip(self, tmp_path):
        """Test that a saved recipe loads back unchanged."""
        recipe = resolve_recipe(_berry(seed=7))
        path = tmp_path / "recipe.json"
        save_recipe(recipe, path)
        assert load_recipe(path) == recipe

    def test_shipped_recipes_resolve(self):
        """Test that the shipped recipes are valid."""
        from pathlib import Path

        recipes = sorted((Path(__file__).parent.parent / "recipes").glob("*.json"))
        assert recipes
        for path in recipes:
            assert load_recipe(path)["command"]

    def test_unreadable(self, tmp_path):
        """Test missing files and invalid JSON."""
        with pytest.raises(RecipeError):
            load_recipe(tmp_path / "missing.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(RecipeError):
            load_recipe(broken)

    def test_json_table_replay(self, tmp_path):
        """Test loading the recipe embedded in a JSON result table."""
        recipe = resolve_recipe(_berry())
        document = {"header": {"recipe": recipe}, "columns": [], "rows": []}
        path = tmp_path / "berry.json"
        path.write_text(json.dumps(document))
        assert load_recipe(path) == recipe
