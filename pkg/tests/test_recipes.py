"""Tests for recipes module."""

import pytest


class TestRecipes:
    """Test the built-in recipe layers."""

    def test_every_recipe_builds(self):
        """Test each layer merges into a valid sweep spec."""
        from mode_invisibility.recipes import get_recipe, recipe_names
        from mode_invisibility.sweep import SweepSpec, merge_config

        names = recipe_names()
        assert len(names) == 24
        assert len(set(names)) == 24
        for name in names:
            recipe = get_recipe(name)
            spec = SweepSpec.from_config(merge_config(recipe.layer()))
            assert spec.fixed["title"] == name
            assert spec.output is not None and spec.output.name == f"{name}.csv"

    def test_figure_labels(self):
        """Test figure labels resolve to the descriptive recipes."""
        from mode_invisibility.recipes import FIGURE_ALIASES, get_recipe, recipe_names

        names = recipe_names()
        for label in ("fig2-left", "fig2-mid", "fig2-right", "fig3", "fig9"):
            assert label in names
        for label in ("fig4-left", "fig4-mid", "fig4-right"):
            assert label in names
        for label in ("fig5", "fig6", "fig7", "fig8"):
            assert label in names
        for label, name in FIGURE_ALIASES.items():
            recipe = get_recipe(label)
            assert recipe.name == label
            assert recipe.values == get_recipe(name).values
            assert recipe.description == get_recipe(name).description
        assert get_recipe("fig3").layer()["output"] == "fig3.csv"

    def test_layer_does_not_override_user_title(self):
        from mode_invisibility.recipes import Recipe

        layer = Recipe("demo", "demo", {"title": "mine"}).layer()
        assert layer["title"] == "mine"
        assert layer["output"] == "demo.csv"

    def test_families(self):
        from mode_invisibility.recipes import get_recipe
        from mode_invisibility.sweep import SweepSpec, merge_config

        layer = get_recipe("resolution-fock").layer()
        spec = SweepSpec.from_config(merge_config(layer))
        assert spec.family_parameter == "m"
        assert spec.family_values == (5.0, 10.0, 15.0, 20.0, 25.0)
        assert spec.grid.values()[-1] == 20.0

    def test_stability_recipe_stays_below_switch_off(self):
        """Test ε T < 1 on the whole switching grid."""
        from mode_invisibility.recipes import get_recipe
        from mode_invisibility.sweep import SweepSpec, build_setup, merge_config

        spec = SweepSpec.from_config(
            merge_config(get_recipe("switching-stability").layer())
        )
        setup = build_setup(spec.fixed)
        assert max(spec.grid.values()) * setup.flight_time < 1.0

    def test_coherent_phase_is_monotone(self):
        """Test a coarse coherent-phase curve rises with |α|."""
        from mode_invisibility.recipes import get_recipe
        from mode_invisibility.sweep import SweepSpec, merge_config, run_sweep

        layer = get_recipe("coherent-phase").layer()
        config = merge_config(layer, {"points": 5, "output": "", "svg": False})
        values = run_sweep(SweepSpec.from_config(config), threads=1).values()
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_squeeze_phase_flattens_beyond_five(self):
        """Test γ(r) rises monotonically and stops responding to r beyond r = 5."""
        import warnings

        import numpy as np

        from mode_invisibility.common import BranchWarning
        from mode_invisibility.recipes import get_recipe
        from mode_invisibility.sweep import SweepSpec, merge_config, run_sweep

        layer = get_recipe("fig2-mid").layer()
        config = merge_config(layer, {"points": 21, "output": "", "svg": False})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BranchWarning)
            result = run_sweep(SweepSpec.from_config(config), threads=2)
        r = np.array(result.parameters())
        gamma = np.array(result.values())

        assert np.all(np.diff(gamma) > 0.0)
        early = gamma[r <= 5.0 + 1e-9]
        late = gamma[r >= 5.0 - 1e-9]
        assert late[-1] - late[0] < 0.1 * (early[-1] - early[0])
        assert np.all(np.diff(late, 2) <= 1e-12)
        assert 1.4 < gamma[-1] < 1.6

    def test_unknown_recipe(self):
        from mode_invisibility.common import ConfigError
        from mode_invisibility.recipes import get_recipe

        with pytest.raises(ConfigError, match="unknown recipe"):
            get_recipe("nope")
