#!/usr/bin/env python3
"""Built-in sweep recipes for the standard phase, visibility and resolution curves.

Each recipe is a config layer that sits between the built-in defaults and a
user's spec file. Parameters without a natural choice are pinned here:

- Cavity length L = 1 (dimensionless units, c = 1). With β = 2 and a resonant
  atom the probed mode is even, so its rotating-wave amplitude cancels.
- Probe speed 1000 m/s and coupling λ = 1e-4 unless the recipe overrides them.
- The squeezed coherent phase and visibility curves use L = 6, and Ψ = π on the
  r axis. The phase then rises monotonically in r and saturates near π/2 by
  r = 5.
- The stability recipe uses L = 1.3e-5, where P_e(ε = 1e-3) sits near 1e-14.

Every recipe is also registered under the label of the published curve it
regenerates (fig2-left … fig9), see FIGURE_ALIASES.

The reproduced curves match in shape and order of magnitude, not point by point.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Final

from .common import ConfigError
from .sweep import ConfigValue, parse_layer

TWO_PI = 2.0 * math.pi

# The squeezed coherent phase scales as λ²L²/v
SQUEEZED_LENGTH: Final = 6.0


@dataclass(frozen=True)
class Recipe:
    """A named config layer with a one-line description."""

    name: str
    description: str
    values: dict[str, ConfigValue] = field(default_factory=dict)

    def layer(self) -> dict[str, ConfigValue]:
        """Validated config layer, with the recipe name as default title."""
        values = parse_layer(self.values)
        values.setdefault("title", self.name)
        values.setdefault("output", f"{self.name}.csv")
        return values


# Squeezed coherent grids over Ψ, r and |α|, shared by phase and visibility
_PHASE_PSI = {
    "parameter": "psi",
    "grid_min": 0.0,
    "grid_max": TWO_PI,
    "points": 73,
    "endpoint": False,
    "state": "squeezed_coherent",
    "length": SQUEEZED_LENGTH,
    "r": 1.0,
    "magnitude": 1.0,
}
# Ψ = π keeps ⟨a†a⟩ = sinh²r + e^{2r} increasing from r = 0
_PHASE_R = {
    "parameter": "r",
    "grid_min": 0.0,
    "grid_max": 10.0,
    "points": 101,
    "state": "squeezed_coherent",
    "length": SQUEEZED_LENGTH,
    "magnitude": 1.0,
    "psi": math.pi,
}
_PHASE_MAGNITUDE = {
    "parameter": "magnitude",
    "grid_min": 0.0,
    "grid_max": 2000.0,
    "points": 101,
    "state": "squeezed_coherent",
    "length": SQUEEZED_LENGTH,
    "r": 1.0,
}

RECIPES: dict[str, Recipe] = {
    recipe.name: recipe
    for recipe in (
        Recipe(
            "phase-psi",
            "Phase of a squeezed coherent state (r = |α| = 1) against Ψ",
            {"observable": "phase", **_PHASE_PSI},
        ),
        Recipe(
            "phase-squeeze",
            "Phase of a squeezed coherent state (|α| = 1) against r",
            {"observable": "phase", **_PHASE_R},
        ),
        Recipe(
            "phase-magnitude",
            "Phase of a squeezed coherent state (r = 1) against |α|",
            {"observable": "phase", **_PHASE_MAGNITUDE},
        ),
        Recipe(
            "coherent-phase",
            "Phase of a coherent state against |α|",
            {
                "observable": "phase",
                "parameter": "magnitude",
                "grid_min": 0.0,
                "grid_max": 2000.0,
                "points": 81,
                "state": "coherent",
            },
        ),
        Recipe(
            "visibility-psi",
            "Visibility of the phase-psi states against Ψ",
            {"observable": "visibility", **_PHASE_PSI},
        ),
        Recipe(
            "visibility-squeeze",
            "Visibility of the phase-squeeze states against r",
            {"observable": "visibility", **_PHASE_R},
        ),
        Recipe(
            "visibility-magnitude",
            "Visibility of the phase-magnitude states against |α|",
            {"observable": "visibility", **_PHASE_MAGNITUDE},
        ),
        Recipe(
            "resolution-psi",
            "Resolution between Ψ and Ψ + δΨ, r = |α| = 1, δΨ = 0.1π … 0.5π",
            {
                "observable": "resolution",
                "gap": "psi",
                "parameter": "psi",
                "grid_min": 0.0,
                "grid_max": TWO_PI,
                "points": 73,
                "endpoint": False,
                "state": "squeezed_coherent",
                "r": 1.0,
                "magnitude": 1.0,
                "family_parameter": "delta",
                "family_values": [k * 0.1 * math.pi for k in (5, 4, 3, 2, 1)],
            },
        ),
        Recipe(
            "resolution-coherent",
            "Resolution between coherent states |α| and |α| + δα, δα = 1 … 5",
            {
                "observable": "resolution",
                "gap": "magnitude",
                "parameter": "magnitude",
                "grid_min": 0.0,
                "grid_max": 10.0,
                "points": 51,
                "state": "coherent",
                "family_parameter": "delta",
                "family_values": [1.0, 2.0, 3.0, 4.0, 5.0],
            },
        ),
        Recipe(
            "resolution-squeeze",
            "Resolution between squeezed vacua r and r + δr, δr = 1 … 5",
            {
                "observable": "resolution",
                "gap": "squeeze",
                "parameter": "r",
                "grid_min": 0.0,
                "grid_max": 5.0,
                "points": 51,
                "state": "squeezed_vacuum",
                "magnitude": 0.0,
                "family_parameter": "delta",
                "family_values": [1.0, 2.0, 3.0, 4.0, 5.0],
            },
        ),
        Recipe(
            "resolution-fock",
            "Resolution between Fock states n and n + m against a coherent reference",
            {
                "observable": "resolution",
                "gap": "fock",
                "parameter": "n",
                "grid_min": 0.0,
                "grid_max": 20.0,
                "points": 21,
                "state": "fock",
                "coupling": 1e-6,
                "family_parameter": "m",
                "family_values": [5.0, 10.0, 15.0, 20.0, 25.0],
            },
        ),
        Recipe(
            "switching-stability",
            "Excitation probability under linear switching against ε",
            {
                "observable": "stability",
                "parameter": "epsilon",
                "grid_min": 1e-5,
                "grid_max": 1e-2,
                "points": 13,
                "scale": "log",
                "length": 1.3e-5,
                "state": "coherent",
                "magnitude": 1.0,
            },
        ),
    )
}


# Published curve labels
FIGURE_ALIASES: Final = {
    "fig2-left": "phase-psi",
    "fig2-mid": "phase-squeeze",
    "fig2-right": "phase-magnitude",
    "fig3": "coherent-phase",
    "fig4-left": "visibility-psi",
    "fig4-mid": "visibility-squeeze",
    "fig4-right": "visibility-magnitude",
    "fig5": "resolution-psi",
    "fig6": "resolution-coherent",
    "fig7": "resolution-squeeze",
    "fig8": "resolution-fock",
    "fig9": "switching-stability",
}


def recipe_names() -> list[str]:
    """Descriptive names first, then the figure labels."""
    return [*RECIPES, *FIGURE_ALIASES]


def get_recipe(name: str) -> Recipe:
    """Look up a recipe by name or figure label.

    A figure label returns the same values under that label, so titles and
    output files follow the name asked for.

    Raises:
        ConfigError: If no recipe has that name
    """
    if name in FIGURE_ALIASES:
        return dataclasses.replace(RECIPES[FIGURE_ALIASES[name]], name=name)
    try:
        return RECIPES[name]
    except KeyError:
        known = ", ".join(recipe_names())
        raise ConfigError(f"unknown recipe {name!r}; known recipes: {known}") from None
