"""Difficulty-level feature matrix for the five dataset subsets."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class LevelConfig:
    """Feature switches for one difficulty level.

    Feature sets are nested: each level keeps everything below it and adds
    one ingredient (folds, lumen deformation, irregularities + specular,
    texture).  The polyp shape upgrades from a plain sphere to a radially
    deformed one at level 3.
    """

    level: int
    folds: bool
    deformed_lumen: bool
    surface_irregularities: bool
    specular: bool
    texture: bool
    polyp_variant: str   # "sphere" | "deformed"

    def __post_init__(self):
        if self.polyp_variant not in ("sphere", "deformed"):
            raise ValueError("polyp_variant must be 'sphere' or 'deformed'")


_LEVELS = {
    1: LevelConfig(1, folds=False, deformed_lumen=False, surface_irregularities=False,
                   specular=False, texture=False, polyp_variant="sphere"),
    2: LevelConfig(2, folds=True, deformed_lumen=False, surface_irregularities=False,
                   specular=False, texture=False, polyp_variant="sphere"),
    3: LevelConfig(3, folds=True, deformed_lumen=True, surface_irregularities=False,
                   specular=False, texture=False, polyp_variant="deformed"),
    4: LevelConfig(4, folds=True, deformed_lumen=True, surface_irregularities=True,
                   specular=True, texture=False, polyp_variant="deformed"),
    5: LevelConfig(5, folds=True, deformed_lumen=True, surface_irregularities=True,
                   specular=True, texture=True, polyp_variant="deformed"),
}


def level_config(level: int) -> LevelConfig:
    """The feature configuration for difficulty level 1..5."""
    if level not in _LEVELS:
        raise ValueError(f"level must be 1..5, got {level}")
    return _LEVELS[level]
