"""Computational toolkit for Delone sets of finite type.

Windowed point sets, patch atlases, Voronoi localization, repetitivity
estimates, the Delone metric, and local derivation factor maps, with
empirical checks of the structural bounds these constructions satisfy.
"""

from .core import (
    ETA,
    CloudClassifier,
    Patch,
    PatchClass,
    WindowedDeloneSet,
    build_windowed_set,
    canonical_class,
    estimate_delone_params,
    extract_patch,
    patch_translation_match,
)
from .errors import DeloneError

__version__ = "0.1.0"

__all__ = [
    "ETA",
    "CloudClassifier",
    "DeloneError",
    "Patch",
    "PatchClass",
    "WindowedDeloneSet",
    "build_windowed_set",
    "canonical_class",
    "estimate_delone_params",
    "extract_patch",
    "patch_translation_match",
    "__version__",
]
