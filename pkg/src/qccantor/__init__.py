"""Cantor-type sets and the quasiconformal maps that move them.

The package builds nested disk constructions, evaluates the piecewise radial
stretch maps between source and target sets, and checks distortion and
Hausdorff-measure bounds numerically at finite depth.
"""

from .construction import ConstructionTree, build, generation_sum, level_identity, load_tree, save_tree
from .gauge import GaugeSpec, conjugate_dimension, power_gauge, target_gauge
from .measure import (lower_bound_certificate, survey_packing, upper_content)
from .packing import PackingLayer, pack_disk
from .qcmap import apply_generation, distortion_report, phi_eval, radial_stretch, RadialStretchSpec
from .sigma_finite import glue_plan, verify_glue

__version__ = "0.1.0"

__all__ = [
    "ConstructionTree", "GaugeSpec", "PackingLayer", "RadialStretchSpec", "apply_generation", "build",
    "conjugate_dimension", "distortion_report", "generation_sum", "glue_plan", "level_identity",
    "load_tree", "lower_bound_certificate", "pack_disk", "phi_eval", "power_gauge", "radial_stretch",
    "save_tree", "survey_packing", "target_gauge", "upper_content", "verify_glue",
]
