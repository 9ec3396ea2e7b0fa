"""Bounds, relaxation and design tools for optimal three-material 2D elastic composites.

Phases are isotropic with zero Poisson ratio, so a phase is fully described by its
compliance ``kappa`` (energy ``0.5 * kappa * Tr(sigma**2)``). Void is ``kappa = inf``.
"""

from .tensor import StressTensor, eigen, invariants, rank_one_gap
from .bounds import (
    Phase,
    PhaseSet,
    SupportSet,
    compatibility_check,
    hs_bound,
    mean_field_check,
    modified_translation_bound,
    multiwell_lagrangian,
    three_material_bound,
    three_material_thresholds,
    translated_well,
    well_energy,
    wiener_bound,
)
from .envelope import (
    EnvelopePoint,
    envelope_eval,
    envelope_oracle,
    gamma_interval,
    strain_curve,
    thresholds,
)
from .laminate import (
    ComplianceMap,
    Lam,
    Leaf,
    best_in_catalog,
    evaluate_structure,
    laminate_pair,
    optimize_at_fractions,
    regime_map,
)
from .cellfem import CellGrid, attainability_report, homogenize, rasterize
from .topopt import DesignProblem, baselines, export_design, solve_design
from .cli import run

__version__ = "0.1.0"
