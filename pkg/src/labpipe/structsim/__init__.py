from .structures import (
    AtomicStructure,
    COVALENT_RADII,
    SPECIES_COLORS,
    StructureError,
    covalent_radius,
    min_image_distances,
)
from .plans import (
    BuildPlan,
    Displace,
    InstructionConflict,
    MakeLattice,
    MakeSupercell,
    PlanError,
    PRESETS,
    RemoveAtoms,
    Selector,
    SelectorEmpty,
    SetVacuum,
    Substitute,
    UnknownPreset,
    execute_plan,
)
from .validate import Issue, ValidationReport, validate
from .render import RenderSet, TooManyAtoms, render_views
from .generate import Attempt, Unresolved, generate_structure, plan_from_request

__all__ = [
    "AtomicStructure",
    "Attempt",
    "BuildPlan",
    "COVALENT_RADII",
    "Displace",
    "InstructionConflict",
    "Issue",
    "MakeLattice",
    "MakeSupercell",
    "PlanError",
    "PRESETS",
    "RemoveAtoms",
    "RenderSet",
    "Selector",
    "SelectorEmpty",
    "SetVacuum",
    "SPECIES_COLORS",
    "StructureError",
    "Substitute",
    "TooManyAtoms",
    "UnknownPreset",
    "Unresolved",
    "ValidationReport",
    "covalent_radius",
    "execute_plan",
    "generate_structure",
    "min_image_distances",
    "plan_from_request",
    "render_views",
    "validate",
]
