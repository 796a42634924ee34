"""Inner approximation of a boundary patch by a Lipschitz graph domain."""
from .cells import StarCell, StarCover, angle_function, centers_per_axis, star_cells
from .maximal import MaximalDiagnostics, maximal_diagnostics, maximal_function
from .patch import (ConstructionError, LipschitzPatch, Trapezoid, TrapezoidPart, build_patch, cone_filter,
                    extract_T, graph_and_domain, patch_frame, sampling_convergence, top_edge)
from .schedule import ParameterSchedule, PowerOfTwo, parameter_schedule, rounds_needed

__all__ = [
    "ConstructionError", "LipschitzPatch", "MaximalDiagnostics", "ParameterSchedule", "PowerOfTwo",
    "StarCell", "StarCover", "Trapezoid", "TrapezoidPart", "angle_function", "build_patch",
    "centers_per_axis", "cone_filter", "extract_T", "graph_and_domain", "maximal_diagnostics",
    "maximal_function", "parameter_schedule", "patch_frame", "rounds_needed", "sampling_convergence",
    "star_cells", "top_edge",
]
