from .checks import (AInftyReport, EtaReport, LocalizationReport, PreconditionError, ReverseHolderReport,
                     adversarial_union, ainfty_shrinking_check, ball_elements, eta_check, judge_union,
                     local_partition, localization_check, random_unions, reverse_holder_check,
                     reverse_holder_constant, reverse_holder_refinement)
from .fractal import (DensitySweep, DimensionEstimate, ball_measure, box_dimension, density_blowup_sweep,
                      measure_dimension, prefractal_elements, separation_confidence, similarity_dimension)
from .wos import (DensityProfile, MeasureEstimate, Partition, angle_partition, auto_pole, density_profile,
                  disk_arc_probability, element_partition, face_partition, grid_partition, make_partition,
                  order_partition, walk_on_spheres)

__all__ = [
    "AInftyReport", "DensityProfile", "DensitySweep", "DimensionEstimate", "EtaReport", "LocalizationReport",
    "MeasureEstimate", "Partition", "PreconditionError", "ReverseHolderReport", "adversarial_union",
    "ainfty_shrinking_check", "angle_partition", "auto_pole", "ball_elements", "ball_measure", "box_dimension",
    "density_blowup_sweep", "density_profile", "disk_arc_probability", "element_partition", "eta_check",
    "face_partition", "grid_partition", "judge_union", "local_partition", "localization_check",
    "make_partition", "measure_dimension", "order_partition", "prefractal_elements", "random_unions",
    "reverse_holder_check", "reverse_holder_constant", "reverse_holder_refinement", "separation_confidence",
    "similarity_dimension", "walk_on_spheres",
]
