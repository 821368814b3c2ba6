from .algebra import (BLADES, CAYLEY, EUCLIDEAN_MASK, GRADES, RigidMotion,
                      apply_motion, comp, embed_geometry, embed_plane,
                      embed_point, embed_scalar, embed_translation,
                      extract_plane, extract_point, extract_translation,
                      geometric_product, grade_project, reverse)
from .layers import (EQUI_BASIS, EquiLinear, EquiMLP, GATrBlock, SelfAttention,
                     apply_motion_tensor, equi_linear, gated_mv,
                     identity_weights, init_equi_weights, invariant_norm_sq,
                     mv_layer_norm)

__all__ = [
    "BLADES", "CAYLEY", "EUCLIDEAN_MASK", "GRADES", "RigidMotion",
    "apply_motion", "comp", "embed_geometry", "embed_plane", "embed_point",
    "embed_scalar", "embed_translation", "extract_plane", "extract_point",
    "extract_translation", "geometric_product", "grade_project", "reverse",
    "EQUI_BASIS", "EquiLinear", "EquiMLP", "GATrBlock", "SelfAttention",
    "apply_motion_tensor", "equi_linear", "gated_mv", "identity_weights",
    "init_equi_weights", "invariant_norm_sq", "mv_layer_norm",
]
