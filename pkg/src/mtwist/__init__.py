"""Curvature, geodesics, Killing fields and Einstein warps on multiply twisted products."""
from .chart import ProductSpec, load_spec, make_spec, validate_spec
from .discrepancy import FormulaDiscrepancy, known_discrepancies, structured_vs_oracle
from .einstein import (grw_einstein_family, grw_einstein_highdim, grw_scalar_family,
                       kasner_einstein_families, kasner_scalar_family)
from .errors import MtwistError
from .expr import parse_expr
from .finsler import (ProductFinslerSpec, berwald_tensors, cartan_tensor, load_finsler, make_product,
                      spray_generic, spray_structured, structure_predicates)
from .geodesics import geodesic_integrate, index_form, second_variation_fd
from .killing import killing_residual, vector_field
from .oracle import riemann, semisym_riemann
from .report import emit_report
from .semisym import einstein_residual, ss_curvature_tensor, ss_ricci_tensor, ss_scalar
from .twisted import lc_curvature_tensor, lc_ricci_tensor, lc_scalar

__version__ = "0.1.0"

__all__ = [
    "ProductSpec", "load_spec", "make_spec", "validate_spec", "FormulaDiscrepancy",
    "known_discrepancies", "structured_vs_oracle", "grw_einstein_family", "grw_einstein_highdim",
    "grw_scalar_family", "kasner_einstein_families", "kasner_scalar_family", "MtwistError",
    "parse_expr", "ProductFinslerSpec", "berwald_tensors", "cartan_tensor", "load_finsler",
    "make_product", "spray_generic", "spray_structured", "structure_predicates",
    "geodesic_integrate", "index_form", "second_variation_fd", "killing_residual", "vector_field",
    "riemann", "semisym_riemann", "emit_report", "einstein_residual", "ss_curvature_tensor",
    "ss_ricci_tensor", "ss_scalar", "lc_curvature_tensor", "lc_ricci_tensor", "lc_scalar",
]
