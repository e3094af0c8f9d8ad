"""Satisfiability toolkit for the uniform one-dimensional fragment with
alternating blocks ending existentially (AUF1minus)."""

from .formula import Signature, parse_file, parse_formula, render_formula, to_nnf, infer_blocks, free_variables
from .fragment import check_fragment
from .semantics import Structure, evaluate
from .normal_form import to_weak_normal_form, zero_ary_branches, expand_model, check_maslov_shape
from .forest import extract_forest, verify_forest, build_model
from .smallmodel import build_ext, shrink
from .solver import SearchConfig, decide, solve_bounded

__version__ = "0.1.0"

__all__ = [
    "Signature", "parse_file", "parse_formula", "render_formula", "to_nnf", "infer_blocks",
    "free_variables", "check_fragment", "Structure", "evaluate", "to_weak_normal_form",
    "zero_ary_branches", "expand_model", "check_maslov_shape", "extract_forest", "verify_forest",
    "build_model", "build_ext", "shrink", "SearchConfig", "decide", "solve_bounded",
]
