"""Feasibility machinery: SOCP relaxation solver, binary branch-and-bound,
and the local nonlinear IK shortcut."""

from .micp import MicpResult, solve_micp
from .refine import RefineResult, local_ik_refine
from .socp import RelaxationResult, WarmStart, solve_relaxation, standard_form

__all__ = [
    "MicpResult",
    "RefineResult",
    "RelaxationResult",
    "WarmStart",
    "local_ik_refine",
    "solve_micp",
    "solve_relaxation",
    "standard_form",
]
