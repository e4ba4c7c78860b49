"""Privacy-utility trade-off bounds, mechanisms and LP approximations for finite alphabets."""

from .probcore import JointDist, Kernel, ProbVec, ValidationError, entropy_suite
from .mechanisms import decompose_utility, efrl, esfrl_sample, frl, sfrl_sample
from .bounds import h0_report, h_bounds_mi, perletter_closed_bounds, prioritized_bounds
from .geometry import build_context
from .lpapprox import solve_g0, solve_g_l, solve_g_wl
from .oracle import GridSpec, brute_force_g, brute_force_h

__all__ = [
    "JointDist",
    "Kernel",
    "ProbVec",
    "ValidationError",
    "entropy_suite",
    "frl",
    "efrl",
    "sfrl_sample",
    "esfrl_sample",
    "decompose_utility",
    "h_bounds_mi",
    "h0_report",
    "perletter_closed_bounds",
    "prioritized_bounds",
    "build_context",
    "solve_g0",
    "solve_g_l",
    "solve_g_wl",
    "GridSpec",
    "brute_force_g",
    "brute_force_h",
]
