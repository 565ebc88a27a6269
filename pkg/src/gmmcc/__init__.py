"""Piecewise-linear MIQP approximations of Gaussian-mixture chance constraints."""

__version__ = "0.1.0"

from .builders import (
    BuildOptions,
    ModelBounds,
    attach_inner_block,
    attach_outer_block,
    build_pwl_inner,
    build_pwl_outer,
    build_saa,
    build_skeleton,
)
from .errors import (
    CertificationError,
    DomainError,
    GmmccError,
    UndefinedGradientError,
    UsageError,
    ValidationError,
)
from .factory import GenConfig, WeightMode, generate_instance, intro_example, van_der_corput
from .gmm import (
    GaussianComponent,
    GmmInstance,
    Polyhedron,
    chance_gradient,
    chance_probability,
    component_probability,
    sample,
    validate_instance,
)
from .ir import MiqpModel
from .lpformat import parse_lp, write_lp
from .pwl import (
    BreakpointArray,
    Kind,
    PwlApprox,
    build_pwl,
    certify_error,
    count_scaling_probe,
    eval_inner,
    eval_outer,
    inner_breakpoints,
    outer_breakpoints,
)
from .special import std_normal_cdf, std_normal_inv_cdf, std_normal_pdf, phi_second, tail_endpoint
from .verify import compare, desk_solve, mc_probability, sandwich_audit, verify
from .witness import witness_inner, witness_outer

__all__ = [name for name in dir() if not name.startswith("_")]
