from .group import Ball, GroupElement, GroupParams
from .potential import Potential, RhoCache, critical_radius
from .heat import HeatQuadrature, heat_kernel, group_heat_kernel
from .trotter import TrotterSpec, schrodinger_kernel, schrodinger_semigroup_apply
from .kernels import SubordinationSpec, fractional_kernel, fractional_kernel_values
from .fractional import FractionalIntegral, fractional_integral_apply
from .spaces import SpaceSpec, NormReport, estimate_norm
from .experiments import ExperimentConfig, RatioReport, RUNNERS
__all__ = [
    "Ball",
    "GroupElement",
    "GroupParams",
    "Potential",
    "RhoCache",
    "critical_radius",
    "HeatQuadrature",
    "heat_kernel",
    "group_heat_kernel",
    "TrotterSpec",
    "schrodinger_kernel",
    "schrodinger_semigroup_apply",
    "SubordinationSpec",
    "fractional_kernel",
    "fractional_kernel_values",
    "FractionalIntegral",
    "fractional_integral_apply",
    "SpaceSpec",
    "NormReport",
    "estimate_norm",
    "ExperimentConfig",
    "RatioReport",
    "RUNNERS",
]
