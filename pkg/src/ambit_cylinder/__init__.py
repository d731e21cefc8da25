"""Ambit fields on a cylinder: Lévy bases, kernels, Fourier-Laplace simulation and spread pricing."""
from .geometry import AngularSet, CylinderPatch, CylinderPoint, riemannian_area
from .kernels import GammaCardioidKernel, SemiParametricKernel, project_kernel, l2_kernel_distance
from .levy import (
    CharacteristicQuadruplet,
    DomainError,
    EsscherTilt,
    GaussianSeed,
    InverseGaussianSeed,
    MomentConditionError,
    NIGSeed,
    esscher_tilt,
)
from .simulate import FieldPath, SimulationGrid, VolatilityFieldSpec, simulate_field, simulate_paths

__version__ = "0.1.0"
