"""Complementary-energy dimension reduction of inhomogeneous anisotropic plates."""
from . import elasticity3d, fields, loads, materials, plate2d, quadrature, reduction, tensor_core
from .fields import Sampling, StressField, project_L
from .reduction import ReducedModel, build_reduced_model, reconstruct_Z

__version__ = "0.1.0"

__all__ = ["elasticity3d", "fields", "loads", "materials", "plate2d", "quadrature",
           "reduction", "tensor_core", "Sampling", "StressField", "project_L",
           "ReducedModel", "build_reduced_model", "reconstruct_Z"]
