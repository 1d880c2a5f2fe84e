"""Branching stable motions, majority-voting duals, and the spectral
oracle for the scaled fractional Allen-Cahn equation."""

__version__ = "0.1.0"

from .params import DomainError, ModelParams, ScalingPreset, sigma_alpha

__all__ = ["DomainError", "ModelParams", "ScalingPreset", "sigma_alpha",
           "__version__"]
