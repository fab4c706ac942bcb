"""Weighted Bergman kernels of order d and the Narasimhan-Simha metrics they induce."""

from . import core, experiments, extremal, geometry, kernel, metric, quadrature
from .core import Ball, DiagonalBall, Polydisc, QuadricRho, SmoothReinhardt
from .kernel import build_model, closed_kernel, load_model, save_model, selberg_constant

__version__ = "0.1.0"

__all__ = [
    "Ball", "DiagonalBall", "Polydisc", "QuadricRho", "SmoothReinhardt", "build_model", "closed_kernel",
    "core", "experiments", "extremal", "geometry", "kernel", "load_model", "metric", "quadrature",
    "save_model", "selberg_constant",
]
