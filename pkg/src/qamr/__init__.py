"""Hybrid quantum-classical adaptive refinement for the 2D Maxwell cavity on the L-shape.

Lowest-order edge elements, a residual error estimator evaluated either
classically or through emulated block-encoding circuits, and a
variational linear solver.
"""
from .config import AmrConfig, FidelityConfig, SelftestConfig
from .driver import RunReport, run_amr, run_uniform, shots_for
from .mesh import Mesh, make_lshape_mesh, refine, refine_uniform

__all__ = [
    "AmrConfig",
    "FidelityConfig",
    "SelftestConfig",
    "RunReport",
    "run_amr",
    "run_uniform",
    "shots_for",
    "Mesh",
    "make_lshape_mesh",
    "refine",
    "refine_uniform",
]
