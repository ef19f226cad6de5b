"""Cooperative two-player docking: pocket prediction, ligand and pocket
docking models trained by alternating self-play, with potential-game
convergence diagnostics."""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
