"""Simulation of recurrent optical spectrum slicing networks for optical links."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
