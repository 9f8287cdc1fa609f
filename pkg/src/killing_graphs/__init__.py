"""Numerical toolkit for Killing graphs of prescribed mean curvature over
rotationally symmetric model manifolds."""

__version__ = "0.1.0"
