"""Optimal measurement of wave patterns: detection, identification,
two-dimensional (polarization) discrimination and parameter estimation,
each returned with a numerical optimality certificate.
"""
__version__ = "0.1.0"

from . import bloch, detect, errors, estimate, identify, linop, measure, oracle, states  # noqa: E402,F401
from .certificate import Certificate  # noqa: E402,F401
