"""Spin-3/2 colour-centre simulation and analysis toolkit."""

from .spincore import SpinSystem, spin_matrices
from .trace import Trace, Spectrum

__version__ = "0.1.0"
