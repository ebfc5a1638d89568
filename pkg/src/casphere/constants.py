"""Physical constants (CODATA via scipy), echoed into result metadata."""

from scipy.constants import Boltzmann as k_B
from scipy.constants import c, hbar

CODATA = {"c": c, "hbar": hbar, "k_B": k_B}

__all__ = ["c", "hbar", "k_B", "CODATA"]
