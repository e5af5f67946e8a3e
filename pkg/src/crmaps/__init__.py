"""Holomorphic maps from the Heisenberg hypersurface in C^2 to hyperquadrics in C^3:
jet algebra, isotropy actions, normal forms, classification and orbit experiments."""

from .catalog import NormalFormID, jet_coordinates, normal_form_map
from .errors import CRMapsError
from .isotropies import GammaParams, GammaPrimeParams, act
from .normalization import classify, normalize

__version__ = "0.1.0"

__all__ = ["CRMapsError", "GammaParams", "GammaPrimeParams", "NormalFormID", "act", "classify",
           "jet_coordinates", "normal_form_map", "normalize"]
