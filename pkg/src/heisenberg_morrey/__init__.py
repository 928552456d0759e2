"""heisenberg-morrey - Schrödinger fractional integrals and Morrey norms on the Heisenberg group"""

__version__ = "0.1.0"
__author__ = "Sandy H. S. Herho, Gandhi Napitupulu"

from .core.experiments import ExperimentConfig
from .core.fractional import FractionalIntegral
from .core.group import GroupElement, GroupParams
from .core.potential import Potential
from .io.config_manager import ConfigManager
from .io.data_handler import DataHandler

__all__ = [
    "ExperimentConfig",
    "FractionalIntegral",
    "GroupElement",
    "GroupParams",
    "Potential",
    "ConfigManager",
    "DataHandler",
]
