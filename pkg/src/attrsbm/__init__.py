"""Stochastic block models with multivariate-Gaussian node attributes."""
__version__ = "0.1.0"

from .errors import AttrSBMError, ConfigError, DataError, NumericalError, ParseError
from .graph import Graph, load_edge_list, save_edge_list
from .model import FitConfig, FitResult, ModelParams, fit, select_k

__all__ = [
    "AttrSBMError", "ConfigError", "DataError", "NumericalError", "ParseError",
    "Graph", "load_edge_list", "save_edge_list",
    "FitConfig", "FitResult", "ModelParams", "fit", "select_k",
]
