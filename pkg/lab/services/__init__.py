# Lab services package
from lab.services.experiment_service import ExperimentService
from lab.services.extension_service import ExtensionService
from lab.services.gaussian_checks import GaussianCheckService
from lab.services.heat_service import HeatService
from lab.services.symbol_checks import SymbolCheckService

__all__ = [
    "ExperimentService",
    "ExtensionService",
    "GaussianCheckService",
    "HeatService",
    "SymbolCheckService",
]
