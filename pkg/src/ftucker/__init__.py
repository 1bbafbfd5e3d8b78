"""Functional Tucker decomposition, HOSVD and subspace classification."""

from .ftd import FtdConfig, FtdModel, fit, reconstruct_on
from .kernel import KernelSpec
from .tucker import TuckerFactors, hosvd

__all__ = [
    "FtdConfig",
    "FtdModel",
    "KernelSpec",
    "TuckerFactors",
    "fit",
    "hosvd",
    "reconstruct_on",
]
__version__ = "0.1.0"
