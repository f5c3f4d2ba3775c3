"""Desk-scale verification and resource estimation for Schwinger-model simulation."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import CapacityError, DomainError, InfeasiblePlanError, NumericalError, SchwingerError
from .model import ModelParams

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "CapacityError",
    "DomainError",
    "InfeasiblePlanError",
    "ModelParams",
    "NumericalError",
    "SchwingerError",
]
