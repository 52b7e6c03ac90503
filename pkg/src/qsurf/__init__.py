"""Kernel-free quadratic surface SVMs with Universum data."""

from .errors import DataError, QsurfError, SolverError
from .models import Hyperparams, ModelKind, QuadraticClassifier, train_model

__all__ = ["DataError", "QsurfError", "SolverError", "Hyperparams", "ModelKind",
           "QuadraticClassifier", "train_model"]
