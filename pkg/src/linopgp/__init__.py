"""Gaussian-process inference of linear operator parameters from u and f = L u data."""
from . import _backend
from .dsl import list_params, parse_operator, render
from .errors import (CapabilityError, ConfigurationError, DataGenerationError, IngestionError,
                     InvalidArgumentError, LinopGPError, NoUsablePointsError, NumericalError,
                     OperatorSyntaxError, TrainingError)
from .gp import FittedModel, JointDataset, ModelParams, Posterior, assemble_K, nlml, posterior
from .kernel import SEKernelParams, se_antideriv, se_double_antideriv, se_eval, se_partial
from .operators import (FractionalDeriv, Identity, IntegralFromZero, OperatorExpr, PartialDeriv,
                        Term, kernel_block, kernel_ff, kernel_fu, kernel_uf, spectral_pair)
from .trainer import FitReport, TrainConfig, fit

__version__ = "0.1.0"
BACKEND = _backend.NAME
