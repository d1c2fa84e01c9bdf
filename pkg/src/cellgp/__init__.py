"""Multi-output convolved Gaussian processes for battery capacity forecasting."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    BUILTIN_SCENARIOS,
    CapacitySeries,
    Scenario,
    TrainingSet,
    build_scenario,
    downsample,
    load_csv,
    save_csv,
)
from .igp import IgpModel, igp_fit, igp_predict  # noqa: E402
from .kernels import IgpKernelParams, McgpHyperParams, mcgp_cross_cov  # noqa: E402
from .mcgp import (  # noqa: E402
    McgpModel,
    deviance,
    deviance_grad,
    load_model,
    mcgp_fit,
    mcgp_predict,
    save_model,
)
from .optimizer import OptimizerConfig  # noqa: E402
from .predictive import PredictiveDistribution  # noqa: E402

__all__ = [
    "BUILTIN_SCENARIOS",
    "CapacitySeries",
    "IgpKernelParams",
    "IgpModel",
    "McgpHyperParams",
    "McgpModel",
    "OptimizerConfig",
    "PredictiveDistribution",
    "Scenario",
    "TrainingSet",
    "build_scenario",
    "deviance",
    "deviance_grad",
    "downsample",
    "igp_fit",
    "igp_predict",
    "load_csv",
    "load_model",
    "mcgp_cross_cov",
    "mcgp_fit",
    "mcgp_predict",
    "save_csv",
    "save_model",
]
