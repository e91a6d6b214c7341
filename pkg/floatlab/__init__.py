# Numerical lab for weighted floating bodies, random polytopes and floating areas

__version__ = "0.1.0"

from floatlab.bodies import ConvexBody, WeightFn, parse_body
from floatlab.config import ExperimentConfig
from floatlab.errors import ConfigError, ExperimentError, FloatlabError
from floatlab.report import ExperimentReport

__all__ = [
    "ConfigError",
    "ConvexBody",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentReport",
    "FloatlabError",
    "WeightFn",
    "__version__",
    "parse_body",
]
