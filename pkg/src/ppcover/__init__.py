"""Rate-distortion regions for Poisson point processes under functional-covering distortion."""
from ._infomath import phi
from .point_process import (CountingPath, ParameterError, StepFunction, distortion,
                            log_likelihood_ratio, sample_poisson, superpose, thin, trial_rng)

__version__ = "0.1.0"
