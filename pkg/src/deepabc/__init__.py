"""Neural-network summary statistics for approximate Bayesian computation.

Simulators for the Ising and MA(2) models, a numpy multilayer perceptron,
linear-regression baseline summaries, ABC rejection samplers and the
metrics used to compare them.
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
