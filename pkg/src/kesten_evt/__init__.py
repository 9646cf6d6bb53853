"""kesten_evt: simulation and estimation toolkit for heavy-tailed
multivariate affine stochastic recursions X_n = A_n X_{n-1} + B_n.

Verifies the contraction-expansion hypotheses, estimates the tail index
and tail constant, the extremal index and cluster-size law by independent
routes, fits the Fréchet / exponential / stable limit laws, and measures
the spectral gap and mixing speed of the associated Markov operator.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .model import (
    AffineLawSpec,
    ConstantB,
    FiniteSupportA,
    FiniteSupportB,
    GarchSquared,
    GaussianIsoB,
    IpVerdict,
    RotationScale,
    ScalarDist,
    ScalarLognormal,
    ScalarTwoPoint,
    SimBudget,
    check_ce,
    check_ip,
    sample_pair,
    spec_from_dict,
    spec_to_dict,
)
from .rng import RngStream

__all__ = [
    "AffineLawSpec",
    "BACKEND",
    "ConstantB",
    "FiniteSupportA",
    "FiniteSupportB",
    "GarchSquared",
    "GaussianIsoB",
    "IpVerdict",
    "RngStream",
    "RotationScale",
    "ScalarDist",
    "ScalarLognormal",
    "ScalarTwoPoint",
    "SimBudget",
    "check_ce",
    "check_ip",
    "sample_pair",
    "spec_from_dict",
    "spec_to_dict",
]
