from .discrete_hmm import (
    DiscreteHmmModel,
    DiscreteHmmSpec,
    enumerate_small_posterior,
    hmm_forward_backward,
)
from .linear_gaussian import KalmanModelSpec, LinearGaussianModel, kalman_smoother
from .sv import SV_THETA, SvGibbsUpdater, SvModel, SvParams, SvPriors, sv_gibbs_update, sv_log_densities

__all__ = [
    "DiscreteHmmModel",
    "DiscreteHmmSpec",
    "KalmanModelSpec",
    "LinearGaussianModel",
    "SV_THETA",
    "SvGibbsUpdater",
    "SvModel",
    "SvParams",
    "SvPriors",
    "enumerate_small_posterior",
    "hmm_forward_backward",
    "kalman_smoother",
    "sv_gibbs_update",
    "sv_log_densities",
]
