"""Desk-scale GAN: dense nets, the minimax value, and the SGD training loop."""

from .estimator import MinimaxGAN
from .gradcheck import finite_difference_gradient, relative_error
from .nets import DenseNet
from .objective import js_estimate, v_gan
from .training import (
    GanConfig,
    TrainMetrics,
    TrainResult,
    d_objective_and_grad,
    d_step,
    g_objective_and_grad,
    g_step,
    init_nets,
    sample_noise,
    train,
)

__all__ = [
    "DenseNet",
    "GanConfig",
    "MinimaxGAN",
    "TrainMetrics",
    "TrainResult",
    "d_objective_and_grad",
    "d_step",
    "finite_difference_gradient",
    "g_objective_and_grad",
    "g_step",
    "init_nets",
    "js_estimate",
    "relative_error",
    "sample_noise",
    "train",
    "v_gan",
]
