"""Gaussian messages from discrete code messages.

``ep_message`` projects the exact symbol belief (code message times the
evaluated cavity) onto a Gaussian and divides the cavity back out.
``extrinsic_gaussian`` is the comparison rule that moment-matches the code
message alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import Constellation, gaussian_log_weights
from .numerics import (
    MIN_VARIANCE,
    DiscreteMessage,
    ScalarGaussian,
    discrete_moments_arrays,
    gaussian_divide_arrays,
)


class DegenerateBelief(FloatingPointError):
    """The belief vanished on every constellation point."""


@dataclass
class EpState:
    """Cached cavity and last emitted message per symbol (arrays of equal shape)."""

    cavity_mean: np.ndarray
    cavity_var: np.ndarray
    emitted_mean: np.ndarray = field(default=None)
    emitted_var: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.emitted_mean is None:
            self.emitted_mean = np.zeros_like(self.cavity_mean)
        if self.emitted_var is None:
            self.emitted_var = np.ones_like(self.cavity_var)


def ep_message_arrays(code_logw, cav_mean, cav_var, constellation: Constellation, damping=0.0, prev=None):
    """Vectorised EP update.

    ``code_logw`` (..., Q) are log code messages, ``cav_*`` (...) the cavity.
    Returns ``(mean, var, fallback)``; ``fallback`` marks symbols whose
    division produced non-positive precision and were replaced by the
    projected belief. ``prev=(mean, var)`` enables damping in natural
    parameters.
    """
    logb = np.asarray(code_logw, dtype=float) + gaussian_log_weights(cav_mean, cav_var, constellation)
    top = logb.max(axis=-1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise DegenerateBelief("belief underflowed on every constellation point")
    w = np.exp(logb - top)
    w = w / w.sum(axis=-1, keepdims=True)
    b_mean, b_var, _ = discrete_moments_arrays(constellation.points, w)
    b_var = np.maximum(b_var, MIN_VARIANCE)
    mean, var, ok = gaussian_divide_arrays(b_mean, b_var, cav_mean, cav_var)
    var = np.maximum(var, MIN_VARIANCE)
    if damping and prev is not None:
        p_mean, p_var = prev
        lam_new, lam_old = 1.0 / var, 1.0 / p_var
        eta = (1 - damping) * mean * lam_new + damping * p_mean * lam_old
        lam = (1 - damping) * lam_new + damping * lam_old
        var = 1.0 / lam
        mean = eta * var
    return mean, var, ~ok


def ep_message(
    code_msg: DiscreteMessage, cavity: ScalarGaussian, constellation: Constellation
) -> ScalarGaussian:
    """Gaussian symbol -> equalizer message from a discrete code message."""
    if cavity.variance <= 0:
        raise ValueError("cavity variance must be positive")
    if not np.allclose(code_msg.support, constellation.points):
        raise ValueError("code message support does not match the constellation")
    with np.errstate(divide="ignore"):
        logw = np.log(code_msg.weights)
    mean, var, _ = ep_message_arrays(logw, np.array(cavity.mean), np.array(cavity.variance), constellation)
    return ScalarGaussian(complex(mean), float(var))


def extrinsic_gaussian_arrays(code_w, points):
    mean, var, _ = discrete_moments_arrays(points, code_w)
    return mean, np.maximum(var, MIN_VARIANCE)


def extrinsic_gaussian(code_msg: DiscreteMessage) -> ScalarGaussian:
    """Gaussian with the code message's own mean and variance."""
    mean, var = extrinsic_gaussian_arrays(code_msg.weights, code_msg.support)
    return ScalarGaussian(complex(mean), float(var))
