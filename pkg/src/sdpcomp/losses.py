"""Binary surrogate losses and the prior-corrected SD loss.

All functions broadcast over numpy arrays; scalars go in and come out as
numpy floats.
"""

from __future__ import annotations

import numpy as np

from .core import ClassPrior, LossKind, NonDifferentiableLoss


def logistic(z, y):
    """ln(1 + exp(-y z)), evaluated without overflow."""
    m = -np.asarray(y, dtype=np.float64) * np.asarray(z, dtype=np.float64)
    # log(1 + e^m) = max(m, 0) + log1p(e^{-|m|})
    return np.maximum(m, 0.0) + np.log1p(np.exp(-np.abs(m)))


def zero_one(z, y):
    # z == 0 is an error whatever y is
    return (np.asarray(y, dtype=np.float64) * np.asarray(z, dtype=np.float64) <= 0.0).astype(
        np.float64
    )


def loss(kind, z, y):
    kind = LossKind(kind)
    if kind is LossKind.LOGISTIC:
        return logistic(z, y)
    return zero_one(z, y)


def loss_grad(kind, z, y):
    """d loss / dz. Only the logistic loss has one."""
    if LossKind(kind) is not LossKind.LOGISTIC:
        raise NonDifferentiableLoss("the zero-one loss has no usable derivative")
    y = np.asarray(y, dtype=np.float64)
    m = y * np.asarray(z, dtype=np.float64)
    # -y * sigmoid(-m), with sigmoid split by sign of m
    e = np.exp(-np.abs(m))
    sig_neg = np.where(m >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    return -y * sig_neg


def corrected_coefficients(prior: ClassPrior) -> tuple[float, float]:
    """Weights (on l(z, t), on l(z, -t)) of the corrected SD loss."""
    prior.require_nondegenerate("corrected SD loss")
    return prior.pi_plus / prior.gap, -prior.pi_minus / prior.gap


def corrected_loss(prior: ClassPrior, kind, z, t):
    """pi_+/(pi_+-pi_-) l(z,t) - pi_-/(pi_+-pi_-) l(z,-t); may be negative."""
    a, b = corrected_coefficients(prior)
    t = np.asarray(t)
    return a * loss(kind, z, t) + b * loss(kind, z, -t)


def corrected_loss_grad(prior: ClassPrior, kind, z, t):
    a, b = corrected_coefficients(prior)
    t = np.asarray(t)
    return a * loss_grad(kind, z, t) + b * loss_grad(kind, z, -t)
