"""Threshold rules and the penalties they induce.

Only the hard rule is shipped. The penalty paired with a rule is

    P(t; lam) = integral_0^|t| (sup{s : Theta(s; lam) <= u} - u) du

with the nonnegative correction term taken as zero and P(0; lam) = 0. For the
hard rule this integrates to ``lam*|t| - t**2/2`` on ``|t| <= lam`` and to
``lam**2/2`` beyond.
"""
import enum

import numpy as np

from .errors import DimensionError, InvalidParameterError


class ThresholdRule(enum.Enum):
    HARD = "hard"

    def threshold(self, v, lam):
        return hard_threshold_vec(v, lam)

    def penalty(self, v, lam):
        return hard_penalty(v, lam)


def _check_lambda(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(np.isnan(lam)) or np.any(lam < 0):
        raise InvalidParameterError(f"threshold level must be >= 0, got {lam}")
    return lam


def hard_threshold(t, lam):
    """Scalar hard threshold: 0 when ``|t| <= lam``, else ``t``."""
    lam = float(_check_lambda(lam))
    return 0.0 if abs(t) <= lam else float(t)


def hard_threshold_vec(v, lam):
    """Element-wise hard threshold with a scalar or per-position ``lam``."""
    v = np.asarray(v, dtype=float)
    lam = _check_lambda(lam)
    if lam.ndim > 0 and lam.shape != v.shape:
        raise DimensionError(f"lambda has shape {lam.shape}, values have shape {v.shape}")
    return np.where(np.abs(v) > lam, v, 0.0)


def hard_penalty(t, lam):
    """Penalty induced by the hard rule; accepts scalars or arrays."""
    lam = _check_lambda(lam)
    a = np.abs(np.asarray(t, dtype=float))
    out = np.where(a <= lam, lam * a - 0.5 * a * a, 0.5 * lam * lam)
    return float(out) if out.ndim == 0 else out


def scaled_hard_penalty(t, lam, scale):
    """``scale * P_hard(t; lam/scale)``.

    This is the penalty whose proximal map under a gradient step of size
    ``1/scale`` is exactly the hard threshold at ``lam/scale``. The transfer
    solver monitors its objective with it so that each thresholded step is a
    true majorize-minimize step.
    """
    if scale <= 0:
        raise InvalidParameterError(f"scale must be > 0, got {scale}")
    return scale * hard_penalty(t, np.asarray(lam, dtype=float) / scale)
