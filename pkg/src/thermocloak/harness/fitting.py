"""Rate fits of exterior visibility against epsilon."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MODELS = ("power-law", "log-reciprocal")


@dataclass
class RateFit:
    """``value`` is the log-log slope (power-law) or max/min of ``err |ln eps|`` (log-reciprocal)."""

    model: str
    value: float
    residual: float
    n_used: int
    excluded: list = field(default_factory=list)
    degenerate: bool = False
    exponent: float | None = None

    def as_dict(self):
        return {
            "model": self.model,
            "value": self.value,
            "residual": self.residual,
            "n_used": self.n_used,
            "excluded": list(self.excluded),
            "degenerate": self.degenerate,
            "exponent": self.exponent,
        }


def _pairs(records, key):
    eps, err = [], []
    for rec in records:
        if isinstance(rec, (tuple, list)):
            e, v = rec
        else:
            e, v = rec.epsilon, getattr(rec, key)
        eps.append(float(e))
        err.append(float(v))
    return np.asarray(eps), np.asarray(err)


def fit_rate(records, model="power-law", key="errH1", exclude_largest=True):
    """Least-squares rate fit over records with distinct epsilons.

    ``records`` holds objects with ``epsilon`` and ``key`` attributes, or
    ``(epsilon, error)`` pairs.  With four or more points the largest epsilon
    is left out (it is the least asymptotic one) unless ``exclude_largest`` is False.
    Non-positive errors make the fit degenerate: ``value`` is NaN and the flag is set.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    eps, err = _pairs(records, key)
    if eps.size < 3:
        raise ValueError("a rate fit needs at least three records")
    if np.unique(eps).size != eps.size:
        raise ValueError("epsilons must be distinct")
    order = np.argsort(eps)
    eps, err = eps[order], err[order]
    excluded = []
    if exclude_largest and eps.size >= 4:
        excluded.append(float(eps[-1]))
        eps, err = eps[:-1], err[:-1]
    if np.any(~(err > 0)) or not np.all(np.isfinite(err)):
        return RateFit(model, math.nan, math.nan, eps.size, excluded, degenerate=True)
    log_inv = np.log(np.abs(np.log(eps)))
    exponent = float(-np.polyfit(log_inv, np.log(err), 1)[0])
    if model == "power-law":
        x = np.log(eps)
        y = np.log(err)
        coef = np.polyfit(x, y, 1)
        res = y - np.polyval(coef, x)
        return RateFit(model, float(coef[0]), float(np.sqrt(np.mean(res**2))), eps.size, excluded, exponent=exponent)
    q = err * np.abs(np.log(eps))
    return RateFit(
        model, float(q.max() / q.min()), float(np.std(np.log(q))), eps.size, excluded, exponent=exponent
    )


def calibrate_constant(errors, bounds):
    """Smallest ``C`` with ``errors <= C * bounds``."""
    errors = np.asarray(errors, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    if np.any(~(bounds > 0)):
        raise ValueError("envelope values must be positive")
    return float(np.max(errors / bounds))
