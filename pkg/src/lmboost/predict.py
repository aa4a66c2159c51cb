"""Plug-in survival prediction from a fitted log-hazard model.

Survival from landmark s to horizon h is exp(-integral of the predicted
hazard over [s, h)). The fitted predictor is piecewise constant on the
time bins, so the integral is an exact finite sum: one hazard lookup
per bin overlapping [s, h), weighted by the overlap length. No
quadrature error is introduced and refining a prediction grid never
changes the value at a shared time point.
"""
from dataclasses import dataclass

import numpy as np

from .boost import route_values
from .errors import InvalidArgumentError, OutOfDomainError


def model_scores(model, X, miss=None, cap=True):
    """Capped log-hazard for each row of a float feature matrix.

    Columns follow model.feature_names: t, s, then covariates. Missing
    covariates are NaN (or flagged via miss); t and s cannot be missing.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != len(model.feature_names):
        raise InvalidArgumentError(
            f"expected {len(model.feature_names)} feature columns, got {X.shape[1]}"
        )
    if miss is None:
        miss = np.isnan(X)
    F = np.full(X.shape[0], model.base_score)
    for root, eta in model.trees:
        F += eta * route_values(root, X, miss)
    return model.cap.apply(F) if cap else F


def predict_log_hazard(model, t, s, w, w_miss=None):
    """Capped log-hazard at time t for a subject landmarked at s."""
    if t < s:
        raise InvalidArgumentError(f"t={t} precedes the landmark s={s}")
    w = np.asarray(w, dtype=np.float64)
    row = np.concatenate(([t, s], w))
    miss = np.zeros(row.size, dtype=bool)
    if w_miss is not None:
        miss[2:] = np.asarray(w_miss, dtype=bool)
    else:
        miss[2:] = np.isnan(w)
    return float(model_scores(model, row[None, :], miss[None, :])[0])


def predict_log_hazard_many(model, t, s, W, W_miss=None):
    """Vectorized capped log-hazard; all t must be >= the matching s."""
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if np.any(t < s):
        raise InvalidArgumentError("every t must be at or after its landmark s")
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    X = np.column_stack([t, s, W])
    miss = np.zeros_like(X, dtype=bool)
    miss[:, 2:] = np.isnan(W) if W_miss is None else np.asarray(W_miss, dtype=bool)
    return model_scores(model, X, miss)


def _time_bins(model):
    part = model.partition
    tb = part.time_bins if part is not None else None
    if tb is None:
        raise InvalidArgumentError("model carries no time grid; survival needs one")
    return tb


def _bin_hazards(model, s, w, w_miss, tb, j0, j1):
    """Hazard of each time bin j0..j1 for a subject landmarked at s."""
    t_eval = np.maximum(s, tb[j0 : j1 + 1])
    k = j1 - j0 + 1
    w = np.asarray(w, dtype=np.float64)
    X = np.empty((k, 2 + w.size))
    X[:, 0] = t_eval
    X[:, 1] = s
    X[:, 2:] = w
    miss = np.zeros_like(X, dtype=bool)
    if w_miss is not None:
        miss[:, 2:] = np.asarray(w_miss, dtype=bool)
    else:
        miss[:, 2:] = np.isnan(w)
    return np.exp(model_scores(model, X, miss))


def _check_window(tb, s, horizon):
    if horizon < s:
        raise InvalidArgumentError(f"horizon={horizon} precedes the landmark s={s}")
    if s < tb[0] or s >= tb[-1]:
        raise OutOfDomainError("s", float(s))
    if horizon > tb[-1]:
        raise OutOfDomainError("horizon", float(horizon))


def predict_survival(model, s, w, horizon, w_miss=None):
    """Survival probability from landmark s to horizon."""
    tb = _time_bins(model)
    _check_window(tb, s, horizon)
    if horizon == s:
        return 1.0
    j0 = int(np.searchsorted(tb, s, side="right") - 1)
    j1 = int(np.searchsorted(tb, horizon, side="left") - 1)
    hz = _bin_hazards(model, s, w, w_miss, tb, j0, j1)
    overlap = np.minimum(horizon, tb[j0 + 1 : j1 + 2]) - np.maximum(s, tb[j0 : j1 + 1])
    return float(np.exp(-np.dot(overlap, hz)))


@dataclass
class SurvivalCurve:
    s: float
    times: np.ndarray
    values: np.ndarray


def predict_survival_curve(model, s, w, grid, w_miss=None):
    """Survival over an ascending grid starting at the landmark s.

    values[0] is exactly 1 and every value is computed by the same
    exact piecewise-constant integral as predict_survival, so curve
    points agree with single-horizon calls bit for bit.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidArgumentError("grid must be a nonempty 1-d array")
    if grid[0] != s:
        raise InvalidArgumentError("grid must start at the landmark s")
    if np.any(np.diff(grid) <= 0):
        raise InvalidArgumentError("grid must be strictly ascending")
    tb = _time_bins(model)
    _check_window(tb, s, float(grid[-1]))
    if grid.size == 1:
        return SurvivalCurve(s=s, times=grid.copy(), values=np.ones(1))
    j0 = int(np.searchsorted(tb, s, side="right") - 1)
    j1 = int(np.searchsorted(tb, grid[-1], side="left") - 1)
    hz = _bin_hazards(model, s, w, w_miss, tb, j0, j1)
    lo = np.maximum(s, tb[j0 : j1 + 1])
    hi = tb[j0 + 1 : j1 + 2]
    overlap = np.clip(np.minimum(grid[:, None], hi[None, :]) - lo[None, :], 0.0, None)
    integral = overlap @ hz
    return SurvivalCurve(s=s, times=grid.copy(), values=np.exp(-integral))
