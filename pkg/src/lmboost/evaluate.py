"""Oracle-based evaluation of dynamic survival predictions.

A test point is a simulated subject still at risk at a uniformly drawn
prediction time s, paired with the oracle conditional survival
probability to the horizon given the subject's covariate history up to
s. Candidate subjects that already exited before their drawn s are
discarded and fresh candidates drawn, so the retained points follow
the at-risk distribution. Every candidate owns fixed substreams of the
evaluation seed, which makes test sets reproducible and independent of
how many candidates end up rejected.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as rngmod
from .boost import _feature_matrix
from .errors import DegenerateDataError, InvalidArgumentError
from .predict import model_scores, predict_survival
from .simulate import oracle_survival, simulate_subject

RMSE = "rmse"
MAPE = "mape"

# cap on candidate draws per retained point; exceeding it means the
# scenario essentially never leaves subjects at risk
_MAX_REJECT_FACTOR = 1000


@dataclass
class TestPoint:
    subject_id: int
    s: float
    horizon: float
    w: np.ndarray
    w_miss: np.ndarray
    path: object
    s_star: float
    s_hat: Optional[float] = None


def build_test_set(scenario, n_points, seed, horizon=None, n_sims=10000,
                   method="mc"):
    """Simulate n_points at-risk test points with oracle survival values.

    Candidate i draws its subject and prediction time from substream
    (seed, test-set, i) and its oracle replicates from substream
    (seed, oracle, i), so adding points extends a test set without
    disturbing existing ones.
    """
    if n_points <= 0:
        raise InvalidArgumentError("n_points must be positive")
    if horizon is None:
        horizon = scenario.horizon_T
    points = []
    i = 0
    limit = _MAX_REJECT_FACTOR * max(n_points, 10)
    while len(points) < n_points:
        if i >= limit:
            raise DegenerateDataError(
                "too many candidates exited before their prediction time"
            )
        stream = rngmod.substream(seed, rngmod.TEST_SET, i)
        sub = simulate_subject(scenario, stream)
        s = stream.uniform(0.0, scenario.horizon_T)
        if sub.exit_time > s:
            path_s = sub.path.truncated(s)
            orng = rngmod.substream(seed, rngmod.ORACLE, i)
            s_star = oracle_survival(scenario, s, path_s, horizon, n_sims, orng,
                                     method=method)
            points.append(TestPoint(
                subject_id=i, s=s, horizon=horizon,
                w=path_s.values[-1].copy(),
                w_miss=path_s.miss[-1].copy(),
                path=path_s, s_star=float(s_star),
            ))
        i += 1
    return points


def predict_test_points(model, points):
    """Attach model survival predictions; returns the same list."""
    for pt in points:
        pt.s_hat = predict_survival(model, pt.s, pt.w, pt.horizon,
                                    w_miss=pt.w_miss)
    return points


def score(points, metric=RMSE):
    """RMSE or MAPE of predicted vs oracle survival over test points."""
    if not points:
        raise InvalidArgumentError("cannot score an empty test set")
    if any(pt.s_hat is None for pt in points):
        raise InvalidArgumentError("test points carry no predictions yet")
    s_star = np.array([pt.s_star for pt in points])
    s_hat = np.array([pt.s_hat for pt in points])
    if metric == RMSE:
        return float(np.sqrt(np.mean((s_hat - s_star) ** 2)))
    if metric == MAPE:
        if np.any(s_star == 0):
            raise InvalidArgumentError(
                "an oracle survival of zero makes relative error undefined"
            )
        return float(np.mean(np.abs(s_hat - s_star) / s_star))
    raise InvalidArgumentError(f"unknown metric {metric!r}")


@dataclass
class EmpiricalMeasure:
    """Feature points (t, s, w...) weighted by exposure."""

    X: np.ndarray
    miss: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.X) != len(self.weights):
            raise InvalidArgumentError("weights must match the rows")

    @property
    def total(self):
        return float(self.weights.sum())


def measure_from_table(table):
    """Empirical measure of an occurrence/exposure table: rows weighted
    by their total exposure, so collapsing the table first changes
    nothing."""
    X, miss = _feature_matrix(table)
    return EmpiricalMeasure(X=X, miss=miss, weights=table.exp.copy())


def l1_mu_error(model, truth_log_hazard, measure):
    """Exposure-weighted mean |capped F-hat - log true hazard|.

    truth_log_hazard is a vectorized callable (t, s, W) -> log hazard.
    """
    if measure.total <= 0:
        raise InvalidArgumentError("measure carries no exposure")
    F = model_scores(model, measure.X, measure.miss, cap=True)
    truth = np.asarray(
        truth_log_hazard(measure.X[:, 0], measure.X[:, 1], measure.X[:, 2:]),
        dtype=np.float64,
    )
    return float(np.sum(measure.weights * np.abs(F - truth)) / measure.total)
