"""Shared data model: covariate paths, subjects, partitions, landmarks.

Conventions that the rest of the package relies on:

* time is measured in years, starting at 0;
* covariate paths are right-continuous piecewise-constant step
  functions, missing entries are a first-class sentinel carried in a
  boolean mask (the value slot holds NaN but the mask is authoritative);
* partitions use half-open bins [b_h, b_{h+1}) per dimension, with the
  feature order (t, s, w_1..w_p).
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, OutOfDomainError


@dataclass(frozen=True)
class CovariatePath:
    """Piecewise-constant covariate trajectory.

    jump_times: strictly increasing, first element 0.
    values: (k, p) array, row j holds the vector on [jump_times[j], next).
    miss: (k, p) boolean mask, True where the entry is missing.
    """

    jump_times: np.ndarray
    values: np.ndarray
    miss: np.ndarray = None

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=np.float64)
        vals = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if vals.shape[0] != jt.shape[0]:
            raise InvalidArgumentError("values must have one row per jump time")
        if jt.size == 0 or jt[0] != 0.0:
            raise InvalidArgumentError("first jump time must be 0")
        if jt.size > 1 and not np.all(np.diff(jt) > 0):
            raise InvalidArgumentError("jump times must be strictly increasing")
        miss = self.miss
        if miss is None:
            miss = np.isnan(vals)
        else:
            miss = np.asarray(miss, dtype=bool)
            if miss.shape != vals.shape:
                raise InvalidArgumentError("miss mask must match values shape")
        for name, arr in (("jump_times", jt), ("values", vals), ("miss", miss)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def p(self):
        return self.values.shape[1]

    def segment_index(self, u):
        """Index of the segment active at time u (largest jump_time <= u)."""
        if u < 0:
            raise InvalidArgumentError("time must be nonnegative")
        return int(np.searchsorted(self.jump_times, u, side="right")) - 1

    def truncated(self, s):
        """The path restricted to jump times <= s (history available at s)."""
        k = self.segment_index(s) + 1
        return CovariatePath(self.jump_times[:k], self.values[:k], self.miss[:k])


def value_at(path, u):
    """Covariate vector at time u (right-continuous lookup)."""
    j = path.segment_index(u)
    return path.values[j]


def missing_at(path, u):
    """Missing mask at time u."""
    return path.miss[path.segment_index(u)]


def last_change_time(path, u):
    """Largest jump time in (0, u], or 0 if the path never changed by u."""
    j = path.segment_index(u)
    return float(path.jump_times[j])


def value_before_last_change(path, u, dim):
    """Value of coordinate dim just before the most recent change by time u.

    Returns 0.0 when no change occurred in (0, u], matching the
    convention that the pre-initial value is zero.
    """
    j = path.segment_index(u)
    if j == 0:
        return 0.0
    return float(path.values[j - 1, dim])


@dataclass(frozen=True)
class SubjectRecord:
    """One subject's event history over the observation window [0, T].

    event_time is absent (None) when no event was observed on the
    window; censor_time already folds administrative censoring at T into
    the random censoring draw. The counting process is
    N(u) = 1{event_time present and event_time <= u} and the at-risk
    indicator Y(u) = 1{u <= exit}.
    """

    id: int
    path: CovariatePath
    event_time: Optional[float]
    censor_time: float
    horizon_T: float

    def __post_init__(self):
        if self.censor_time < 0 or self.horizon_T <= 0:
            raise InvalidArgumentError("censor_time and horizon_T must be positive")
        if self.event_time is not None:
            if self.event_time > self.censor_time or self.event_time > self.horizon_T:
                raise InvalidArgumentError(
                    "events after the exit time must be recorded as absent"
                )

    @property
    def exit_time(self):
        if self.event_time is not None:
            return min(self.event_time, self.censor_time, self.horizon_T)
        return min(self.censor_time, self.horizon_T)


@dataclass(frozen=True)
class Partition:
    """Hypercube grid over (t, s, w_1..w_p).

    splits[d] is a strictly increasing boundary array (m+1 boundaries
    for m half-open bins) or None for a dimension kept at the raw
    precision of the data (a maximal partition: every observed value is
    its own cell and values pass through unbinned). The time dimension
    must always carry explicit boundaries since exposure accounting and
    survival integration sum over its bins.
    """

    splits: tuple
    names: tuple

    def __post_init__(self):
        if len(self.splits) != len(self.names):
            raise InvalidArgumentError("one split list and one name per dimension")
        if len(self.splits) < 2:
            raise InvalidArgumentError("partition needs at least the t and s dimensions")
        norm = []
        for d, b in enumerate(self.splits):
            if b is None:
                norm.append(None)
                continue
            b = np.asarray(b, dtype=np.float64)
            if b.ndim != 1 or b.size < 2:
                raise InvalidArgumentError(f"dimension {self.names[d]!r} needs >= 2 boundaries")
            if not np.all(np.diff(b) > 0):
                raise InvalidArgumentError(f"boundaries of {self.names[d]!r} must strictly increase")
            b.setflags(write=False)
            norm.append(b)
        if norm[0] is None:
            raise InvalidArgumentError("the time dimension requires explicit boundaries")
        object.__setattr__(self, "splits", tuple(norm))
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def dims(self):
        return len(self.splits)

    @property
    def p(self):
        return self.dims - 2

    @property
    def time_bins(self):
        return self.splits[0]


def make_partition(time_boundaries, p, covariate_names=None, s_boundaries=None,
                   covariate_boundaries=None):
    """Assemble a Partition with raw (maximal) dimensions by default."""
    if covariate_names is None:
        covariate_names = tuple(f"w_{j + 1}" for j in range(p))
    if len(covariate_names) != p:
        raise InvalidArgumentError("covariate_names must have length p")
    cov = [None] * p
    if covariate_boundaries is not None:
        for j, b in covariate_boundaries.items():
            cov[j] = b
    return Partition(
        splits=(np.asarray(time_boundaries, dtype=np.float64), s_boundaries, *cov),
        names=("t", "s", *covariate_names),
    )


def time_grid(horizon_T, step):
    """Boundaries 0 = b_0 < ... < b_m = T with uniform step (last bin may be short).

    When 1/step is an integer the boundaries are computed as i / (1/step)
    so that grid points equal the correctly rounded decimal values, e.g.
    step 0.01 yields 0.62 exactly rather than 62 * 0.01.
    """
    if step <= 0 or horizon_T <= 0:
        raise InvalidArgumentError("step and horizon must be positive")
    inv = 1.0 / step
    m = int(np.ceil(horizon_T / step - 1e-9))
    if abs(inv - round(inv)) < 1e-9:
        b = np.arange(m + 1, dtype=np.float64) / round(inv)
    else:
        b = np.arange(m + 1, dtype=np.float64) * step
    b[m] = min(b[m], horizon_T)
    if b[m] <= b[m - 1]:
        b = b[: m + 1 - 1]
        b[-1] = horizon_T
    return b


def bin_of(boundaries, v):
    """Bin index of scalar v under [b_h, b_{h+1}), without range checks."""
    return int(np.searchsorted(boundaries, v, side="right")) - 1


def locate_bin(partition, x, miss=None):
    """Multi-index of point x = (t, s, w_1..w_p) in the partition.

    Binned dimensions map to their integer bin index; raw dimensions
    pass the value through (each value is its own cell). Missing
    covariate entries yield None, the sentinel that tree routing
    resolves via learned default directions.
    """
    x = list(x)
    if len(x) != partition.dims:
        raise InvalidArgumentError("point dimensionality does not match partition")
    if miss is None:
        miss = [False] * partition.dims
    out = []
    for d, (b, v) in enumerate(zip(partition.splits, x)):
        if miss[d] or (d >= 2 and v is not None and np.isnan(v)):
            if d < 2:
                raise InvalidArgumentError("t and s cannot be missing")
            out.append(None)
            continue
        if b is None:
            out.append(float(v))
            continue
        if v < b[0] or v >= b[-1]:
            raise OutOfDomainError(partition.names[d], v)
        out.append(bin_of(b, v))
    return tuple(out)


@dataclass(frozen=True)
class LandmarkDraw:
    """One landmark time for one subject."""

    subject_id: int
    q: int
    s: float


@dataclass(frozen=True)
class CapBounds:
    """Truncation interval [log_lambda_lo, log_lambda_hi] for the log-hazard."""

    log_lambda_lo: float
    log_lambda_hi: float

    def __post_init__(self):
        if not (np.isfinite(self.log_lambda_lo) and np.isfinite(self.log_lambda_hi)):
            raise InvalidArgumentError("cap bounds must be finite")
        if self.log_lambda_lo >= self.log_lambda_hi:
            raise InvalidArgumentError("cap lower bound must be below the upper bound")

    def apply(self, f):
        return np.minimum(np.maximum(f, self.log_lambda_lo), self.log_lambda_hi)


# Wide enough to be inert on realistic per-year rates while keeping the
# boosted log-hazard bounded as the theory requires.
DEFAULT_CAP = CapBounds(np.log(1e-4), np.log(1e3))
