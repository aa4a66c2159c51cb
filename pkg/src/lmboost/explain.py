"""Model explanation: split-gain importance, partial dependence and
marginal hazard summaries.

All summaries weight rows by their occurrence/exposure unit
multiplicity, so running them on a collapsed or uncollapsed table gives
the same answer.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from .boost import Leaf, _feature_matrix
from .errors import InvalidArgumentError
from .predict import model_scores


def resolve_feature(model, feature):
    """Feature index from a name or an index over (t, s, covariates)."""
    if isinstance(feature, str):
        try:
            return model.feature_names.index(feature)
        except ValueError:
            raise InvalidArgumentError(
                f"unknown feature {feature!r}; choose from {model.feature_names}"
            ) from None
    f = int(feature)
    if not 0 <= f < len(model.feature_names):
        raise InvalidArgumentError(f"feature index {f} out of range")
    return f


def gain_importance(model):
    """Total split gain per feature, scaled so the largest equals 1.

    Returns (names, values). A model whose trees never split (all
    stumps below the gain threshold) yields all zeros with a warning
    rather than an error, since that is a legitimate fit outcome.
    """
    names = model.feature_names
    totals = np.zeros(len(names))

    def walk(node):
        if isinstance(node, Leaf):
            return
        totals[node.feature_index] += node.gain
        walk(node.left)
        walk(node.right)

    for root, _ in model.trees:
        walk(root)
    top = totals.max() if totals.size else 0.0
    if top <= 0:
        warnings.warn("model has no splits; importance is all zeros")
        return names, totals
    return names, totals / top


@dataclass
class PartialDependence:
    feature: str
    grid: np.ndarray
    values: np.ndarray
    rug: np.ndarray


def partial_dependence(model, table, feature, grid):
    """Mean predicted hazard with one feature forced to each grid value.

    For each grid value v, every row's feature column is overwritten
    with v (clearing its missing flag), rows are rescored, and the
    multiplicity-weighted mean of exp(F-hat) is recorded. The rug
    carries the observed non-missing values of the feature for
    plotting.
    """
    if len(table) == 0:
        raise InvalidArgumentError("cannot explain an empty table")
    f = resolve_feature(model, feature)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidArgumentError("grid must be a nonempty 1-d array")
    X, miss = _feature_matrix(table)
    wts = table.weight.astype(np.float64)
    total = wts.sum()
    values = np.empty(grid.size)
    Xv = X.copy()
    mv = miss.copy()
    mv[:, f] = False
    for i, v in enumerate(grid):
        Xv[:, f] = v
        hz = np.exp(model_scores(model, Xv, mv))
        values[i] = float(np.dot(wts, hz) / total)
    col = X[:, f]
    rug = col[~miss[:, f]]
    return PartialDependence(feature=model.feature_names[f], grid=grid.copy(),
                             values=values, rug=rug.copy())


@dataclass
class MarginalHazard:
    feature: str
    centers: np.ndarray
    values: np.ndarray
    counts: np.ndarray


def marginal_hazard(model, table, feature, n_bins=10):
    """Observed mean predicted hazard across equal-width feature bins.

    Unlike partial dependence this never rewrites rows: each row keeps
    its own features and contributes its predicted hazard to the bin of
    its observed feature value, weighted by multiplicity. Bins with no
    observations get NaN. Rows missing the feature are left out; a
    feature missing everywhere is an error.
    """
    if len(table) == 0:
        raise InvalidArgumentError("cannot explain an empty table")
    if n_bins < 1:
        raise InvalidArgumentError("n_bins must be positive")
    f = resolve_feature(model, feature)
    X, miss = _feature_matrix(table)
    ok = ~miss[:, f]
    if not ok.any():
        raise InvalidArgumentError(
            f"feature {model.feature_names[f]!r} is missing in every row"
        )
    v = X[ok, f]
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        idx = np.clip(((v - lo) / (hi - lo) * n_bins).astype(np.int64), 0, n_bins - 1)
    else:
        idx = np.zeros(v.size, dtype=np.int64)
    wts = table.weight[ok].astype(np.float64)
    hz = np.exp(model_scores(model, X[ok], miss[ok]))
    wsum = np.bincount(idx, weights=wts, minlength=n_bins)
    hsum = np.bincount(idx, weights=wts * hz, minlength=n_bins)
    with np.errstate(invalid="ignore"):
        values = np.where(wsum > 0, hsum / np.where(wsum > 0, wsum, 1.0), np.nan)
    width = (hi - lo) / n_bins if hi > lo else 1.0
    centers = lo + (np.arange(n_bins) + 0.5) * width
    return MarginalHazard(feature=model.feature_names[f], centers=centers,
                          values=values, counts=wsum)
