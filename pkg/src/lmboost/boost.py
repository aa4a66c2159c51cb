"""Gradient-boosted trees with Poisson loss on occurrence/exposure tables.

The loss of a row with log-hazard prediction F, occurrence count y and
exposure E is psi(F) = exp(F) * E - F * y, whose gradient and hessian in
F are exp(F) * E - y and exp(F) * E. Two fitting modes share one split
engine:

* gradient mode follows the fixed-step functional gradient scheme: each
  round fits a least-squares tree to the negative gradients of the
  occurrence/exposure units (collapsed rows weighted by multiplicity)
  and steps F by eta times the tree;
* newton mode uses second-order split gains G^2/H and leaf values -G/H
  with optional L1 soft-thresholding of the leaf numerator by alpha,
  matching the behavior of mainstream boosting software on this loss.

Candidate thresholds come from the partition: dimensions with explicit
boundaries split only at those boundaries, and raw dimensions split at
midpoints between adjacent observed values. Split search is exact and
deterministic: features are scanned in index order, candidate
thresholds in ascending order, and the first best gain wins, so a fit
is a pure function of (table, params) regardless of worker count. The
truncation of the final predictor to the cap interval happens at
prediction time; training iterates are never truncated.
"""
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Tuple, Union

import numpy as np

from . import rng as rngmod
from .core import CapBounds, DEFAULT_CAP
from .errors import (
    DegenerateDataError,
    InvalidArgumentError,
    OutOfDomainError,
)

GRADIENT = "gradient"
NEWTON = "newton"

MODEL_FORMAT_VERSION = 1


def poisson_loss(F, occ, exp):
    """exp(F) * exp - F * occ, elementwise."""
    return np.exp(F) * exp - F * occ


def poisson_grad_hess(F, occ, exp):
    """Gradient exp(F) * exp - occ and hessian exp(F) * exp."""
    h = np.exp(F) * exp
    return h - occ, h


def table_loss(table, F):
    """Total Poisson loss of per-row log-hazards F over a table."""
    return float(np.sum(poisson_loss(np.asarray(F, dtype=np.float64), table.occ, table.exp)))


@dataclass
class Leaf:
    value: float


@dataclass
class Split:
    feature_index: int
    threshold: float
    default_left: bool
    left: Union["Split", Leaf]
    right: Union["Split", Leaf]
    gain: float = 0.0


TreeNode = Union[Split, Leaf]


@dataclass(frozen=True)
class BoostParams:
    eta: float = 0.1
    max_depth: int = 3
    nrounds: int = 100
    min_child_weight: float = 1.0
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    alpha: float = 0.0
    mode: str = NEWTON
    cap: CapBounds = field(default_factory=lambda: DEFAULT_CAP)
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise InvalidArgumentError("eta must lie in (0, 1]")
        if self.max_depth < 0 or self.nrounds < 0:
            raise InvalidArgumentError("max_depth and nrounds must be nonnegative")
        if not (0.0 < self.subsample <= 1.0 and 0.0 < self.colsample_bytree <= 1.0):
            raise InvalidArgumentError("subsample and colsample_bytree must lie in (0, 1]")
        if self.alpha < 0 or self.min_child_weight < 0:
            raise InvalidArgumentError("alpha and min_child_weight must be nonnegative")
        if self.mode not in (GRADIENT, NEWTON):
            raise InvalidArgumentError(f"unknown boosting mode {self.mode!r}")


@dataclass
class BoostModel:
    """base_score plus a sequence of (tree, eta); prediction is capped."""

    base_score: float
    trees: List[Tuple[TreeNode, float]]
    cap: CapBounds
    partition: object
    feature_names: tuple


class _BinnedView:
    """Integer bin indices per feature plus the threshold each split maps to.

    Splitting after bin k of feature f means routing value < thresholds[f][k]
    to the left. Binned dimensions use their interior boundaries, raw
    dimensions use midpoints between adjacent distinct observed values,
    so a fitted tree is piecewise constant on the partition by
    construction. Missing entries carry bin index -1 and are excluded
    from the scans; each split learns their default direction.
    """

    def __init__(self, table):
        n = len(table)
        nfeat = table.n_features
        self.n = n
        self.nfeat = nfeat
        self.bidx = np.empty((nfeat, n), dtype=np.int32)
        self.miss = np.zeros((nfeat, n), dtype=bool)
        self.thresholds = []
        self.nbins = np.zeros(nfeat, dtype=np.int64)
        part = table.partition
        for f in range(nfeat):
            vals = table.feature_column(f)
            miss = table.feature_miss(f)
            self.miss[f] = miss
            bounds = part.splits[f] if part is not None and f < len(part.splits) else None
            ok = ~miss
            v = vals[ok]
            if bounds is not None:
                if v.size and (v.min() < bounds[0] or v.max() >= bounds[-1]):
                    bad = float(v.min()) if v.min() < bounds[0] else float(v.max())
                    raise OutOfDomainError(table_feature_name(table, f), bad)
                idx = np.searchsorted(bounds, vals, side="right") - 1
                self.bidx[f] = np.where(miss, -1, idx).astype(np.int32)
                self.thresholds.append(np.asarray(bounds[1:-1], dtype=np.float64))
                self.nbins[f] = len(bounds) - 1
            else:
                uniq = np.unique(v)
                idx = np.zeros(n, dtype=np.int64)
                idx[ok] = np.searchsorted(uniq, v)
                self.bidx[f] = np.where(miss, -1, idx).astype(np.int32)
                self.thresholds.append((uniq[:-1] + uniq[1:]) / 2.0 if uniq.size > 1
                                       else np.empty(0))
                self.nbins[f] = uniq.size


def table_feature_name(table, f):
    if f == 0:
        return "t"
    if f == 1:
        return "s"
    return table.names[f - 2]


def _score(G, D, alpha, newton):
    if newton and alpha > 0:
        G = np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)
    num = G * G
    return np.where(D > 0, num / np.where(D > 0, D, 1.0), 0.0)


def _leaf_values(G, D, alpha, newton):
    if newton and alpha > 0:
        G = np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)
    return np.where(D > 0, -G / np.where(D > 0, D, 1.0), 0.0)


def _grow_tree(view, g, h, d, active, feats, params):
    """Grow one exact greedy depth-limited tree; returns the root node."""
    newton = params.mode == NEWTON
    alpha = params.alpha
    mcw = params.min_child_weight
    d_is_h = d is h
    n = view.n

    leaf_id = np.where(active, 0, -1).astype(np.int32)
    node_feat = {}
    node_thr = {}
    node_k = {}
    node_dleft = {}
    node_kids = {}
    node_gain = {}
    node_value = {}
    next_id = 1
    frontier = [0]
    depth = 0
    gain_factor = 0.5 if newton else 1.0

    while frontier:
        nf = len(frontier)
        frontier_arr = np.asarray(frontier, dtype=np.int32)
        in_front = active & np.isin(leaf_id, frontier_arr)
        rows = np.flatnonzero(in_front)
        slot = np.searchsorted(frontier_arr, leaf_id[rows])
        Gp = np.bincount(slot, weights=g[rows], minlength=nf)
        Hp = np.bincount(slot, weights=h[rows], minlength=nf)
        Dp = Hp if d_is_h else np.bincount(slot, weights=d[rows], minlength=nf)

        if depth >= params.max_depth:
            vals = _leaf_values(Gp, Dp, alpha, newton)
            for i, nid in enumerate(frontier):
                node_value[nid] = float(vals[i])
            break

        parent_score = _score(Gp, Dp, alpha, newton)
        min_gain = 1e-12 * (np.abs(parent_score) + 1.0)
        best_gain = np.full(nf, -np.inf)
        best_f = np.full(nf, -1, dtype=np.int64)
        best_k = np.zeros(nf, dtype=np.int64)
        best_dl = np.zeros(nf, dtype=bool)

        for f in feats:
            nb = int(view.nbins[f])
            if nb < 2:
                continue
            fmiss = view.miss[f]
            okr = rows[~fmiss[rows]]
            oslot = slot[~fmiss[rows]]
            key = oslot * nb + view.bidx[f, okr]
            cG = np.bincount(key, weights=g[okr], minlength=nf * nb).reshape(nf, nb).cumsum(axis=1)
            cH = np.bincount(key, weights=h[okr], minlength=nf * nb).reshape(nf, nb).cumsum(axis=1)
            cD = cH if d_is_h else (
                np.bincount(key, weights=d[okr], minlength=nf * nb).reshape(nf, nb).cumsum(axis=1)
            )
            mr = rows[fmiss[rows]]
            if mr.size:
                mslot = slot[fmiss[rows]]
                mG = np.bincount(mslot, weights=g[mr], minlength=nf)
                mH = np.bincount(mslot, weights=h[mr], minlength=nf)
                mD = mH if d_is_h else np.bincount(mslot, weights=d[mr], minlength=nf)
            else:
                mG = mH = mD = np.zeros(nf)

            GLb = cG[:, : nb - 1]
            HLb = cH[:, : nb - 1]
            DLb = cD[:, : nb - 1]
            gains = []
            for miss_left in (True, False):
                GL = GLb + mG[:, None] if miss_left else GLb
                HL = HLb + mH[:, None] if miss_left else HLb
                DL = DLb + mD[:, None] if miss_left else DLb
                GR = Gp[:, None] - GL
                HR = Hp[:, None] - HL
                DR = Dp[:, None] - DL
                gain = gain_factor * (
                    _score(GL, DL, alpha, newton)
                    + _score(GR, DR, alpha, newton)
                    - parent_score[:, None]
                )
                gain[(HL < mcw) | (HR < mcw)] = -np.inf
                gains.append(gain)
            # ties route missing left
            go_left = gains[0] >= gains[1]
            gain = np.where(go_left, gains[0], gains[1])
            k_best = np.argmax(gain, axis=1)
            g_best = gain[np.arange(nf), k_best]
            better = g_best > best_gain
            best_gain[better] = g_best[better]
            best_f[better] = f
            best_k[better] = k_best[better]
            best_dl[better] = go_left[np.arange(nf), k_best][better]

        do_split = best_gain > min_gain
        if not do_split.any():
            vals = _leaf_values(Gp, Dp, alpha, newton)
            for i, nid in enumerate(frontier):
                node_value[nid] = float(vals[i])
            break

        new_frontier = []
        slot_lid = np.full(nf, -1, dtype=np.int32)
        slot_rid = np.full(nf, -1, dtype=np.int32)
        vals = _leaf_values(Gp, Dp, alpha, newton)
        for i, nid in enumerate(frontier):
            if not do_split[i]:
                node_value[nid] = float(vals[i])
                continue
            f = int(best_f[i])
            k = int(best_k[i])
            node_feat[nid] = f
            node_k[nid] = k
            node_thr[nid] = float(view.thresholds[f][k])
            node_dleft[nid] = bool(best_dl[i])
            node_gain[nid] = float(best_gain[i])
            lid, rid = next_id, next_id + 1
            next_id += 2
            node_kids[nid] = (lid, rid)
            slot_lid[i] = lid
            slot_rid[i] = rid
            new_frontier.extend((lid, rid))

        moving = do_split[slot]
        mrows = rows[moving]
        mslot = slot[moving]
        fidx = best_f[mslot]
        bv = view.bidx[fidx, mrows]
        ms = view.miss[fidx, mrows]
        left = np.where(ms, best_dl[mslot], bv <= best_k[mslot])
        leaf_id[mrows] = np.where(left, slot_lid[mslot], slot_rid[mslot])
        frontier = new_frontier
        depth += 1

    def build(nid):
        if nid in node_kids:
            lid, rid = node_kids[nid]
            return Split(
                feature_index=node_feat[nid],
                threshold=node_thr[nid],
                default_left=node_dleft[nid],
                left=build(lid),
                right=build(rid),
                gain=node_gain[nid],
            )
        return Leaf(node_value.get(nid, 0.0))

    return build(0)


class _CompiledTree:
    """Array form of a tree for vectorized routing."""

    def __init__(self, root):
        feat, thr, dleft, left, right, value, is_split = [], [], [], [], [], [], []

        def walk(node):
            idx = len(feat)
            if isinstance(node, Leaf):
                feat.append(0); thr.append(0.0); dleft.append(True)
                left.append(idx); right.append(idx)
                value.append(node.value); is_split.append(False)
                return idx, 0
            feat.append(node.feature_index); thr.append(node.threshold)
            dleft.append(node.default_left)
            left.append(-1); right.append(-1)
            value.append(0.0); is_split.append(True)
            li, dl = walk(node.left)
            ri, dr = walk(node.right)
            left[idx] = li
            right[idx] = ri
            return idx, 1 + max(dl, dr)

        _, self.depth = walk(root)
        self.feat = np.asarray(feat, dtype=np.int64)
        self.thr = np.asarray(thr, dtype=np.float64)
        self.dleft = np.asarray(dleft, dtype=bool)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.is_split = np.asarray(is_split, dtype=bool)


def route_values(root, X, miss=None):
    """Leaf value per row of a float feature matrix X (n, nfeat)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    if miss is None:
        miss = np.isnan(X)
    ct = _CompiledTree(root)
    cur = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    for _ in range(ct.depth):
        active = ct.is_split[cur]
        if not active.any():
            break
        f = ct.feat[cur]
        xv = X[rows, f]
        ms = miss[rows, f]
        go_left = np.where(ms, ct.dleft[cur], xv < ct.thr[cur])
        nxt = np.where(go_left, ct.left[cur], ct.right[cur])
        cur = np.where(active, nxt, cur)
    return ct.value[cur]


def tree_depth(root):
    if isinstance(root, Leaf):
        return 0
    return 1 + max(tree_depth(root.left), tree_depth(root.right))


def _feature_matrix(table):
    cols = [table.t, table.s]
    for dcol in range(table.p):
        cols.append(table.w[:, dcol])
    X = np.column_stack(cols) if len(table) else np.empty((0, table.n_features))
    miss = np.zeros_like(X, dtype=bool)
    if table.p:
        miss[:, 2:] = table.w_miss
    return X, miss


def fit_tree(table, params, rng=None, grad=None, hess=None, targets=None,
             sample_weight=None):
    """Fit one tree on explicit gradients or least-squares targets.

    With grad/hess the tree is grown exactly as one boosting round in
    the given mode. With targets (plus optional per-row sample_weight,
    default the table's weight column) a weighted least-squares tree is
    grown: leaf values are weighted target means and gains are weighted
    sums-of-squares reductions. min_child_weight always constrains the
    hessian sum, using hess when provided and the sample weights
    otherwise.
    """
    if len(table) == 0:
        raise InvalidArgumentError("cannot fit a tree on an empty table")
    view = _BinnedView(table)
    n = len(table)
    if targets is not None:
        w = np.asarray(sample_weight, dtype=np.float64) if sample_weight is not None \
            else table.weight
        g = -(w * np.asarray(targets, dtype=np.float64))
        d = w
        h = np.asarray(hess, dtype=np.float64) if hess is not None else w
        eff = replace(params, mode=GRADIENT)
    else:
        if grad is None or hess is None:
            raise InvalidArgumentError("provide either targets or grad and hess")
        g = np.asarray(grad, dtype=np.float64)
        h = np.asarray(hess, dtype=np.float64)
        d = h if params.mode == NEWTON else table.weight
        eff = params
    active = np.ones(n, dtype=bool)
    feats = np.arange(view.nfeat)
    if rng is not None:
        if eff.subsample < 1.0:
            active = rng.random(n) < eff.subsample
        if eff.colsample_bytree < 1.0:
            k = max(1, int(math.ceil(eff.colsample_bytree * view.nfeat)))
            feats = np.sort(rng.permutation(view.nfeat)[:k])
    return _grow_tree(view, g, h, d, active, feats, eff)


def boost_fit(table, params, seed_path=(), on_round=None):
    """Boosted model per the fixed-step scheme with a rate intercept.

    The first committed step is a depth-0 tree at learning rate 1, i.e.
    base_score = log(total occurrences / total exposure) computed on the
    full table, so later trees refine an already calibrated level. Each
    round draws its row subsample and feature subset from the round's
    own substream of params.seed, fits a tree to the current
    gradients, and advances all rows by eta times the tree.
    """
    if len(table) == 0:
        raise InvalidArgumentError("cannot fit on an empty table")
    occ_total = float(table.occ.sum())
    exp_total = float(table.exp.sum())
    if occ_total <= 0:
        raise DegenerateDataError("table has zero occurrences; the base rate is undefined")
    if exp_total <= 0:
        raise DegenerateDataError("table has zero exposure")
    base = math.log(occ_total / exp_total)
    view = _BinnedView(table)
    X, Xmiss = _feature_matrix(table)
    n = len(table)
    newton = params.mode == NEWTON
    F = np.full(n, base)
    trees = []
    feats_all = np.arange(view.nfeat)
    for r in range(params.nrounds):
        stream = rngmod.substream(params.seed, rngmod.BOOST, *seed_path, r)
        if params.subsample < 1.0:
            active = stream.random(n) < params.subsample
        else:
            active = np.ones(n, dtype=bool)
        if params.colsample_bytree < 1.0:
            k = max(1, int(math.ceil(params.colsample_bytree * view.nfeat)))
            feats = np.sort(stream.permutation(view.nfeat)[:k])
        else:
            feats = feats_all
        eF = np.exp(F)
        h = eF * table.exp
        g = h - table.occ
        d = h if newton else table.weight
        root = _grow_tree(view, g, h, d, active, feats, params)
        F += params.eta * route_values(root, X, Xmiss)
        trees.append((root, params.eta))
        if on_round is not None:
            on_round(r, root, params.eta)
    return BoostModel(
        base_score=base, trees=trees, cap=params.cap,
        partition=table.partition,
        feature_names=("t", "s", *table.names),
    )


def cross_validate_nrounds(table, params, K, max_rounds):
    """Subject-level K-fold selection of the number of boosting rounds.

    Subjects are permuted by the CV substream of params.seed and split
    into K folds. Each fold's complement is collapsed and fitted for
    max_rounds rounds while held-out rows are scored incrementally by
    mean Poisson loss per occurrence/exposure unit; the curve index with
    the smallest mean across folds wins, ties to the smallest count.
    Returns (selected nrounds, mean held-out loss per round 0..max_rounds).
    """
    from .landmark import collapse, MIXED_SUBJECT

    if K < 2:
        raise InvalidArgumentError("K must be at least 2")
    if np.any(table.subject_id == MIXED_SUBJECT):
        raise InvalidArgumentError(
            "cross-validation needs per-subject rows; collapse is applied per fold"
        )
    ids = np.unique(table.subject_id)
    perm = rngmod.substream(params.seed, rngmod.CV, 0).permutation(ids)
    folds = np.array_split(perm, K)
    curves = []
    for fold_i, fold_ids in enumerate(folds):
        held = np.isin(table.subject_id, fold_ids)
        train_tab = collapse(table.subset(~held))
        held_tab = table.subset(held)
        if len(held_tab) == 0:
            continue
        if len(train_tab) == 0 or float(train_tab.occ.sum()) <= 0:
            warnings.warn(f"fold {fold_i}: no occurrences in training split; skipped")
            continue
        Xh, mh = _feature_matrix(held_tab)
        base = math.log(float(train_tab.occ.sum()) / float(train_tab.exp.sum()))
        Fh = np.full(len(held_tab), base)
        losses = np.empty(max_rounds + 1)
        losses[0] = table_loss(held_tab, Fh)

        def on_round(r, root, eta):
            nonlocal Fh
            Fh = Fh + eta * route_values(root, Xh, mh)
            losses[r + 1] = table_loss(held_tab, Fh)

        boost_fit(train_tab, replace(params, nrounds=max_rounds),
                  seed_path=(fold_i,), on_round=on_round)
        curves.append(losses / float(held_tab.weight.sum()))
    if not curves:
        raise DegenerateDataError("every cross-validation fold was skipped")
    mean_curve = np.mean(curves, axis=0)
    best = int(np.argmin(mean_curve))
    return best, mean_curve


def _fmt(x):
    return repr(float(x))


def write_model(model, path, comment=None):
    """Line-oriented text serialization; floats keep full precision.

    Each tree is written in preorder with S lines
    ``S <feature> <threshold> <L|R> <gain>`` (default direction for
    missing values, split gain for importance reports) and leaf lines
    ``L <value>``. The time-bin boundaries ride along because survival
    integration needs them after a reload.
    """
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(f"version {MODEL_FORMAT_VERSION}")
    lines.append(f"p {len(model.feature_names) - 2}")
    lines.append("features " + " ".join(model.feature_names))
    lines.append(f"cap {_fmt(model.cap.log_lambda_lo)} {_fmt(model.cap.log_lambda_hi)}")
    lines.append(f"base_score {_fmt(model.base_score)}")
    tb = model.partition.time_bins if model.partition is not None else None
    if tb is not None:
        lines.append("time_bins " + " ".join(_fmt(b) for b in tb))
    lines.append(f"ntrees {len(model.trees)}")

    def emit(node):
        if isinstance(node, Leaf):
            lines.append(f"L {_fmt(node.value)}")
            return
        side = "L" if node.default_left else "R"
        lines.append(f"S {node.feature_index} {_fmt(node.threshold)} {side} {_fmt(node.gain)}")
        emit(node.left)
        emit(node.right)

    for i, (root, eta) in enumerate(model.trees):
        lines.append(f"tree {i} eta {_fmt(eta)}")
        emit(root)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_model(path):
    from .core import Partition

    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    it = iter(lines)

    def expect(keyword):
        ln = next(it)
        if not ln.startswith(keyword + " "):
            raise InvalidArgumentError(f"model file: expected {keyword!r}, got {ln!r}")
        return ln[len(keyword) + 1:]

    version = int(expect("version"))
    if version != MODEL_FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported model format version {version}")
    p = int(expect("p"))
    names = tuple(expect("features").split(" "))
    if len(names) != p + 2:
        raise InvalidArgumentError("model file: feature list does not match p")
    cap_lo, cap_hi = (float(x) for x in expect("cap").split(" "))
    base = float(expect("base_score"))
    peek = next(it)
    partition = None
    if peek.startswith("time_bins "):
        tb = np.array([float(x) for x in peek.split(" ")[1:]])
        partition = Partition(splits=(tb, None) + (None,) * p, names=names)
        peek = next(it)
    if not peek.startswith("ntrees "):
        raise InvalidArgumentError("model file: expected ntrees")
    ntrees = int(peek.split(" ")[1])

    def parse_node():
        ln = next(it)
        kind, rest = ln.split(" ", 1)
        if kind == "L":
            return Leaf(float(rest))
        if kind == "S":
            f, thr, side, gain = rest.split(" ")
            left = parse_node()
            right = parse_node()
            return Split(int(f), float(thr), side == "L", left, right, float(gain))
        raise InvalidArgumentError(f"model file: bad node line {ln!r}")

    trees = []
    for i in range(ntrees):
        hdr = next(it).split(" ")
        if hdr[0] != "tree" or hdr[2] != "eta":
            raise InvalidArgumentError("model file: bad tree header")
        eta = float(hdr[3])
        trees.append((parse_node(), eta))
    return BoostModel(base_score=base, trees=trees, cap=CapBounds(cap_lo, cap_hi),
                      partition=partition, feature_names=names)
