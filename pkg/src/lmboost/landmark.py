"""Landmark draws and the occurrence/exposure super-dataset.

A draw (subject i, landmark s) with s before the subject's exit X
contributes, for every time bin [b_j, b_{j+1}) overlapping (s, X], one
row holding the bin's representative time, the landmark, the covariate
vector observed at s, the at-risk overlap length (exposure) and an
occurrence flag for the bin containing the event. Summing the Poisson
loss over these rows reproduces the counting-process log-likelihood of
the landmark super-dataset exactly, which is what makes tree boosting
with Poisson loss applicable.

Feature values are stored at the resolution of the partition: the time
coordinate is always the left endpoint of its bin, and any other
dimension with explicit boundaries is mapped to its bin's left endpoint
as well. Dimensions without boundaries (raw precision) pass through
unchanged. Collapsing merges rows with identical features by summing
occurrences, exposures and multiplicities; because the loss depends on
the features only through the cell, the collapse is loss-preserving for
every piecewise-constant model on the partition.
"""
import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .core import LandmarkDraw, value_at, missing_at
from .errors import InvalidArgumentError, OutOfDomainError

log = logging.getLogger(__name__)

UNIFORM = "uniform"
VISIT_BASED = "visit"

# subject_id of a collapsed row that merged rows from several subjects
MIXED_SUBJECT = -1


@dataclass(frozen=True)
class LandmarkScheme:
    kind: str
    Q: int
    horizon_T: float

    def __post_init__(self):
        if self.kind not in (UNIFORM, VISIT_BASED):
            raise InvalidArgumentError(f"unknown landmark scheme {self.kind!r}")
        if self.Q < 1:
            raise InvalidArgumentError("Q must be at least 1")


def draw_landmarks(scheme, subject, rng):
    """Q landmark draws for one subject.

    Uniform: S_q ~ Unif(0, T). Visit-based: U ~ Unif(0, T); a draw past
    the exit time keeps s = U (it contributes nothing downstream),
    otherwise s is a uniform pick among the observed post-enrollment
    visit times, i.e. those strictly before exit; path changes at or
    past exit are never observed and never eligible. A pre-exit draw
    for a subject without such visits is discarded.
    """
    out = []
    exit_time = subject.exit_time
    visits = subject.path.jump_times[1:]
    visits = visits[visits < exit_time]
    for q in range(1, scheme.Q + 1):
        u = rng.uniform(0.0, scheme.horizon_T)
        if scheme.kind == UNIFORM:
            out.append(LandmarkDraw(subject.id, q, float(u)))
            continue
        if u > exit_time:
            out.append(LandmarkDraw(subject.id, q, float(u)))
            continue
        if visits.size == 0:
            log.debug("subject %s has no post-enrollment visits; draw %d discarded",
                      subject.id, q)
            continue
        pick = int(rng.integers(visits.size))
        out.append(LandmarkDraw(subject.id, q, float(visits[pick])))
    return out


def draw_landmarks_panel(scheme, subjects, seed):
    """Landmark draws for a panel, one substream per subject id."""
    out = []
    for sub in subjects:
        out.extend(draw_landmarks(scheme, sub, rngmod.substream(seed, rngmod.LANDMARK, sub.id)))
    return out


@dataclass
class OccExpTable:
    """Occurrence/exposure rows as a struct of arrays.

    t, s: (n,) feature columns; w: (n, p) covariates with w_miss the
    authoritative missing mask (missing value slots hold NaN); occ and
    exp are the occurrence counts and at-risk times; weight counts the
    pre-collapse multiplicity of a row; subject_id is MIXED_SUBJECT for
    rows merged across subjects.
    """

    t: np.ndarray
    s: np.ndarray
    w: np.ndarray
    w_miss: np.ndarray
    occ: np.ndarray
    exp: np.ndarray
    subject_id: np.ndarray
    weight: np.ndarray
    partition: object
    names: tuple

    def __len__(self):
        return self.t.shape[0]

    @property
    def p(self):
        return self.w.shape[1]

    @property
    def n_features(self):
        return 2 + self.p

    def feature_column(self, f):
        if f == 0:
            return self.t
        if f == 1:
            return self.s
        return self.w[:, f - 2]

    def feature_miss(self, f):
        if f < 2:
            return np.zeros(len(self), dtype=bool)
        return self.w_miss[:, f - 2]

    def subset(self, mask_or_idx):
        return OccExpTable(
            t=self.t[mask_or_idx], s=self.s[mask_or_idx],
            w=self.w[mask_or_idx], w_miss=self.w_miss[mask_or_idx],
            occ=self.occ[mask_or_idx], exp=self.exp[mask_or_idx],
            subject_id=self.subject_id[mask_or_idx], weight=self.weight[mask_or_idx],
            partition=self.partition, names=self.names,
        )


def _rep_values(boundaries, vals, miss, dim_name):
    """Map values to their bin's left endpoint; raw dims pass through."""
    if boundaries is None:
        return vals
    ok = ~miss
    v = vals[ok]
    if v.size and (v.min() < boundaries[0] or v.max() >= boundaries[-1]):
        bad = v[(v < boundaries[0]) | (v >= boundaries[-1])][0]
        raise OutOfDomainError(dim_name, float(bad))
    out = vals.copy()
    out[ok] = boundaries[np.searchsorted(boundaries, v, side="right") - 1]
    return out


def build_super_dataset(subjects, draws, partition):
    """Uncollapsed occurrence/exposure table for the given landmark draws.

    Draws at or past a subject's exit contribute nothing. For each
    remaining pair, exposures over (s, X] are split across time bins;
    the event lands in the bin containing it under the half-open
    convention, including the measure-zero edge where the event sits
    exactly on a boundary, in which case its bin carries a zero-exposure
    occurrence row.
    """
    by_id = {sub.id: sub for sub in subjects}
    p = partition.p
    tb = partition.time_bins
    n_draws = len(draws)

    s_arr = np.empty(n_draws)
    x_arr = np.empty(n_draws)
    ev_arr = np.full(n_draws, np.nan)
    w_arr = np.empty((n_draws, p))
    m_arr = np.zeros((n_draws, p), dtype=bool)
    sid_arr = np.empty(n_draws, dtype=np.int64)
    keep = np.zeros(n_draws, dtype=bool)
    for i, d in enumerate(draws):
        sub = by_id[d.subject_id]
        x = sub.exit_time
        if d.s >= x:
            continue
        keep[i] = True
        s_arr[i] = d.s
        x_arr[i] = x
        if sub.event_time is not None:
            ev_arr[i] = sub.event_time
        if p:
            w_arr[i] = value_at(sub.path, d.s)
            m_arr[i] = missing_at(sub.path, d.s)
        sid_arr[i] = sub.id
    s_arr, x_arr, ev_arr = s_arr[keep], x_arr[keep], ev_arr[keep]
    w_arr, m_arr, sid_arr = w_arr[keep], m_arr[keep], sid_arr[keep]
    n_pairs = s_arr.size

    if n_pairs == 0:
        return OccExpTable(
            t=np.empty(0), s=np.empty(0), w=np.empty((0, p)),
            w_miss=np.empty((0, p), dtype=bool), occ=np.empty(0), exp=np.empty(0),
            subject_id=np.empty(0, dtype=np.int64), weight=np.empty(0),
            partition=partition, names=partition.names[2:],
        )
    if s_arr.min() < tb[0] or x_arr.max() > tb[-1]:
        raise OutOfDomainError("t", float(x_arr.max()))

    j0 = np.searchsorted(tb, s_arr, side="right") - 1
    j1 = np.searchsorted(tb, x_arr, side="left") - 1
    has_event = ~np.isnan(ev_arr)
    j_ev = np.full(n_pairs, -1, dtype=np.int64)
    if has_event.any():
        je = np.searchsorted(tb, ev_arr[has_event], side="right") - 1
        # an event exactly at T belongs to the last bin
        j_ev[has_event] = np.minimum(je, len(tb) - 2)

    counts = j1 - j0 + 1
    total = int(counts.sum())
    pair_of = np.repeat(np.arange(n_pairs), counts)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    j = j0[pair_of] + (np.arange(total) - np.repeat(starts, counts))

    exp_col = np.minimum(x_arr[pair_of], tb[j + 1]) - np.maximum(s_arr[pair_of], tb[j])
    occ_col = (has_event[pair_of] & (j == j_ev[pair_of])).astype(np.float64)

    # boundary events fall in the bin past the last exposure bin
    extra = np.flatnonzero(has_event & (j_ev > j1))
    if extra.size:
        pair_of = np.concatenate([pair_of, extra])
        j = np.concatenate([j, j_ev[extra]])
        exp_col = np.concatenate([exp_col, np.zeros(extra.size)])
        occ_col = np.concatenate([occ_col, np.ones(extra.size)])

    s_feat = _rep_values(partition.splits[1], s_arr.copy(), np.zeros(n_pairs, dtype=bool), "s")
    w_feat = w_arr.copy()
    for d in range(p):
        w_feat[:, d] = _rep_values(
            partition.splits[2 + d], w_feat[:, d], m_arr[:, d], partition.names[2 + d]
        )
    w_feat[m_arr] = np.nan

    return OccExpTable(
        t=tb[j], s=s_feat[pair_of], w=w_feat[pair_of], w_miss=m_arr[pair_of],
        occ=occ_col, exp=exp_col, subject_id=sid_arr[pair_of],
        weight=np.ones(pair_of.size), partition=partition, names=partition.names[2:],
    )


def _group_keys(table):
    """Sort order and group boundaries for rows with identical features."""
    cols = [table.t, table.s]
    for d in range(table.p):
        col = table.w[:, d].copy()
        col[table.w_miss[:, d]] = np.inf  # missing compares equal to missing
        cols.append(col)
    order = np.lexsort(cols[::-1])
    stacked = np.column_stack(cols)[order]
    if stacked.shape[0] == 0:
        return order, np.empty(0, dtype=np.int64)
    new_group = np.ones(stacked.shape[0], dtype=bool)
    new_group[1:] = np.any(stacked[1:] != stacked[:-1], axis=1)
    return order, np.flatnonzero(new_group)


def collapse(table):
    """Merge rows with identical feature vectors (missing equal to missing).

    Occurrences, exposures and weights are summed; the subject id is
    kept only when a group comes from a single subject and is otherwise
    marked MIXED_SUBJECT.
    """
    if len(table) == 0:
        return table
    order, starts = _group_keys(table)
    occ = np.add.reduceat(table.occ[order], starts)
    exp_ = np.add.reduceat(table.exp[order], starts)
    weight = np.add.reduceat(table.weight[order], starts)
    sid = table.subject_id[order]
    sid_min = np.minimum.reduceat(sid, starts)
    sid_max = np.maximum.reduceat(sid, starts)
    sid_out = np.where(sid_min == sid_max, sid_min, MIXED_SUBJECT)
    first = order[starts]
    return OccExpTable(
        t=table.t[first], s=table.s[first], w=table.w[first], w_miss=table.w_miss[first],
        occ=occ, exp=exp_, subject_id=sid_out, weight=weight,
        partition=table.partition, names=table.names,
    )


def concat_tables(tables):
    tables = [tb for tb in tables if len(tb)]
    if not tables:
        raise InvalidArgumentError("nothing to concatenate")
    ref = tables[0]
    return OccExpTable(
        t=np.concatenate([tb.t for tb in tables]),
        s=np.concatenate([tb.s for tb in tables]),
        w=np.concatenate([tb.w for tb in tables]),
        w_miss=np.concatenate([tb.w_miss for tb in tables]),
        occ=np.concatenate([tb.occ for tb in tables]),
        exp=np.concatenate([tb.exp for tb in tables]),
        subject_id=np.concatenate([tb.subject_id for tb in tables]),
        weight=np.concatenate([tb.weight for tb in tables]),
        partition=ref.partition, names=ref.names,
    )


def build_collapsed_super_dataset(subjects, draws, partition, chunk_draws=50_000):
    """build_super_dataset followed by collapse, in bounded memory.

    Collapsing is associative, so chunks of draws are built and
    collapsed eagerly before a final merge.
    """
    parts = []
    for lo in range(0, len(draws), chunk_draws):
        part = build_super_dataset(subjects, draws[lo:lo + chunk_draws], partition)
        if len(part):
            parts.append(collapse(part))
    if not parts:
        return build_super_dataset(subjects, [], partition)
    return collapse(concat_tables(parts))


def write_table_csv(table, path, comment=None):
    """Serialize with full float precision; missing entries are empty fields."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "s", *table.names, "occ", "exp", "subject_id", "weight"])
        for i in range(len(table)):
            row = [repr(float(table.t[i])), repr(float(table.s[i]))]
            for d in range(table.p):
                row.append("" if table.w_miss[i, d] else repr(float(table.w[i, d])))
            row.extend([
                str(int(table.occ[i])), repr(float(table.exp[i])),
                str(int(table.subject_id[i])), str(int(table.weight[i])),
            ])
            writer.writerow(row)


def read_table_csv(path, partition=None):
    """Inverse of write_table_csv; the in-memory partition is not stored in
    the file and must be resupplied by the caller when needed downstream."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header = rows[0]
    if header[:2] != ["t", "s"] or header[-4:] != ["occ", "exp", "subject_id", "weight"]:
        raise InvalidArgumentError(f"unrecognized table header in {path}")
    names = tuple(header[2:-4])
    p = len(names)
    body = rows[1:]
    n = len(body)
    t = np.empty(n); s = np.empty(n)
    w = np.empty((n, p)); w_miss = np.zeros((n, p), dtype=bool)
    occ = np.empty(n); exp_ = np.empty(n)
    sid = np.empty(n, dtype=np.int64); weight = np.empty(n)
    for i, r in enumerate(body):
        t[i] = float(r[0]); s[i] = float(r[1])
        for d in range(p):
            cell = r[2 + d]
            if cell == "":
                w[i, d] = np.nan
                w_miss[i, d] = True
            else:
                w[i, d] = float(cell)
        occ[i] = float(r[2 + p]); exp_[i] = float(r[3 + p])
        sid[i] = int(r[4 + p]); weight[i] = float(r[5 + p])
    return OccExpTable(t=t, s=s, w=w, w_miss=w_miss, occ=occ, exp=exp_,
                       subject_id=sid, weight=weight, partition=partition, names=names)
