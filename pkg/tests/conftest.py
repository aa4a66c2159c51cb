"""Shared test helpers.

The centerpiece is an independent scalar-loop implementation of the
counting-process negative log-likelihood, evaluated directly from
subject paths and landmark draws. It shares nothing with the vectorized
super-dataset expansion except the core bin arithmetic, so agreement
between the two is strong evidence that the expansion is right.
"""
import hashlib
import math
import struct

import numpy as np

from lmboost.core import bin_of, missing_at, value_at


def rep_scalar(boundaries, v):
    """Left endpoint of v's bin, or v itself for a raw dimension."""
    if boundaries is None:
        return float(v)
    return float(boundaries[bin_of(boundaries, v)])


def cell_function(seed):
    """A deterministic pseudo-random piecewise-constant score in [-1, 1].

    Keyed on the exact bit patterns of the cell's feature
    representatives, so evaluating it from a table row and from an
    independently recomputed (t, s, w) triple agrees exactly.
    """

    def F(t_rep, s_rep, w_vals, w_miss):
        h = hashlib.blake2b(digest_size=8)
        h.update(struct.pack("<q", seed))
        h.update(struct.pack("<d", float(t_rep)))
        h.update(struct.pack("<d", float(s_rep)))
        for v, m in zip(w_vals, w_miss):
            h.update(b"M" if m else struct.pack("<d", float(v)))
        u = int.from_bytes(h.digest(), "little") / 2.0 ** 64
        return 2.0 * u - 1.0

    return F


def direct_negative_loglik(subjects, draws, partition, F):
    """-sum over draws of [F dN - integral of exp(F) over the risk window].

    Scalar loops straight over the paths: for each (subject, landmark)
    pair with s before exit, walk the time bins overlapping (s, exit],
    accumulate exp(F) times overlap, and subtract F at the event's bin
    when the subject's event lies in the window. The event bin is
    clamped into the grid so an event exactly at the horizon lands in
    the last bin.
    """
    by_id = {sub.id: sub for sub in subjects}
    tb = partition.time_bins
    total = 0.0
    for d in draws:
        sub = by_id[d.subject_id]
        x = sub.exit_time
        s = d.s
        if s >= x:
            continue
        w = value_at(sub.path, s)
        m = missing_at(sub.path, s)
        s_rep = rep_scalar(partition.splits[1], s)
        w_rep = [
            np.nan if m[dd] else rep_scalar(partition.splits[2 + dd], w[dd])
            for dd in range(len(w))
        ]
        j = bin_of(tb, s)
        while j <= len(tb) - 2 and tb[j] < x:
            lo = max(s, tb[j])
            hi = min(x, tb[j + 1])
            if hi > lo:
                total += math.exp(F(tb[j], s_rep, w_rep, m)) * (hi - lo)
            j += 1
        if sub.event_time is not None:
            jev = min(bin_of(tb, sub.event_time), len(tb) - 2)
            total -= F(tb[jev], s_rep, w_rep, m)
    return total


def table_loss_under(table, F):
    """Poisson loss of the cell function over an occurrence/exposure table."""
    total = 0.0
    for i in range(len(table)):
        fval = F(table.t[i], table.s[i], table.w[i], table.w_miss[i])
        total += math.exp(fval) * table.exp[i] - fval * table.occ[i]
    return total
