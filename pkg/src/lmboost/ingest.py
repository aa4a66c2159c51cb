"""Longitudinal CSV ingestion into subject records.

One row per subject visit; a schema names the id, visit-time, exit-time
and status columns and lists the covariates. Covariate values observed
at a visit hold until the next visit (step-function paths); a value
missing at a visit is carried forward from the last visit that observed
it, and stays flagged missing until the first observation. Categorical
levels are coded by sorted level string, and the code books are
returned so reports can translate back.
"""
import csv
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import CovariatePath, SubjectRecord
from .errors import DataError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

EVENT_STATUS = "event"
CENSORED_STATUS = "censored"


@dataclass(frozen=True)
class LongitudinalSchema:
    id_col: str
    visit_col: str
    exit_col: str
    status_col: str
    event_statuses: frozenset
    covariates: Tuple[Tuple[str, str], ...]
    missing_token: str = ""
    censor_col: Optional[str] = None

    @property
    def covariate_names(self):
        return tuple(name for name, _ in self.covariates)


# round-trip schema for files written by write_longitudinal_csv
def simulated_schema(covariate_names):
    return LongitudinalSchema(
        id_col="id", visit_col="visit", exit_col="exit", status_col="status",
        event_statuses=frozenset({EVENT_STATUS}),
        covariates=tuple((n, NUMERIC) for n in covariate_names),
        censor_col="censor",
    )


# schema for the Mayo primary biliary cirrhosis follow-up data shipped
# in data/pbc2.csv; transplantation counts as an event alongside death
PBC2_SCHEMA = LongitudinalSchema(
    id_col="id", visit_col="year", exit_col="years", status_col="status",
    event_statuses=frozenset({"dead", "transplanted"}),
    covariates=(
        ("drug", CATEGORICAL),
        ("age", NUMERIC),
        ("sex", CATEGORICAL),
        ("ascites", CATEGORICAL),
        ("hepatomegaly", CATEGORICAL),
        ("spiders", CATEGORICAL),
        ("edema", CATEGORICAL),
        ("serBilir", NUMERIC),
        ("serChol", NUMERIC),
        ("albumin", NUMERIC),
        ("alkaline", NUMERIC),
        ("SGOT", NUMERIC),
        ("platelets", NUMERIC),
        ("prothrombin", NUMERIC),
        ("histologic", NUMERIC),
    ),
)

PBC2_HORIZON = 14.31


def _parse_float(text, col, rownum):
    try:
        return float(text)
    except ValueError:
        raise DataError(f"row {rownum}: column {col!r} is not numeric: {text!r}") from None


def read_longitudinal_csv(path, schema, horizon_T):
    """Parse a longitudinal CSV into subject records.

    Returns (subjects, level_maps) where level_maps maps each
    categorical covariate name to its level -> code dictionary. Events
    recorded after horizon_T are treated as absent and the subject is
    administratively censored at horizon_T; visits at or past the
    subject's effective exit are dropped.

    Raises DataError for a missing column, a non-numeric value, a
    duplicated visit time, a visit after the recorded exit, or a
    subject whose first visit is not at time zero.
    """
    if horizon_T <= 0:
        raise DataError("horizon_T must be positive")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    col_idx = {}
    needed = [schema.id_col, schema.visit_col, schema.exit_col, schema.status_col]
    needed += [name for name, _ in schema.covariates]
    if schema.censor_col:
        needed.append(schema.censor_col)
    for col in needed:
        if col not in header:
            raise DataError(f"{path}: missing column {col!r}")
        col_idx[col] = header.index(col)

    # two passes: levels first so codes do not depend on subject order
    level_maps = {}
    for name, kind in schema.covariates:
        if kind != CATEGORICAL:
            continue
        j = col_idx[name]
        seen = {r[j] for r in rows[1:] if r[j] != schema.missing_token}
        level_maps[name] = {lvl: float(c) for c, lvl in enumerate(sorted(seen))}

    by_subject = {}
    for rownum, r in enumerate(rows[1:], start=2):
        sid_text = r[col_idx[schema.id_col]]
        try:
            sid = int(sid_text)
        except ValueError:
            raise DataError(f"row {rownum}: subject id {sid_text!r} is not an integer") from None
        by_subject.setdefault(sid, []).append((rownum, r))

    subjects = []
    for sid in sorted(by_subject):
        recs = by_subject[sid]
        visits = [_parse_float(r[col_idx[schema.visit_col]], schema.visit_col, rn)
                  for rn, r in recs]
        order = np.argsort(visits, kind="stable")
        visits = [visits[k] for k in order]
        recs = [recs[k] for k in order]
        if len(set(visits)) != len(visits):
            raise DataError(f"subject {sid}: duplicated visit times")
        if visits[0] != 0.0:
            raise DataError(f"subject {sid}: first visit must be at time zero")

        rn0, r0 = recs[0]
        exit_raw = _parse_float(r0[col_idx[schema.exit_col]], schema.exit_col, rn0)
        status = r0[col_idx[schema.status_col]]
        for rn, r in recs[1:]:
            if _parse_float(r[col_idx[schema.exit_col]], schema.exit_col, rn) != exit_raw:
                raise DataError(f"subject {sid}: exit time differs across rows")
            if r[col_idx[schema.status_col]] != status:
                raise DataError(f"subject {sid}: status differs across rows")
        if exit_raw <= 0:
            raise DataError(f"subject {sid}: exit time must be positive")
        if any(v > exit_raw for v in visits):
            raise DataError(f"subject {sid}: a visit is recorded after exit")

        is_event = status in schema.event_statuses
        if is_event and exit_raw <= horizon_T:
            event_time = exit_raw
            if schema.censor_col:
                censor_time = min(
                    _parse_float(r0[col_idx[schema.censor_col]], schema.censor_col, rn0),
                    horizon_T,
                )
            else:
                censor_time = horizon_T
        else:
            event_time = None
            censor_time = min(exit_raw, horizon_T)
        cut = min(event_time if event_time is not None else np.inf, censor_time)
        kept = [(v, rn, r) for v, (rn, r) in zip(visits, recs) if v < cut or v == 0.0]

        p = len(schema.covariates)
        jt = np.array([v for v, _, _ in kept])
        vals = np.empty((len(kept), p))
        miss = np.zeros((len(kept), p), dtype=bool)
        last = np.full(p, np.nan)
        last_seen = np.zeros(p, dtype=bool)
        for i, (v, rn, r) in enumerate(kept):
            for d, (name, kind) in enumerate(schema.covariates):
                text = r[col_idx[name]]
                if text == schema.missing_token:
                    if last_seen[d]:
                        vals[i, d] = last[d]
                    else:
                        vals[i, d] = np.nan
                        miss[i, d] = True
                else:
                    if kind == CATEGORICAL:
                        vals[i, d] = level_maps[name][text]
                    else:
                        vals[i, d] = _parse_float(text, name, rn)
                    last[d] = vals[i, d]
                    last_seen[d] = True
        path_obj = CovariatePath(jump_times=jt, values=vals, miss=miss)
        subjects.append(SubjectRecord(
            id=sid, path=path_obj, event_time=event_time,
            censor_time=censor_time, horizon_T=horizon_T,
        ))
    return subjects, level_maps


def visit_times(subject):
    """Post-baseline measurement times, i.e. the jump times after zero."""
    return subject.path.jump_times[1:].copy()


def pooled_visit_fractions(subjects):
    """Each post-baseline visit time divided by its subject's exit time.

    Under uniformly timed visits these fractions are roughly uniform on
    (0, 1); reports quote the Kolmogorov-Smirnov distance from uniform
    as a descriptive check, never as a hard gate.
    """
    fracs = []
    for sub in subjects:
        ex = sub.exit_time
        for v in visit_times(sub):
            fracs.append(v / ex)
    return np.array(fracs)


def write_longitudinal_csv(subjects, path, covariate_names, comment=None):
    """Write subjects as a longitudinal CSV of their observed visits.

    Columns: id, visit, exit, status, censor, then the covariates. Only
    visits before the subject's exit are written, since nothing later
    is ever observed; floats use repr, so a write/read round trip with
    simulated_schema and the same horizon reproduces the observed part
    of every record exactly, and landmark super-datasets built from the
    two sides agree bit for bit.
    """
    names = tuple(covariate_names)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        wr = csv.writer(fh)
        wr.writerow(["id", "visit", "exit", "status", "censor", *names])
        for sub in subjects:
            if len(names) != sub.path.p:
                raise DataError("covariate_names must match the paths")
            if sub.event_time is not None:
                status, exit_val = EVENT_STATUS, sub.event_time
            else:
                status, exit_val = CENSORED_STATUS, sub.censor_time
            ex = sub.exit_time
            for i, v in enumerate(sub.path.jump_times):
                if v >= ex and v != 0.0:
                    continue
                cells = [str(sub.id), repr(float(v)), repr(float(exit_val)), status,
                         repr(float(sub.censor_time))]
                for d in range(sub.path.p):
                    if sub.path.miss[i, d]:
                        cells.append("")
                    else:
                        cells.append(repr(float(sub.path.values[i, d])))
                wr.writerow(cells)
