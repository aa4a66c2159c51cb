"""Synthetic event-history generation and oracle survival probabilities.

Subjects are simulated in three steps that are exactly equivalent to a
joint simulation because the covariate process is autonomous and random
censoring is independent:

1. the covariate path is drawn on the whole window [0, T] (updates at
   rate lambda_W with scenario-specific update rules);
2. the censoring time is min(Exp(lambda_C), T);
3. the event time is the first accepted point of a thinned inhomogeneous
   Poisson process whose intensity is the scenario hazard along the
   frozen path. Between covariate jumps the hazard has a computable
   supremum, so thinning runs segment by segment with a local dominating
   bound instead of one global constant. Every proposal checks the
   bound; a hazard above its envelope aborts the run rather than
   silently biasing the draw.

Oracle survival probabilities continue a path forward from a landmark
with the censoring hazard switched off, using the same thinning scheme
vectorized across Monte Carlo replicates. The two-state scenario also
has a closed-form mode via the matrix exponential of its generator.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from . import rng as rngmod
from .core import CovariatePath, SubjectRecord, value_at, value_before_last_change
from .errors import EnvelopeViolationError, InvalidArgumentError

LINEAR = "linear"
NONLINEAR = "nonlinear"
HIGHDIM = "highdim"
CONSTANT = "constant"
TWO_STATE = "two_state"

LOG_03 = math.log(0.3)
N_NOISE = 47

# Envelope slack for re-evaluated floating point expressions.
_ENV_TOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    """Hazard functional plus covariate and censoring dynamics.

    lambda_W doubles as the flip rate of the two-state scenario.
    sigma_chol is the lower-triangular factor L with L L^T = Sigma for
    the high-dimensional noise block; it is drawn once per dataset seed
    and shared by every subject.
    """

    kind: str
    p: int
    lambda_C: float
    lambda_W: float
    horizon_T: float
    hazard_const: float = 0.0
    a: float = 0.0
    b: float = 0.0
    sigma_chol: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.lambda_C < 0 or self.lambda_W < 0 or self.horizon_T <= 0:
            raise InvalidArgumentError("rates must be nonnegative and horizon positive")
        if (self.sigma_chol is not None) != (self.kind == HIGHDIM):
            raise InvalidArgumentError("sigma_chol is required exactly for the high-dimensional kind")


def scenario_linear(lambda_C=0.2, lambda_W=2.0, horizon_T=1.0):
    return Scenario(LINEAR, 3, lambda_C, lambda_W, horizon_T)


def scenario_nonlinear(lambda_C=0.2, lambda_W=2.0, horizon_T=1.0):
    return Scenario(NONLINEAR, 3, lambda_C, lambda_W, horizon_T)


def scenario_highdim(dataset_seed, lambda_C=0.2, lambda_W=2.0, horizon_T=1.0):
    """High-dimensional variant: 47 no-effect covariates with common Sigma.

    Sigma = A A^T for a 47x47 matrix A of independent standard normals
    drawn from the dataset seed; the stored factor is the Cholesky root
    of Sigma, which generates the same law.
    """
    g = rngmod.substream(dataset_seed, rngmod.SIGMA)
    a_mat = g.standard_normal((N_NOISE, N_NOISE))
    sigma = a_mat @ a_mat.T
    chol = np.linalg.cholesky(sigma)
    chol.setflags(write=False)
    return Scenario(HIGHDIM, 3 + N_NOISE, lambda_C, lambda_W, horizon_T, sigma_chol=chol)


def scenario_constant(c, lambda_C=0.0, lambda_W=0.0, horizon_T=1.0):
    if c <= 0:
        raise InvalidArgumentError("constant hazard must be positive")
    return Scenario(CONSTANT, 0, lambda_C, lambda_W, horizon_T, hazard_const=c)


def scenario_two_state(a, b, flip_rate, lambda_C=0.2, horizon_T=1.0):
    if a <= 0 or a + b <= 0:
        raise InvalidArgumentError("two-state rates must give positive hazards")
    return Scenario(TWO_STATE, 1, lambda_C, flip_rate, horizon_T, a=a, b=b)


def _hazard_values(scenario, t, w, w3_prev):
    """Hazard for vector t (k,), covariates w (k, p), pre-change w3 (k,)."""
    kind = scenario.kind
    if kind == CONSTANT:
        return np.full(np.shape(t), scenario.hazard_const)
    if kind == TWO_STATE:
        return scenario.a + scenario.b * w[:, 0]
    if kind in (LINEAR, HIGHDIM):
        return np.exp(LOG_03 + 0.2 * t + 0.1 * w[:, 0] + 0.3 * w[:, 1] + 0.3 * w[:, 2])
    if kind == NONLINEAR:
        ind = (w[:, 0] == 1.0) & (w[:, 2] < 0.5)
        return np.exp(
            LOG_03
            + 0.3 * np.abs(np.sin(np.pi * t * w[:, 1]))
            + 0.2 * np.cos(w[:, 0])
            + 0.5 * ind
            + 0.3 * w3_prev ** 2
        )
    raise InvalidArgumentError(f"unknown scenario kind {kind!r}")


def _envelope_values(scenario, w, w3_prev, t_hi):
    """Supremum of the hazard over [current time, t_hi] with frozen covariates."""
    kind = scenario.kind
    if kind == CONSTANT:
        return np.full(w.shape[0], scenario.hazard_const)
    if kind == TWO_STATE:
        return scenario.a + scenario.b * w[:, 0]
    if kind in (LINEAR, HIGHDIM):
        # increasing in t, so the segment supremum sits at the right end
        return _hazard_values(scenario, np.full(w.shape[0], t_hi), w, w3_prev)
    if kind == NONLINEAR:
        ind = (w[:, 0] == 1.0) & (w[:, 2] < 0.5)
        return np.exp(LOG_03 + 0.3 + 0.2 * np.cos(w[:, 0]) + 0.5 * ind + 0.3 * w3_prev ** 2)
    raise InvalidArgumentError(f"unknown scenario kind {kind!r}")


def scenario_hazard(scenario, t, path):
    """The hazard alpha{t, path history up to t} as printed per scenario."""
    w = value_at(path, t)[None, :] if scenario.p else np.empty((1, 0))
    if scenario.kind == NONLINEAR:
        w3p = np.array([value_before_last_change(path, t, 2)])
    else:
        w3p = np.zeros(1)
    return float(_hazard_values(scenario, np.array([float(t)]), w, w3p)[0])


def _draw_initial(scenario, rng):
    kind = scenario.kind
    if kind == CONSTANT:
        return np.empty(0)
    if kind == TWO_STATE:
        return np.array([float(rng.random() < 0.5)])
    w = np.empty(scenario.p)
    w[0] = float(rng.random() < 0.5)
    w[1] = float(rng.random() < 0.5)
    w[2] = 0.5 + math.sqrt(0.5) * rng.standard_normal()
    if kind == HIGHDIM:
        w[3:] = scenario.sigma_chol @ rng.standard_normal(N_NOISE)
    return w


def _update(scenario, w, rng):
    kind = scenario.kind
    w = w.copy()
    if kind == TWO_STATE:
        w[0] = 1.0 - w[0]
        return w
    w[1] = float(rng.random() < 0.5)
    w[2] = w[2] + 0.5 + 0.5 * rng.standard_normal()
    if kind == HIGHDIM:
        w[3:] = w[3:] + scenario.sigma_chol @ rng.standard_normal(N_NOISE)
    return w


def _simulate_path(scenario, rng):
    """Covariate path on the full window [0, T]."""
    T = scenario.horizon_T
    times = [0.0]
    values = [_draw_initial(scenario, rng)]
    if scenario.lambda_W > 0 and scenario.p > 0:
        t = 0.0
        scale = 1.0 / scenario.lambda_W
        while True:
            t += rng.exponential(scale)
            if t >= T:
                break
            times.append(t)
            values.append(_update(scenario, values[-1], rng))
    return CovariatePath(np.array(times), np.array(values).reshape(len(times), scenario.p))


def _thin_event(scenario, path, rng, T):
    """First accepted point of the hazard process on (0, T], or None."""
    jt = path.jump_times
    for j in range(len(jt)):
        lo = jt[j]
        hi = jt[j + 1] if j + 1 < len(jt) else T
        hi = min(hi, T)
        if hi <= lo:
            break
        w = path.values[j][None, :]
        if scenario.kind == NONLINEAR:
            w3p = np.array([path.values[j - 1, 2] if j > 0 else 0.0])
        else:
            w3p = np.zeros(1)
        bound = float(_envelope_values(scenario, w, w3p, hi)[0])
        t = lo
        scale = 1.0 / bound
        while True:
            t += rng.exponential(scale)
            if t >= hi:
                break
            alpha = float(_hazard_values(scenario, np.array([t]), w, w3p)[0])
            if alpha > bound * (1.0 + _ENV_TOL):
                raise EnvelopeViolationError(
                    f"hazard {alpha} exceeds envelope {bound} at t={t}"
                )
            if rng.random() < alpha / bound:
                return t
    return None


def simulate_subject(scenario, rng):
    """Draw one SubjectRecord from the scenario's data law."""
    path = _simulate_path(scenario, rng)
    T = scenario.horizon_T
    if scenario.lambda_C > 0:
        censor = min(rng.exponential(1.0 / scenario.lambda_C), T)
    else:
        censor = T
    ev = _thin_event(scenario, path, rng, T)
    event_time = ev if ev is not None and ev <= censor else None
    return SubjectRecord(
        id=0, path=path, event_time=event_time, censor_time=censor, horizon_T=T
    )


def simulate_panel(scenario, n, seed, threads=1):
    """n independent subjects with ids 0..n-1 from per-subject substreams.

    The per-subject streams make the result independent of the worker
    count: subject i is always drawn from substream (seed, SIMULATE, i).
    """
    def one(i):
        rec = simulate_subject(scenario, rngmod.substream(seed, rngmod.SIMULATE, i))
        return SubjectRecord(
            id=i, path=rec.path, event_time=rec.event_time,
            censor_time=rec.censor_time, horizon_T=rec.horizon_T,
        )

    if threads <= 1 or n < 2:
        return [one(i) for i in range(n)]
    from concurrent.futures import ThreadPoolExecutor

    chunks = np.array_split(np.arange(n), threads * 4)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = ex.map(lambda idx: [one(int(i)) for i in idx], chunks)
        out = []
        for part in parts:
            out.extend(part)
    return out


def two_state_survival_analytic(a, b, flip_rate, s, w, horizon):
    """Exact S(horizon | alive at s, W(s)=w) for the two-state scenario.

    The joint (alive, W) process restricted to the alive states is a
    two-state Markov chain with generator rows
    (w=0): flip to w=1 at flip_rate, die at a;
    (w=1): flip to w=0 at flip_rate, die at a+b.
    Survival is the row sum of the matrix exponential.
    """
    if horizon < s:
        raise InvalidArgumentError("horizon must be at or after the landmark")
    gen = np.array([
        [-(flip_rate + a), flip_rate],
        [flip_rate, -(flip_rate + a + b)],
    ])
    probs = expm(gen * (horizon - s)) @ np.ones(2)
    return float(probs[int(w)])


def oracle_survival(scenario, s, path_to_s, horizon, n_sims, rng, method="mc"):
    """P(no event in (s, horizon] | history up to s), censoring switched off.

    The Monte Carlo mode continues the covariate path forward from its
    state at s across n_sims replicates in lockstep, superposing the
    covariate-update process (rate lambda_W) with event proposals at the
    per-replicate envelope rate and classifying each arrival. The
    nonlinear scenario carries the pre-change third covariate so its
    hazard term survives the handoff from observed history to forward
    simulation. The analytic mode is available for the two-state kind.
    """
    if horizon < s or horizon > scenario.horizon_T:
        raise InvalidArgumentError("need s <= horizon <= T")
    if horizon == s:
        return 1.0
    if method == "analytic":
        if scenario.kind != TWO_STATE:
            raise InvalidArgumentError("analytic mode exists only for the two-state kind")
        w0 = value_at(path_to_s, s)[0]
        return two_state_survival_analytic(
            scenario.a, scenario.b, scenario.lambda_W, s, w0, horizon
        )
    if n_sims <= 0:
        raise InvalidArgumentError("n_sims must be positive")

    # Noise covariates of the high-dimensional kind do not enter the
    # hazard, so the forward law of the event time ignores them.
    p_eff = min(scenario.p, 3)
    w0 = value_at(path_to_s, s)[:p_eff] if p_eff else np.empty(0)
    w = np.tile(w0, (n_sims, 1))
    if scenario.kind == NONLINEAR:
        w3p = np.full(n_sims, value_before_last_change(path_to_s, s, 2))
    else:
        w3p = np.zeros(n_sims)
    tt = np.full(n_sims, float(s))
    lam_w = scenario.lambda_W if scenario.p else 0.0
    survived = 0
    bound = _envelope_values(scenario, w, w3p, horizon)
    while tt.size:
        rate = lam_w + bound
        tt = tt + rng.exponential(1.0, size=tt.size) / rate
        alive_past = tt >= horizon
        survived += int(alive_past.sum())
        keep = ~alive_past
        tt, w, w3p, bound, rate = tt[keep], w[keep], w3p[keep], bound[keep], rate[keep]
        if not tt.size:
            break
        is_update = rng.random(tt.size) < lam_w / rate
        if is_update.any():
            idx = np.flatnonzero(is_update)
            if scenario.kind == TWO_STATE:
                w[idx, 0] = 1.0 - w[idx, 0]
            else:
                w3p[idx] = w[idx, 2]
                w[idx, 1] = (rng.random(idx.size) < 0.5).astype(np.float64)
                w[idx, 2] += 0.5 + 0.5 * rng.standard_normal(idx.size)
            bound[idx] = _envelope_values(scenario, w[idx], w3p[idx], horizon)
        prop = np.flatnonzero(~is_update)
        if prop.size:
            alpha = _hazard_values(scenario, tt[prop], w[prop], w3p[prop])
            if np.any(alpha > bound[prop] * (1.0 + _ENV_TOL)):
                raise EnvelopeViolationError("hazard exceeded its envelope in the oracle")
            dead = prop[rng.random(prop.size) < alpha / bound[prop]]
            if dead.size:
                keep = np.ones(tt.size, dtype=bool)
                keep[dead] = False
                tt, w, w3p, bound = tt[keep], w[keep], w3p[keep], bound[keep]
    return survived / n_sims
