"""Optimal type-II exponent for testing against independence over a DMC.

The exponent is the value of

    max I(V;W)  subject to  I(U;W) <= C,  V - U - W,

which is computed through its Lagrangian family

    theta_mu = max_{P(w|u)} I(V;W) + mu (C - I(U;W)),   theta = inf_mu theta_mu.

``theta_mu`` is a non-concave maximisation over the auxiliary channel; it is
solved by multi-restart multiplicative updates (the information-bottleneck
fixed-point map) run on all restarts as one batch. ``theta_direct`` is an
independent exhaustive grid search over the same program and serves as a
lower-bound oracle.
"""

from dataclasses import dataclass, field
import itertools
import logging
import math

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import xlogy

from ._validation import SizeLimitError, ValidationError, check_positive_int
from .probcore import (
    CondPmf,
    JointPmf,
    binary_convolution,
    binary_entropy,
    binary_entropy_inverse,
    mutual_information,
)
from .rng import stream

__all__ = [
    "AuxChannel",
    "ExponentResult",
    "TradeoffRegion",
    "theta_mu",
    "theta",
    "theta_direct",
    "region",
    "r_s_mu_nu",
    "default_mu_grid",
    "dsbs_theta_closed_form",
]

log = logging.getLogger(__name__)

MAX_GRID_CANDIDATES = 10**8
_TIE = 1e-12


@dataclass(frozen=True)
class AuxChannel:
    """Auxiliary channel P(w|u) with ``|W| <= |U| + 1``."""

    cond: CondPmf

    def __post_init__(self):
        cond = self.cond if isinstance(self.cond, CondPmf) else CondPmf(self.cond)
        nu, nw = cond.shape
        if nw > nu + 1:
            raise ValidationError(f"|W| = {nw} exceeds |U| + 1 = {nu + 1}")
        object.__setattr__(self, "cond", cond)

    @property
    def rows(self):
        return self.cond.rows

    @classmethod
    def identity(cls, u_size):
        """W = U, padded with one unused symbol."""
        rows = np.zeros((u_size, u_size + 1))
        rows[np.arange(u_size), np.arange(u_size)] = 1.0
        return cls(CondPmf(rows))

    @classmethod
    def constant(cls, u_size):
        return cls(CondPmf.constant(u_size, u_size + 1))


@dataclass(frozen=True)
class ExponentResult:
    theta: float
    best_mu: float
    best_aux: AuxChannel
    mu_trace: tuple
    method: str = "lagrangian"


@dataclass(frozen=True)
class TradeoffRegion:
    points: tuple
    best_mus: tuple = field(default=())
    corrections: tuple = field(default=())


def default_mu_grid(points=40, lo=1e-2, hi=1e2):
    return np.logspace(math.log10(lo), math.log10(hi), points)


def _source(source):
    return source if isinstance(source, JointPmf) else JointPmf(source)


# ---------------------------------------------------------------------------
# batched information terms for candidate auxiliary channels Q[r, u, w]


def _neg_xlogx_sum(p, axes):
    return -xlogy(p, p).sum(axis=axes)


def _batch_terms(puv, pu, hv, q):
    pw = np.einsum("u,ruk->rk", pu, q)
    hw = _neg_xlogx_sum(pw, -1)
    hw_u = np.einsum("u,ru->r", pu, _neg_xlogx_sum(q, -1))
    pvw = np.einsum("uv,ruk->rvk", puv, q)
    hvw = _neg_xlogx_sum(pvw, (-2, -1))
    i_uw = np.maximum(hw - hw_u, 0.0)
    i_vw = np.maximum(hv + hw - hvw, 0.0)
    return i_uw, i_vw, pw, pvw


def _ib_step(pu, pv_u, neg_hv_u, q, pw, pvw, mu):
    # Q(w|u) <- pw(w) exp(-D(P(v|u) || P(v|w)) / mu), normalised over w
    with np.errstate(divide="ignore", invalid="ignore"):
        pv_w = np.where(pw[:, None, :] > 0, pvw / pw[:, None, :], 0.0)
    log_pv_w = np.log(np.maximum(pv_w, 1e-300))
    kl = neg_hv_u[None, :, None] - np.einsum("uv,rvk->ruk", pv_u, log_pv_w)
    with np.errstate(divide="ignore"):
        logits = np.log(pw)[:, None, :] - kl / mu
    logits -= logits.max(axis=-1, keepdims=True)
    out = np.exp(logits)
    out /= out.sum(axis=-1, keepdims=True)
    return out


def _initial_channels(u_size, restarts, seed):
    k = u_size + 1
    starts = [AuxChannel.identity(u_size).rows, AuxChannel.constant(u_size).rows]
    for r in range(2, max(restarts, 2)):
        gen = stream(seed, r)
        starts.append(gen.dirichlet(np.ones(k), size=u_size))
    return np.stack(starts)


def _run_ib(puv, pu, pv_u, hv, q, mu, max_iter, tol, value_tol=1e-15):
    """Iterate the fixed-point map on every restart until it settles.

    A restart stops once its iterate moves less than ``tol`` or its objective
    gains less than ``value_tol`` in a step; the map never decreases the
    objective, so a stalled gain means a stationary point up to rounding.
    """
    neg_hv_u = -_neg_xlogx_sum(pv_u, -1)
    active = np.ones(q.shape[0], dtype=bool)
    prev = np.full(q.shape[0], -np.inf)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        sub = q[idx]
        i_uw, i_vw, pw, pvw = _batch_terms(puv, pu, hv, sub)
        vals = i_vw - mu * i_uw
        stalled = vals - prev[idx] < value_tol
        prev[idx] = vals
        new = _ib_step(pu, pv_u, neg_hv_u, sub, pw, pvw, mu)
        delta = np.abs(new - sub).max(axis=(1, 2))
        q[idx] = np.where(stalled[:, None, None], sub, new)
        active[idx[(delta < tol) | stalled]] = False
    return q


def theta_mu(source, dmc_capacity, mu, restarts=64, seed=0, max_iter=3000, tol=1e-11):
    """Lagrangian value ``max I(V;W) + mu (C - I(U;W))`` and its maximiser.

    The trivial channels W = U and W = constant are always among the starting
    points, and every restart keeps the better of its start and end point, so
    the returned value is never below either trivial candidate.

    Returns
    -------
    value : float
    argmax : AuxChannel
    """
    restarts = check_positive_int(restarts, "restarts")
    if not mu > 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    if dmc_capacity < 0:
        raise ValidationError(f"capacity must be non-negative, got {dmc_capacity}")
    src = _source(source)
    puv = src.probs
    pu = puv.sum(axis=1)
    hv = float(_neg_xlogx_sum(puv.sum(axis=0), -1))
    u_size = puv.shape[0]

    if mu >= 1.0:
        # DPI gives I(V;W) <= I(U;W), so W = constant is optimal for mu >= 1
        return mu * dmc_capacity, AuxChannel.constant(u_size)

    pv_u = src.conditional().rows
    q0 = _initial_channels(u_size, restarts, seed)
    i_uw, i_vw, _, _ = _batch_terms(puv, pu, hv, q0)
    start_vals = i_vw - mu * i_uw

    q = _run_ib(puv, pu, pv_u, hv, q0.copy(), mu, max_iter, tol)
    i_uw, i_vw, _, _ = _batch_terms(puv, pu, hv, q)
    end_vals = i_vw - mu * i_uw
    keep_start = start_vals > end_vals
    q[keep_start] = q0[keep_start]
    vals = np.where(keep_start, start_vals, end_vals)

    best = int(np.flatnonzero(vals >= vals.max() - _TIE)[0])
    q_best = q[best : best + 1].copy()
    polished = _run_ib(puv, pu, pv_u, hv, q_best.copy(), mu, 10 * max_iter, 1e-14)
    i_uw, i_vw, _, _ = _batch_terms(puv, pu, hv, polished)
    pol_val = float(i_vw[0] - mu * i_uw[0])
    value = float(vals[best])
    if pol_val > value:
        value, q_best = pol_val, polished
    rows = q_best[0] / q_best[0].sum(axis=1, keepdims=True)
    return value + mu * dmc_capacity, AuxChannel(CondPmf(rows))


def theta(source, dmc_capacity, mu_grid=None, restarts=64, seed=0, refine=True, **solver_kw):
    """Optimal exponent as the minimum of ``theta_mu`` over a mu sweep.

    Besides the grid, ``mu = 1`` (where ``theta_mu = C`` exactly) and the
    ``mu -> 0`` limit (where ``theta_mu -> I(U;V)``, recorded as ``mu = 0``)
    are always included, so the result never exceeds ``min(I(U;V), C)``.
    With ``refine`` a bounded scalar search polishes the minimum between the
    neighbours of the best grid point.
    """
    src = _source(source)
    grid = default_mu_grid() if mu_grid is None else np.asarray(mu_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValidationError("mu grid must be non-empty with positive entries")
    if dmc_capacity < 0:
        raise ValidationError(f"capacity must be non-negative, got {dmc_capacity}")

    evals = {}

    def evaluate(mu):
        if mu not in evals:
            evals[mu] = theta_mu(src, dmc_capacity, mu, restarts, seed, **solver_kw)
        return evals[mu][0]

    mus = sorted(set(float(m) for m in grid) | {1.0})
    for mu in mus:
        evaluate(mu)

    vals = [evals[m][0] for m in mus]
    # theta >= 0, so a grid value of 0 is already the infimum
    if refine and min(vals) > _TIE:
        i = int(np.argmin(vals))
        lo = mus[i - 1] if i > 0 else mus[i] / 10
        hi = mus[i + 1] if i + 1 < len(mus) else mus[i]
        if hi > lo:
            minimize_scalar(
                lambda t: evaluate(float(math.exp(t))),
                bounds=(math.log(lo), math.log(hi)),
                method="bounded",
                options={"xatol": 1e-4},
            )

    u_size = src.shape[0]
    evals[0.0] = (mutual_information(src), AuxChannel.identity(u_size))
    trace = tuple(sorted((mu, val) for mu, (val, _) in evals.items()))
    best_val = min(v for _, v in trace)
    best_mu = next(mu for mu, v in trace if v <= best_val + _TIE)
    return ExponentResult(max(best_val, 0.0), best_mu, evals[best_mu][1], trace, "lagrangian")


# ---------------------------------------------------------------------------
# exhaustive oracle


def _compositions(total, parts):
    out = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, comp = -1, []
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(total + parts - 2 - prev)
        out.append(comp)
    return np.array(out, dtype=float)


def _row_entropy(rows):
    return _neg_xlogx_sum(rows, -1)


def theta_direct(source, dmc_capacity, grid_step=0.02, chunk=2_000_000):
    """Exhaustive lower bound on the exponent over a simplex grid.

    Every row of P(w|u) (``|W| = |U| + 1``) ranges over the simplex grid with
    spacing ``grid_step``; the first row is restricted to non-increasing
    entries since relabelling W changes neither information term. Returns the
    largest I(V;W) among grid channels with ``I(U;W) <= C``.
    """
    if not 0 < grid_step <= 0.5:
        raise ValidationError(f"grid_step must lie in (0, 0.5], got {grid_step}")
    src = _source(source)
    puv = src.probs
    pu = puv.sum(axis=1)
    u_size, v_size = puv.shape
    if u_size == 1:
        return 0.0
    k = u_size + 1
    m = max(1, int(round(1.0 / grid_step)))
    grid = _compositions(m, k) / m
    first = grid[np.all(np.diff(grid, axis=1) <= 0, axis=1)]
    n_cand = len(first) * len(grid) ** (u_size - 1)
    if n_cand > MAX_GRID_CANDIDATES:
        raise SizeLimitError(
            f"theta_direct: {n_cand} grid candidates exceed the cap of {MAX_GRID_CANDIDATES}"
        )
    h_grid = _row_entropy(grid)
    h_first = _row_entropy(first)
    hv = float(_neg_xlogx_sum(puv.sum(axis=0), -1))
    limit = dmc_capacity + 1e-12

    row_sets = [(first, h_first)] + [(grid, h_grid)] * (u_size - 1)
    prefix_sets = row_sets[:-2]
    (ga, ha), (gb, hb) = row_sets[-2], row_sets[-1]
    ua, ub = u_size - 2, u_size - 1
    step_a = max(1, chunk // max(1, len(gb) * k * v_size))

    best = 0.0
    for prefix in itertools.product(*(range(len(g)) for g, _ in prefix_sets)):
        pw0 = np.zeros(k)
        pvw0 = np.zeros((v_size, k))
        hwu0 = 0.0
        for u, (gi, (g, h)) in enumerate(zip(prefix, prefix_sets)):
            pw0 += pu[u] * g[gi]
            pvw0 += puv[u][:, None] * g[gi][None, :]
            hwu0 += pu[u] * h[gi]
        for s in range(0, len(ga), step_a):
            a, hA = ga[s : s + step_a], ha[s : s + step_a]
            pw = pw0 + pu[ua] * a[:, None, :] + pu[ub] * gb[None, :, :]
            hw = _neg_xlogx_sum(pw, -1)
            i_uw = hw - (hwu0 + pu[ua] * hA[:, None] + pu[ub] * hb[None, :])
            pvw = (pvw0[None, None]
                   + puv[ua][None, None, :, None] * a[:, None, None, :]
                   + puv[ub][None, None, :, None] * gb[None, :, None, :])
            i_vw = hv + hw - _neg_xlogx_sum(pvw, (-2, -1))
            ok = i_uw <= limit
            if np.any(ok):
                best = max(best, float(i_vw[ok].max()))
    return max(best, 0.0)


# ---------------------------------------------------------------------------
# trade-off curve


def region(source, capacity_grid, **theta_kw):
    """Points ``(C, theta(C))`` with a running-max guard against solver noise."""
    caps = [float(c) for c in capacity_grid]
    if any(c < 0 for c in caps) or any(b < a for a, b in zip(caps, caps[1:])):
        raise ValidationError("capacity grid must be sorted ascending and non-negative")
    points, mus, corrections = [], [], []
    running = -math.inf
    for c in caps:
        res = theta(source, c, **theta_kw)
        val = res.theta
        if val < running:
            corrections.append((c, running - val))
            log.info("region: raised theta at C=%.6g by %.3e (monotonicity guard)", c, running - val)
            val = running
        running = val
        points.append((c, val))
        mus.append(res.best_mu)
    for (c0, t0), (c1, t1), (c2, t2) in zip(points, points[1:], points[2:]):
        if c2 > c0:
            chord = t0 + (t2 - t0) * (c1 - c0) / (c2 - c0)
            if t1 < chord - 1e-3:
                log.warning("region: concavity violated at C=%.6g by %.3e", c1, chord - t1)
    return TradeoffRegion(tuple(points), tuple(mus), tuple(corrections))


def dsbs_theta_closed_form(crossover, dmc_capacity):
    """Exponent for a doubly symmetric binary source, via Mrs. Gerber's lemma."""
    residual = max(math.log(2) - dmc_capacity, 0.0)
    a = binary_entropy_inverse(residual)
    return math.log(2) - binary_entropy(binary_convolution(crossover, a))


# ---------------------------------------------------------------------------
# single-letter bound with divergence penalty


def _rs_value(p, log_puv, mu, nu, cap):
    # J = H(V) + (1-mu) H(W) - H(VW) + nu H(U) - nu H(UW) + (nu+mu) [H(UVW) + sum p ln P] + mu C
    a = nu + mu
    h = lambda x: float(-xlogy(x, x).sum())
    puv = p.sum(axis=2)
    on = puv > 0
    # mass off the support of P_UV makes the divergence infinite
    cross = float(np.sum(puv[on] * log_puv[on])) if np.all(np.isfinite(log_puv[on])) else -math.inf
    return (h(p.sum(axis=(0, 2))) + (1 - mu) * h(p.sum(axis=(0, 1))) - h(p.sum(axis=0))
            + nu * h(p.sum(axis=(1, 2))) - nu * h(p.sum(axis=1)) + a * h(p) + a * cross + mu * cap)


def _rs_objective(theta_vec, mask, log_puv, mu, nu, cap):
    a = nu + mu
    z = theta_vec - theta_vec.max()
    w = np.exp(z)
    w /= w.sum()
    p = np.zeros(mask.shape)
    p[mask] = w
    val = _rs_value(p, log_puv, mu, nu, cap)
    lg = lambda x: np.log(np.maximum(x, 1e-300))
    pv = p.sum(axis=(0, 2))
    pw = p.sum(axis=(0, 1))
    pvw = p.sum(axis=0)
    pu = p.sum(axis=(1, 2))
    puw = p.sum(axis=1)
    g = (-lg(pv)[None, :, None] - (1 - mu) * lg(pw)[None, None, :] + lg(pvw)[None, :, :]
         - nu * lg(pu)[:, None, None] + nu * lg(puw)[:, None, :]
         - a * lg(p) + a * np.where(np.isfinite(log_puv), log_puv, 0.0)[:, :, None])
    gm = g[mask]
    grad = w * (gm - np.dot(w, gm))
    return -val, -grad


def r_s_mu_nu(source, dmc_capacity, mu, nu, restarts=8, seed=0, theta_mu_restarts=64):
    """Single-letter penalised bound maximised over joints on U x V x W.

    The objective is ``I(V;W) + mu C - mu I(U;W) - (nu+mu) I(V;W|U)
    - (nu+mu) D(P~_UV || P_UV)`` with ``|W| = |U| + 1``. The candidate
    ``P_UV x argmax theta_mu`` (zero penalties) is always evaluated and used
    as the first starting point; further starts are random. Each start is
    improved by quasi-Newton ascent on softmax logits.
    """
    restarts = check_positive_int(restarts, "restarts")
    if not (mu > 0 and nu > 0):
        raise ValidationError("mu and nu must be positive")
    src = _source(source)
    puv = src.probs
    u_size, v_size = puv.shape
    k = u_size + 1
    with np.errstate(divide="ignore"):
        log_puv = np.log(puv)
    # cells outside the support of P_UV make the divergence infinite
    mask = np.broadcast_to((puv > 0)[:, :, None], (u_size, v_size, k)).copy()

    _, aux = theta_mu(src, dmc_capacity, mu, theta_mu_restarts, seed)
    cand = puv[:, :, None] * aux.rows[:, None, :]
    best = _rs_value(cand, log_puv, mu, nu, dmc_capacity)

    starts = [np.log(np.maximum(cand[mask], 1e-12))]
    for r in range(1, restarts):
        gen = stream(seed, 1000 + r)
        starts.append(np.log(gen.dirichlet(np.ones(int(mask.sum())))))
    for x0 in starts:
        res = minimize(_rs_objective, x0, args=(mask, log_puv, mu, nu, dmc_capacity),
                       jac=True, method="L-BFGS-B", options={"maxiter": 500})
        val = -float(res.fun)
        if np.isfinite(val) and val > best:
            best = val
    return best
