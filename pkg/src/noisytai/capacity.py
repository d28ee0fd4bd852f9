"""Channel capacity of a discrete memoryless channel.

Capacity is computed with Blahut-Arimoto iterations that carry two-sided
bounds: at input law ``r`` the mutual information ``I(r)`` is a lower bound
and ``max_x D(P(.|x) || rP)`` an upper bound on capacity.
"""

from dataclasses import dataclass
import math

import numpy as np

from ._validation import ConvergenceError, ValidationError, check_unit_interval
from .probcore import CondPmf, Pmf, binary_entropy

__all__ = [
    "Dmc",
    "CapacityResult",
    "capacity",
    "min_positive_transition",
    "closed_form_capacity",
    "bsc",
    "bec",
]

MAX_ITER = 100_000


@dataclass(frozen=True)
class Dmc:
    transition: CondPmf

    def __post_init__(self):
        if not isinstance(self.transition, CondPmf):
            object.__setattr__(self, "transition", CondPmf(self.transition))

    @property
    def matrix(self):
        return self.transition.rows

    @property
    def x_size(self):
        return self.transition.shape[0]

    @property
    def y_size(self):
        return self.transition.shape[1]

    @property
    def p_floor(self):
        return min_positive_transition(self)


@dataclass(frozen=True)
class CapacityResult:
    value: float
    input_dist: Pmf
    iterations: int
    gap: float
    lower_bounds: tuple = ()

    @property
    def bits(self):
        return self.value / math.log(2)


def _as_matrix(dmc):
    if isinstance(dmc, Dmc):
        return dmc.matrix
    if isinstance(dmc, CondPmf):
        return dmc.rows
    return CondPmf(dmc).rows


def min_positive_transition(dmc):
    """Smallest strictly positive transition probability of the channel."""
    w = _as_matrix(dmc)
    return float(w[w > 0].min())


def _divergences(w, r):
    q = r @ w
    logw = np.log(np.where(w > 0, w, 1.0))
    logq = np.log(np.where(q > 0, q, 1.0))
    d = np.sum(np.where(w > 0, w * (logw - logq[None, :]), 0.0), axis=1)
    # an output with positive W but zero q is only reachable from unused inputs
    unseen = (w > 0) & (q[None, :] <= 0)
    d[np.any(unseen, axis=1)] = np.inf
    return d


def capacity(dmc, tol=1e-9, max_iter=MAX_ITER, keep_trace=False):
    """Capacity in nats, certified to within ``tol`` by the dual gap.

    Parameters
    ----------
    dmc : Dmc, CondPmf or array-like
        Transition matrix with rows indexed by channel input.
    tol : float
        Stop once ``upper - lower <= tol``.
    keep_trace : bool
        Record the lower bound after every iteration in ``lower_bounds``.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    w = _as_matrix(dmc)
    nx, ny = w.shape
    r = np.full(nx, 1.0 / nx)
    trace = []
    lower = upper = 0.0
    for it in range(1, max_iter + 1):
        d = _divergences(w, r)
        finite = np.isfinite(d)
        lower = float(np.dot(r[finite], d[finite]))
        upper = float(d.max())
        if keep_trace:
            trace.append(lower)
        if upper - lower <= tol:
            break
        # log-domain multiplicative update r(x) <- r(x) exp(D_x) / Z
        dd = np.where(finite, d, d[finite].max() + 50.0)
        logits = np.log(np.where(r > 0, r, 1e-300)) + dd
        logits -= logits.max()
        r = np.exp(logits)
        r /= r.sum()
    else:
        raise ConvergenceError(
            f"capacity did not converge in {max_iter} iterations (gap {upper - lower:.3e})"
        )
    cap = min(max(lower, 0.0), math.log(min(nx, ny)))
    return CapacityResult(cap, Pmf(r / r.sum()), it, max(upper - lower, 0.0), tuple(trace))


def bsc(p):
    p = check_unit_interval(p, "crossover")
    return Dmc(CondPmf([[1 - p, p], [p, 1 - p]]))


def bec(e):
    """Binary erasure channel with outputs (0, erasure, 1)."""
    e = check_unit_interval(e, "erasure")
    return Dmc(CondPmf([[1 - e, e, 0.0], [0.0, e, 1 - e]]))


def closed_form_capacity(family, param):
    """Capacity of ``"bsc"`` or ``"bec"`` channels in nats."""
    param = check_unit_interval(param, f"{family} parameter")
    if family == "bsc":
        return math.log(2) - binary_entropy(param)
    if family == "bec":
        return (1 - param) * math.log(2)
    raise ValidationError(f"unknown channel family {family!r}")
