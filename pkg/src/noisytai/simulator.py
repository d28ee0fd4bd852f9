"""Finite-blocklength distributed testing against independence over a DMC.

Under H0 the pairs (U_i, V_i) are i.i.d. P_UV; under H1 they are i.i.d.
P_U x P_V. The observer maps U^n to a channel input X^n, the channel emits
Y^n, and the detector accepts H0 when (y^n, v^n) lies in its acceptance
region. Sequences are indexed positionally as in ``blowup``; an explicit
rule stores the acceptance region as a boolean matrix ``regions[v, y]``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import itertools
import logging
import math

import numpy as np
from scipy.special import gammaln

from ._validation import ValidationError, check_positive_int, check_size
from .blowup import expand_mask
from .capacity import Dmc
from .probcore import CondPmf, JointPmf, Pmf, compose, conditional_mutual_information, kl_divergence
from .rng import default_threads, sample_categorical, sample_rows, stream, stream_id

__all__ = [
    "SymbolwiseEncoder",
    "CodebookEncoder",
    "DecisionRule",
    "TestInstance",
    "ErrorEstimate",
    "ReliableSet",
    "TruncatedMeasure",
    "ConverseReport",
    "letter_joints",
    "likelihood_rule",
    "exact_errors",
    "monte_carlo_errors",
    "blow_up_rule",
    "reliable_set",
    "truncated_measure",
    "exponent_estimate",
    "converse_check",
]

log = logging.getLogger(__name__)

MAX_PAIR_SPACE = 2**26
MAX_TYPES = 5_000_000
CHUNK = 1 << 16
HOEFFDING_DELTA = 0.01


def _kron_power(m, n):
    out = np.ones((1,) * m.ndim)
    for _ in range(n):
        out = np.kron(m, out)
    return out


def _digits(size, q, n):
    idx = np.arange(size)
    return (idx[:, None] // q ** np.arange(n)) % q


def _positional(seqs, q):
    return seqs @ (q ** np.arange(seqs.shape[-1]))


# ---------------------------------------------------------------------------
# encoders


@dataclass(frozen=True)
class SymbolwiseEncoder:
    """Applies the same per-letter map P(x|u) to every coordinate."""

    mapping: CondPmf
    kind: str = field(default="symbolwise", init=False)

    def __post_init__(self):
        if not isinstance(self.mapping, CondPmf):
            object.__setattr__(self, "mapping", CondPmf(self.mapping))

    @property
    def is_deterministic(self):
        return self.mapping.is_deterministic

    @property
    def letter_map(self):
        if not self.is_deterministic:
            raise ValidationError("encoder is stochastic")
        return np.argmax(self.mapping.rows, axis=1)

    def encode(self, u, gen):
        if self.is_deterministic:
            return self.letter_map[u]
        return sample_rows(gen, np.cumsum(self.mapping.rows, axis=1), u)


@dataclass(frozen=True, eq=False)
class CodebookEncoder:
    """Quantise U^n to a random W-codebook, then send the index over a channel code.

    Both codebooks are drawn from ``seed``: W-codewords i.i.d. from the
    W-marginal of ``compose(source, aux)``, channel codewords i.i.d. from
    ``input_dist``. A source block maps to the codeword maximising
    ``sum_i ln P(u_i | w_i)`` (lowest index on ties).
    """

    source: JointPmf
    aux: CondPmf
    input_dist: Pmf
    n: int
    n_codewords: int
    seed: int = 0
    kind: str = field(default="codebook", init=False)

    def __post_init__(self):
        aux = self.aux.cond if hasattr(self.aux, "cond") else self.aux
        if not isinstance(aux, CondPmf):
            aux = CondPmf(aux)
        object.__setattr__(self, "aux", aux)
        check_positive_int(self.n, "n")
        check_positive_int(self.n_codewords, "n_codewords")
        joint = compose(self.source, aux)
        pw = joint.sum(axis=(0, 1))
        puw = joint.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_u_given_w = np.log(np.where(pw[None, :] > 0, puw / pw[None, :], 0.0)).T
        gen = stream(self.seed, stream_id(0xC0DE, 0))
        w_book = sample_categorical(gen, np.cumsum(pw), (self.n_codewords, self.n))
        x_probs = self.input_dist.probs if isinstance(self.input_dist, Pmf) else np.asarray(self.input_dist)
        x_book = sample_categorical(gen, np.cumsum(x_probs), (self.n_codewords, self.n))
        for name, val in (("w_codebook", w_book), ("x_codebook", x_book), ("_log_u_w", log_u_given_w)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def is_deterministic(self):
        return True

    def quantize(self, u):
        # score[t, m] = sum_i ln P(u_ti | w_mi)
        scores = np.zeros((u.shape[0], self.n_codewords))
        for i in range(self.n):
            scores += self._log_u_w[self.w_codebook[:, i][None, :], u[:, i][:, None]]
        return np.argmax(scores, axis=1)

    def encode(self, u, gen=None):
        return self.x_codebook[self.quantize(u)]


# ---------------------------------------------------------------------------
# decision rules


def _cell_counts(v, y, y_size, cells):
    cell = v * y_size + y
    return np.stack([(cell == c).sum(axis=-1) for c in range(cells)], axis=-1)


def _score(counts, llr_flat):
    # fixed summation order so equal count vectors always give equal floats
    score = np.zeros(counts.shape[:-1])
    dead = np.zeros(counts.shape[:-1], dtype=bool)
    for c, w in enumerate(llr_flat):
        if np.isfinite(w):
            score = score + counts[..., c] * w
        else:
            dead |= counts[..., c] > 0
    return np.where(dead, -np.inf, score)


@dataclass(frozen=True, eq=False)
class DecisionRule:
    """Acceptance region for H0, explicit or as a log-likelihood threshold.

    Explicit: ``regions[v_index, y_index]`` is True when (y^n, v^n) is
    accepted. Threshold: accept when ``sum_i llr[v_i, y_i] >= threshold``.
    """

    n: int
    v_size: int
    y_size: int
    regions: np.ndarray = None
    llr: np.ndarray = None
    threshold: float = None

    def __post_init__(self):
        if (self.regions is None) == (self.llr is None):
            raise ValidationError("a rule is either explicit (regions) or threshold (llr)")
        if self.regions is not None:
            reg = np.asarray(self.regions, dtype=bool).copy()
            if reg.shape != (self.v_size**self.n, self.y_size**self.n):
                raise ValidationError(f"regions have shape {reg.shape}")
            reg.setflags(write=False)
            object.__setattr__(self, "regions", reg)
        else:
            llr = np.array(self.llr, dtype=float)
            if llr.shape != (self.v_size, self.y_size):
                raise ValidationError(f"llr has shape {llr.shape}")
            llr.setflags(write=False)
            object.__setattr__(self, "llr", llr)
            object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def is_explicit(self):
        return self.regions is not None

    @classmethod
    def accept_all(cls, n, v_size, y_size):
        check_size(v_size**n * y_size**n, MAX_PAIR_SPACE, "explicit rule")
        return cls(n, v_size, y_size, regions=np.ones((v_size**n, y_size**n), dtype=bool))

    @classmethod
    def accept_none(cls, n, v_size, y_size):
        check_size(v_size**n * y_size**n, MAX_PAIR_SPACE, "explicit rule")
        return cls(n, v_size, y_size, regions=np.zeros((v_size**n, y_size**n), dtype=bool))

    @classmethod
    def from_regions(cls, regions, n, v_size, y_size):
        return cls(n, v_size, y_size, regions=regions)

    def scores(self, v, y):
        """Threshold-form scores for sequence arrays of shape (..., n)."""
        counts = _cell_counts(v, y, self.y_size, self.v_size * self.y_size)
        return _score(counts, self.llr.ravel())

    def accepts(self, v, y):
        """Whether each (y^n, v^n) row pair is accepted into H0's region."""
        if self.is_explicit:
            return self.regions[_positional(v, self.v_size), _positional(y, self.y_size)]
        return self.scores(v, y) >= self.threshold

    def materialize(self):
        if self.is_explicit:
            return self
        nv, ny = self.v_size**self.n, self.y_size**self.n
        check_size(nv * ny, MAX_PAIR_SPACE, "materialized rule")
        vd = _digits(nv, self.v_size, self.n)
        yd = _digits(ny, self.y_size, self.n)
        counts = np.zeros((nv, ny, self.v_size * self.y_size), dtype=np.int16)
        for i in range(self.n):
            cell = vd[:, i, None] * self.y_size + yd[None, :, i]
            for c in range(counts.shape[-1]):
                counts[..., c] += cell == c
        regions = _score(counts, self.llr.ravel()) >= self.threshold
        return DecisionRule(self.n, self.v_size, self.y_size, regions=regions)


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True, eq=False)
class TestInstance:
    source: JointPmf
    dmc: Dmc
    n: int
    encoder: object
    rule: DecisionRule

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not isinstance(self.source, JointPmf):
            object.__setattr__(self, "source", JointPmf(self.source))
        if not isinstance(self.dmc, Dmc):
            object.__setattr__(self, "dmc", Dmc(self.dmc))
        check_positive_int(self.n, "n")
        u_size, v_size = self.source.shape
        x_size, y_size = self.dmc.matrix.shape
        enc = self.encoder
        if isinstance(enc, SymbolwiseEncoder):
            if enc.mapping.shape != (u_size, x_size):
                raise ValidationError(f"encoder shape {enc.mapping.shape} != ({u_size}, {x_size})")
        elif isinstance(enc, CodebookEncoder):
            if enc.n != self.n or enc.aux.shape[0] != u_size or enc.input_dist.size != x_size:
                raise ValidationError("codebook encoder does not match the instance")
        else:
            raise ValidationError(f"unsupported encoder {enc!r}")
        r = self.rule
        if (r.n, r.v_size, r.y_size) != (self.n, v_size, y_size):
            raise ValidationError("decision rule does not match the instance dimensions")

    @property
    def alternate(self):
        """TAI alternate hypothesis: product of the source marginals."""
        return np.outer(self.source.probs.sum(axis=1), self.source.probs.sum(axis=0))

    def with_rule(self, rule):
        return TestInstance(self.source, self.dmc, self.n, self.encoder, rule)


def letter_joints(source, dmc, encoder):
    """Per-letter laws of (V, Y) under H0 and H1 for a symbolwise encoder."""
    puv = source.probs
    w = dmc.matrix if isinstance(dmc, Dmc) else np.asarray(dmc)
    ew = encoder.mapping.rows @ w
    p0 = puv.T @ ew
    p1 = np.outer(puv.sum(axis=0), puv.sum(axis=1) @ ew)
    return p0, p1


def _llr(p0, p1):
    with np.errstate(divide="ignore"):
        return np.where(p0 > 0, np.log(np.where(p0 > 0, p0, 1.0)) - np.log(np.where(p1 > 0, p1, 1.0)), -np.inf)


def _type_table(p0, p1, n):
    """Enumerate the joint types of n letters: counts, P0(type), P1(type)."""
    cells = p0.size
    n_types = math.comb(n + cells - 1, cells - 1)
    check_size(n_types, MAX_TYPES, "type enumeration")
    counts = np.empty((n_types, cells), dtype=np.int64)
    for row, bars in enumerate(itertools.combinations(range(n + cells - 1), cells - 1)):
        prev = -1
        for c, b in enumerate(bars):
            counts[row, c] = b - prev - 1
            prev = b
        counts[row, -1] = n + cells - 2 - prev
    log_coef = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)

    def probs(p):
        flat = p.ravel()
        with np.errstate(divide="ignore"):
            lp = np.log(flat)
        terms = np.where(counts > 0, counts * np.where(flat > 0, lp, 0.0), 0.0).sum(axis=1)
        dead = np.any((counts > 0) & (flat[None, :] <= 0), axis=1)
        return np.where(dead, 0.0, np.exp(log_coef + terms))

    return counts, probs(p0), probs(p1)


def _threshold_errors(p0, p1, llr, threshold, n):
    counts, q0, q1 = _type_table(p0, p1, n)
    acc = _score(counts, llr.ravel()) >= threshold
    return min(max(float(q0[~acc].sum()), 0.0), 1.0), min(max(float(q1[acc].sum()), 0.0), 1.0)


def likelihood_rule(source, dmc, encoder, n, target_alpha):
    """Log-likelihood-ratio threshold rule with the largest threshold meeting ``target_alpha``.

    The score of (y^n, v^n) is ``sum_i ln P0(v_i, y_i) / (P(v_i) P(y_i))``;
    ties at the threshold are accepted. Type-I error is computed exactly from
    the distribution of joint types, so the rule satisfies ``alpha <= target``.
    """
    if not 0 <= target_alpha <= 1:
        raise ValidationError(f"target_alpha must lie in [0, 1], got {target_alpha}")
    if not isinstance(encoder, SymbolwiseEncoder):
        raise ValidationError("likelihood rules need a symbolwise encoder")
    p0, p1 = letter_joints(source, dmc, encoder)
    llr = _llr(p0, p1)
    counts, q0, _ = _type_table(p0, p1, n)
    scores = _score(counts, llr.ravel())
    order = np.argsort(scores, kind="stable")
    s_sorted, q_sorted = scores[order], q0[order]
    uniq, first = np.unique(s_sorted, return_index=True)
    below = np.concatenate([[0.0], np.cumsum(q_sorted)])[first]  # P0(score < u)
    ok = np.flatnonzero(below <= target_alpha + 1e-15)
    threshold = float(uniq[ok[-1]])
    return DecisionRule(n, p0.shape[0], p0.shape[1], llr=llr, threshold=threshold)


# ---------------------------------------------------------------------------
# error probabilities


@dataclass(frozen=True)
class ErrorEstimate:
    alpha: float
    beta: float
    method: str
    n: int
    ci_halfwidth: float = 0.0
    trials: int = 0
    seed: int = None

    @property
    def beta_exponent(self):
        return -math.log(self.beta) / self.n if self.beta > 0 else math.inf


def exact_errors(inst):
    """Exact type-I and type-II errors for a symbolwise encoder."""
    if not isinstance(inst.encoder, SymbolwiseEncoder):
        raise ValidationError("exact errors need a symbolwise encoder; use monte_carlo_errors")
    p0, p1 = letter_joints(inst.source, inst.dmc, inst.encoder)
    rule = inst.rule
    if not rule.is_explicit:
        alpha, beta = _threshold_errors(p0, p1, rule.llr, rule.threshold, inst.n)
        return ErrorEstimate(alpha, beta, "exact", inst.n)
    check_size(p0.size**inst.n, MAX_PAIR_SPACE, "exact enumeration")
    big0, big1 = _kron_power(p0, inst.n), _kron_power(p1, inst.n)
    reg = rule.regions
    alpha = float(big0[~reg].sum())
    beta = float(big1[reg].sum())
    return ErrorEstimate(min(max(alpha, 0.0), 1.0), min(max(beta, 0.0), 1.0), "exact", inst.n)


def _mc_chunk(inst, hyp, chunk, size, seed, cdfs):
    gen = stream(seed, stream_id(1, hyp, chunk))
    n = inst.n
    v_size = inst.source.shape[1]
    if hyp == 0:
        flat = sample_categorical(gen, cdfs["joint"], (size, n))
        u, v = flat // v_size, flat % v_size
    else:
        u = sample_categorical(gen, cdfs["u"], (size, n))
        v = sample_categorical(gen, cdfs["v"], (size, n))
    x = inst.encoder.encode(u, gen)
    y = sample_rows(gen, cdfs["w"], x)
    return int(inst.rule.accepts(v, y).sum())


def monte_carlo_errors(inst, trials, seed=0, threads=None, chunk=CHUNK):
    """Monte-Carlo estimates of (alpha, beta) with a 99% Hoeffding half-width.

    Trials are split into fixed chunks, each with its own counter-based
    stream, so results do not depend on ``threads``.
    """
    trials = check_positive_int(trials, "trials")
    puv = inst.source.probs
    cdfs = {
        "joint": np.cumsum(puv.ravel()),
        "u": np.cumsum(puv.sum(axis=1)),
        "v": np.cumsum(puv.sum(axis=0)),
        "w": np.cumsum(inst.dmc.matrix, axis=1),
    }
    jobs = []
    for hyp in (0, 1):
        for c, start in enumerate(range(0, trials, chunk)):
            jobs.append((hyp, c, min(chunk, trials - start)))
    threads = default_threads() if threads is None else threads
    run = lambda job: _mc_chunk(inst, job[0], job[1], job[2], seed, cdfs)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            accepted = list(pool.map(run, jobs))
    else:
        accepted = [run(job) for job in jobs]
    acc0 = sum(a for (h, _, _), a in zip(jobs, accepted) if h == 0)
    acc1 = sum(a for (h, _, _), a in zip(jobs, accepted) if h == 1)
    half = math.sqrt(math.log(2 / HOEFFDING_DELTA) / (2 * trials))
    return ErrorEstimate((trials - acc0) / trials, acc1 / trials, "monte_carlo", inst.n,
                         half, trials, seed)


def blow_up_rule(rule, l):
    """Replace every per-v acceptance set by its Hamming l-neighbourhood."""
    if not rule.is_explicit:
        raise ValidationError("blow-up needs an explicit rule; call materialize() first")
    if l < 0:
        raise ValidationError(f"l must be non-negative, got {l}")
    if l == 0:
        return rule
    regions = expand_mask(rule.regions, rule.y_size, rule.n, rounds=min(l, rule.n))
    return DecisionRule(rule.n, rule.v_size, rule.y_size, regions=regions)


# ---------------------------------------------------------------------------
# change of measure


@dataclass(frozen=True, eq=False)
class ReliableSet:
    """(u^n, v^n) pairs whose channel acceptance probability is at least gamma.

    With a deterministic encoder x^n is a function of u^n, so the set lives on
    ``U^n x V^n``: ``mask[u_index, v_index]``.
    """

    mask: np.ndarray
    prob: float
    gamma: float
    epsilon: float = None
    lower_bound: float = None
    bound_holds: bool = None


def _deterministic_parts(inst):
    enc = inst.encoder
    if not isinstance(enc, SymbolwiseEncoder) or not enc.is_deterministic:
        raise ValidationError("the reliable set needs a deterministic symbolwise encoder")
    n = inst.n
    u_size, v_size = inst.source.shape
    x_size, y_size = inst.dmc.matrix.shape
    check_size(max(u_size, x_size) ** n * max(v_size, y_size) ** n, MAX_PAIR_SPACE, "reliable set")
    x_of_u = _positional(enc.letter_map[_digits(u_size**n, u_size, n)], x_size)
    w_n = _kron_power(inst.dmc.matrix, n)
    p_uv = _kron_power(inst.source.probs, n)
    return x_of_u, w_n, p_uv


def reliable_set(inst, gamma, epsilon=None):
    """Pairs with ``P(Y^n in A(v^n) | x^n(u^n)) >= gamma`` and their H0 mass.

    When ``epsilon`` is given and the rule meets ``alpha <= epsilon``, the mass
    is compared against ``(1 - epsilon - gamma) / (1 - gamma)``, which equals
    ``(1 - epsilon) / (1 + epsilon)`` at ``gamma = (1 - epsilon) / 2``.
    """
    x_of_u, w_n, p_uv = _deterministic_parts(inst)
    regions = inst.rule.materialize().regions
    accept = w_n @ regions.T.astype(float)  # [x, v]
    mask = accept[x_of_u] >= gamma
    prob = float(p_uv[mask].sum())
    lower, holds = None, None
    if epsilon is not None and gamma < 1:
        lower = (1 - epsilon - gamma) / (1 - gamma)
        alpha = exact_errors(inst).alpha
        if alpha <= epsilon:
            holds = prob >= lower - 1e-12
            if not holds:
                log.warning("reliable set mass %.6g below %.6g (alpha %.4g, eps %.4g)",
                            prob, lower, alpha, epsilon)
    return ReliableSet(mask, prob, float(gamma), epsilon, lower, holds)


@dataclass(frozen=True, eq=False)
class TruncatedMeasure:
    p_uv: np.ndarray
    prob_b: float
    kl: float
    max_ratio_v: float
    max_ratio_y: float
    markov_cmi: float
    checks: tuple

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)


def truncated_measure(inst, reliable, epsilon, tol=1e-9):
    """Condition the H0 law on the reliable set and check the domination bounds.

    Checks, each recorded as ``(name, passed, detail)``:
    marginal of V^n and of Y^n dominated by ``(1+eps)/(1-eps)`` times the
    original, ``D(P~ || P) = ln(1/P(B))`` and not above ``ln((1+eps)/(1-eps))``,
    and ``I(V~; Y~ | U~) = 0``.
    """
    if not reliable.prob > 0:
        raise ValidationError("the reliable set has zero probability")
    x_of_u, w_n, p_uv = _deterministic_parts(inst)
    factor = (1 + epsilon) / (1 - epsilon)
    p_t = np.where(reliable.mask, p_uv, 0.0) / reliable.prob

    pv, pv_t = p_uv.sum(axis=0), p_t.sum(axis=0)
    py = p_uv.sum(axis=1) @ w_n[x_of_u]
    py_t = p_t.sum(axis=1) @ w_n[x_of_u]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_v = np.where(pv > 0, pv_t / pv, np.where(pv_t > 0, np.inf, 0.0))
        ratio_y = np.where(py > 0, py_t / py, np.where(py_t > 0, np.inf, 0.0))
    kl = kl_divergence(p_t, p_uv)
    kl_identity = math.log(1.0 / reliable.prob)

    cmi = None
    size = p_uv.size * w_n.shape[1]
    if size <= 2**24:
        triple = p_t[:, :, None] * w_n[x_of_u][:, None, :]  # (u, v, y)
        cmi = conditional_mutual_information(triple, given=0)

    checks = [
        ("v_marginal_domination", bool(np.all(pv_t <= factor * pv + tol)),
         f"max ratio {ratio_v.max():.6f} <= {factor:.6f}"),
        ("y_marginal_domination", bool(np.all(py_t <= factor * py + tol)),
         f"max ratio {ratio_y.max():.6f} <= {factor:.6f}"),
        ("kl_equals_log_inverse_mass", abs(kl - kl_identity) <= tol,
         f"{kl:.12f} vs {kl_identity:.12f}"),
        ("kl_below_log_factor", kl <= math.log(factor) + tol,
         f"{kl:.6f} <= {math.log(factor):.6f}"),
    ]
    if cmi is not None:
        checks.append(("markov_v_u_y", cmi <= tol, f"I(V;Y|U) = {cmi:.3e}"))
    return TruncatedMeasure(p_t, reliable.prob, kl, float(ratio_v.max()), float(ratio_y.max()),
                            cmi, tuple(checks))


# ---------------------------------------------------------------------------
# exponents


def exponent_estimate(estimates):
    """Least-squares slope of ``-ln beta_n`` against ``n``.

    ``estimates`` holds ``ErrorEstimate`` objects or ``(n, beta)`` pairs over
    at least three blocklengths.

    Returns
    -------
    slope : float
    per_n : list of (n, -ln(beta_n) / n)
    """
    pairs = [(e.n, e.beta) if isinstance(e, ErrorEstimate) else (int(e[0]), float(e[1]))
             for e in estimates]
    if len({n for n, _ in pairs}) < 3:
        raise ValidationError("need at least three distinct blocklengths")
    if any(b <= 0 for _, b in pairs):
        raise ValidationError("beta_n = 0 at some n; the exponent is undefined there")
    ns = np.array([n for n, _ in pairs], dtype=float)
    y = -np.log([b for _, b in pairs])
    slope = float(np.polyfit(ns, y, 1)[0])
    return slope, [(int(n), float(v / n)) for n, v in zip(ns, y)]


@dataclass(frozen=True)
class ConverseReport:
    passed: bool
    margin: float
    estimate: float
    theta: float
    slack: float


def converse_check(estimate, theta, slack):
    if slack < 0:
        raise ValidationError(f"slack must be non-negative, got {slack}")
    margin = theta + slack - estimate
    return ConverseReport(margin >= 0, margin, estimate, theta, slack)
