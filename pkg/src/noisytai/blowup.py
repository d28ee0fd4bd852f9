"""Hamming neighbourhoods of sequence sets and the blowing-up bound.

Sequences of length ``n`` over an alphabet of size ``q`` are indexed by the
base-``q`` positional code ``sum_i z_i q**i``. A set is a dense boolean mask
over all ``q**n`` indices; reshaped to ``(q,) * n`` the axis for position
``i`` is ``n - 1 - i``, which makes a distance-1 expansion one ``any`` per
axis.
"""

from dataclasses import dataclass
import math

import numpy as np

from ._validation import SizeLimitError, ValidationError, check_positive_int
from .probcore import Alphabet, Pmf

__all__ = [
    "SequenceSpace",
    "SequenceSet",
    "BlowupParams",
    "hamming_neighborhood",
    "expand_mask",
    "lemma_threshold",
    "blowing_up_bound",
    "compute_l_n",
    "penalty_factor_log",
    "verify_blowup_exact",
    "product_measure",
    "hamming_distance_matrix",
]

MAX_SPACE = 2**28


@dataclass(frozen=True)
class SequenceSpace:
    alphabet: Alphabet
    n: int

    def __post_init__(self):
        object.__setattr__(self, "alphabet", Alphabet.of(self.alphabet))
        check_positive_int(self.n, "n")
        if self.total > MAX_SPACE:
            raise SizeLimitError(f"sequence space of size {self.total} exceeds {MAX_SPACE}")

    @property
    def q(self):
        return self.alphabet.size

    @property
    def total(self):
        return self.alphabet.size ** self.n

    def index(self, seq):
        seq = np.asarray(seq)
        weights = self.q ** np.arange(self.n)
        return seq @ weights

    def sequences(self):
        """All sequences as a ``(total, n)`` array, row ``j`` having index ``j``."""
        idx = np.arange(self.total)
        return (idx[:, None] // self.q ** np.arange(self.n)) % self.q


@dataclass(frozen=True, eq=False)
class SequenceSet:
    space: SequenceSpace
    members: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.members, dtype=bool).copy()
        if mask.shape != (self.space.total,):
            raise ValidationError(
                f"member mask has shape {mask.shape}, expected ({self.space.total},)"
            )
        mask.setflags(write=False)
        object.__setattr__(self, "members", mask)

    @classmethod
    def from_sequences(cls, space, seqs):
        mask = np.zeros(space.total, dtype=bool)
        seqs = np.atleast_2d(np.asarray(seqs, dtype=int))
        if seqs.size:
            mask[space.index(seqs)] = True
        return cls(space, mask)

    @classmethod
    def full(cls, space):
        return cls(space, np.ones(space.total, dtype=bool))

    @classmethod
    def empty(cls, space):
        return cls(space, np.zeros(space.total, dtype=bool))

    def __len__(self):
        return int(self.members.sum())

    def __contains__(self, seq):
        return bool(self.members[self.space.index(seq)])

    def __eq__(self, other):
        return (isinstance(other, SequenceSet) and self.space == other.space
                and np.array_equal(self.members, other.members))

    def __le__(self, other):
        return bool(np.all(~self.members | other.members))

    def probability(self, pmf):
        return float(product_measure(pmf, self.space.n) @ self.members)


@dataclass(frozen=True)
class BlowupParams:
    n: int
    epsilon: float
    b_of_n: float
    l_n: int
    eps_prime: float


def expand_mask(mask, q, n, rounds=1):
    """Distance-``rounds`` expansion of boolean masks over ``q**n`` sequences.

    ``mask`` may carry leading batch dimensions; the last axis indexes
    sequences.
    """
    batch = mask.shape[:-1]
    cur = np.asarray(mask, dtype=bool).reshape(batch + (q,) * n)
    offset = len(batch)
    for _ in range(rounds):
        nxt = cur.copy()
        for ax in range(offset, offset + n):
            nxt |= cur.any(axis=ax, keepdims=True)
        if np.array_equal(nxt, cur):
            break
        cur = nxt
    return cur.reshape(mask.shape)


def hamming_neighborhood(s, l):
    """All sequences within Hamming distance ``l`` of some member of ``s``."""
    if l < 0:
        raise ValidationError(f"l must be non-negative, got {l}")
    if l == 0:
        return s
    sp = s.space
    return SequenceSet(sp, expand_mask(s.members, sp.q, sp.n, rounds=min(l, sp.n)))


def hamming_distance_matrix(space):
    seqs = space.sequences()
    return (seqs[:, None, :] != seqs[None, :, :]).sum(axis=2)


def product_measure(pmf, n):
    """Probabilities of all ``q**n`` sequences under the i.i.d. law ``pmf``."""
    p = pmf.probs if isinstance(pmf, Pmf) else np.asarray(pmf, dtype=float)
    out = np.ones(1)
    # the first kron factor is the most significant digit, i.e. position n-1
    for _ in range(n):
        out = np.kron(p, out)
    return out


def lemma_threshold(prob_d, n):
    return math.sqrt(0.5 * n * math.log(1.0 / prob_d))


def blowing_up_bound(prob_d, n, l):
    """Lower bound on P(Gamma^l(D)) for a product measure given P(D).

    Returns 0 when ``l`` does not exceed ``sqrt((n/2) ln(1/P(D)))``, where the
    bound is vacuous.
    """
    if not prob_d > 0:
        raise ValidationError(f"P(D) must be positive, got {prob_d}")
    prob_d = min(prob_d, 1.0)
    gap = l - lemma_threshold(prob_d, n)
    if gap <= 0:
        return 0.0
    return min(max(-math.expm1(-2.0 * gap * gap / n), 0.0), 1.0)


def compute_l_n(n, epsilon, b_of_n=None):
    """Blow-up radius and the resulting type-I guarantee ``1 - exp(-b(n))``.

    ``b_of_n`` defaults to ``ln n``.
    """
    n = check_positive_int(n, "n")
    if not 0 < epsilon < 1:
        raise ValidationError(f"epsilon must lie in (0, 1), got {epsilon}")
    b = math.log(n) if b_of_n is None else float(b_of_n)
    if b < 0:
        raise ValidationError(f"b(n) must be non-negative, got {b}")
    radius = (math.sqrt(n * b) + math.sqrt(n * math.log((1 + epsilon) / (1 - epsilon)))) / math.sqrt(2)
    return BlowupParams(n, float(epsilon), b, int(math.ceil(radius)), -math.expm1(-b))


def penalty_factor_log(n, l_n, y_size, p_floor):
    """``l_n * ln(|Y| n e / (p_floor l_n))``, the log of the type-II slack."""
    if l_n == 0:
        return 0.0
    if l_n < 0:
        raise ValidationError(f"l_n must be non-negative, got {l_n}")
    if not 0 < p_floor <= 1:
        raise ValidationError(f"p_floor must lie in (0, 1], got {p_floor}")
    return l_n * (math.log(y_size * n) + 1.0 - math.log(p_floor * l_n))


def verify_blowup_exact(product_pmf, n, s, l):
    """Exact P(Gamma^l(s)) under the i.i.d. law and the lemma's bound.

    Returns
    -------
    exact : float
    bound : float
        0 when vacuous.
    vacuous : bool
    """
    pmf = product_pmf if isinstance(product_pmf, Pmf) else Pmf(product_pmf)
    if s.space.n != n or s.space.q != pmf.size:
        raise ValidationError("set and measure disagree on the sequence space")
    weights = product_measure(pmf, n)
    p_d = float(weights @ s.members)
    exact = float(weights @ hamming_neighborhood(s, l).members)
    if p_d <= 0:
        return exact, 0.0, True
    vacuous = l <= lemma_threshold(min(p_d, 1.0), n)
    return exact, blowing_up_bound(p_d, n, l), vacuous
