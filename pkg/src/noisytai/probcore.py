"""Finite-alphabet distributions and information measures.

All quantities are in nats. Zero-probability symbols stay in their
alphabets; ``0 ln 0`` is taken as 0 and a divergence with a support
violation is ``math.inf``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import xlogy

from ._validation import (
    ValidationError,
    check_probability_array,
    check_same_shape,
    check_stochastic_matrix,
)

__all__ = [
    "Alphabet",
    "Pmf",
    "JointPmf",
    "CondPmf",
    "entropy",
    "mutual_information",
    "kl_divergence",
    "conditional_mutual_information",
    "total_variation",
    "compose",
    "marginals",
    "condition",
    "product",
    "binary_entropy",
    "binary_entropy_inverse",
    "binary_convolution",
]


@dataclass(frozen=True)
class Alphabet:
    size: int
    labels: tuple = None

    def __post_init__(self):
        if isinstance(self.size, bool) or int(self.size) != self.size or self.size < 1:
            raise ValidationError(f"alphabet size must be a positive integer, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.size:
                raise ValidationError("alphabet labels must match its size")
            if len(set(labels)) != len(labels):
                raise ValidationError("alphabet labels must be unique")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def of(cls, size_or_labels):
        if isinstance(size_or_labels, Alphabet):
            return size_or_labels
        if isinstance(size_or_labels, (int, np.integer)):
            return cls(int(size_or_labels))
        labels = list(size_or_labels)
        return cls(len(labels), tuple(labels))

    def label(self, i):
        return self.labels[i] if self.labels is not None else str(i)


@dataclass(frozen=True)
class Pmf:
    probs: np.ndarray
    alphabet: Alphabet = None

    def __post_init__(self):
        probs = check_probability_array(self.probs, ndim=1, name="pmf")
        object.__setattr__(self, "probs", probs)
        alphabet = Alphabet(probs.size) if self.alphabet is None else Alphabet.of(self.alphabet)
        if alphabet.size != probs.size:
            raise ValidationError("pmf length does not match its alphabet")
        object.__setattr__(self, "alphabet", alphabet)

    @classmethod
    def from_weights(cls, weights, alphabet=None):
        """Build a pmf by explicitly normalising non-negative weights."""
        return cls(check_probability_array(weights, ndim=1, renormalize=True), alphabet)

    @property
    def size(self):
        return self.probs.size

    def __len__(self):
        return self.probs.size


@dataclass(frozen=True)
class JointPmf:
    """Joint distribution of a row variable and a column variable."""

    probs: np.ndarray
    row_alphabet: Alphabet = None
    col_alphabet: Alphabet = None

    def __post_init__(self):
        probs = check_probability_array(self.probs, ndim=2, name="joint")
        object.__setattr__(self, "probs", probs)
        rows = Alphabet(probs.shape[0]) if self.row_alphabet is None else Alphabet.of(self.row_alphabet)
        cols = Alphabet(probs.shape[1]) if self.col_alphabet is None else Alphabet.of(self.col_alphabet)
        if (rows.size, cols.size) != probs.shape:
            raise ValidationError("joint shape does not match its alphabets")
        object.__setattr__(self, "row_alphabet", rows)
        object.__setattr__(self, "col_alphabet", cols)

    @classmethod
    def from_weights(cls, weights, row_alphabet=None, col_alphabet=None):
        return cls(check_probability_array(weights, ndim=2, renormalize=True),
                   row_alphabet, col_alphabet)

    @property
    def shape(self):
        return self.probs.shape

    @property
    def row_marginal(self):
        return Pmf(_clean_sum(self.probs, axis=1), self.row_alphabet)

    @property
    def col_marginal(self):
        return Pmf(_clean_sum(self.probs, axis=0), self.col_alphabet)

    def transpose(self):
        return JointPmf(self.probs.T.copy(), self.col_alphabet, self.row_alphabet)

    def conditional(self):
        """Row-conditional law P(col | row); rows of zero mass become uniform."""
        pu = self.probs.sum(axis=1)
        rows = np.full(self.shape, 1.0 / self.shape[1])
        nz = pu > 0
        rows[nz] = self.probs[nz] / pu[nz, None]
        return CondPmf(rows, self.row_alphabet, self.col_alphabet)


@dataclass(frozen=True)
class CondPmf:
    """Stochastic matrix ``rows[i, j] = P(output j | input i)``."""

    rows: np.ndarray
    input_alphabet: Alphabet = None
    output_alphabet: Alphabet = None

    def __post_init__(self):
        rows = check_stochastic_matrix(self.rows)
        object.__setattr__(self, "rows", rows)
        ins = Alphabet(rows.shape[0]) if self.input_alphabet is None else Alphabet.of(self.input_alphabet)
        outs = Alphabet(rows.shape[1]) if self.output_alphabet is None else Alphabet.of(self.output_alphabet)
        if (ins.size, outs.size) != rows.shape:
            raise ValidationError("conditional pmf shape does not match its alphabets")
        object.__setattr__(self, "input_alphabet", ins)
        object.__setattr__(self, "output_alphabet", outs)

    @classmethod
    def identity(cls, size):
        return cls(np.eye(size))

    @classmethod
    def constant(cls, in_size, out_size, symbol=0):
        rows = np.zeros((in_size, out_size))
        rows[:, symbol] = 1.0
        return cls(rows)

    @property
    def shape(self):
        return self.rows.shape

    @property
    def is_deterministic(self):
        return bool(np.all((self.rows == 0) | (self.rows == 1)))

    def push(self, p):
        """Output law when the input is distributed as ``p``."""
        return Pmf(_as_array(p) @ self.rows, self.output_alphabet)

    def joint(self, p):
        return JointPmf(_as_array(p)[:, None] * self.rows, self.input_alphabet, self.output_alphabet)


def _as_array(obj):
    if isinstance(obj, Pmf) or isinstance(obj, JointPmf):
        return obj.probs
    if isinstance(obj, CondPmf):
        return obj.rows
    return np.asarray(obj, dtype=float)


def _clean_sum(arr, axis):
    # marginals of a valid joint can drift by an ulp; snap the total back to 1
    out = arr.sum(axis=axis)
    return out / out.sum()


def _entropy_array(p, axis=None):
    return -xlogy(p, p).sum(axis=axis)


def _mi_array(pab):
    pa = np.broadcast_to(pab.sum(axis=1, keepdims=True), pab.shape)
    pb = np.broadcast_to(pab.sum(axis=0, keepdims=True), pab.shape)
    mask = pab > 0
    # separate logs: the product pa * pb can underflow for tiny masses
    val = float(np.sum(pab[mask] * (np.log(pab[mask]) - np.log(pa[mask]) - np.log(pb[mask]))))
    return max(val, 0.0)


def entropy(p):
    """Shannon entropy of a pmf (or any array of probabilities) in nats."""
    arr = _as_array(p).ravel()
    return max(float(_entropy_array(arr)), 0.0)


def mutual_information(j):
    """I(row; col) for a 2-D joint distribution."""
    arr = _as_array(j)
    if arr.ndim != 2:
        raise ValidationError("mutual_information expects a 2-D joint")
    return _mi_array(arr)


def kl_divergence(p, q):
    """D(p || q) in nats; ``math.inf`` when p is not absolutely continuous wrt q."""
    pa, qa = _as_array(p), _as_array(q)
    check_same_shape(pa, qa)
    mask = pa > 0
    if np.any(qa[mask] <= 0):
        return math.inf
    val = float(np.sum(pa[mask] * (np.log(pa[mask]) - np.log(qa[mask]))))
    return max(val, 0.0)


def conditional_mutual_information(triple, given=2):
    """I(A; B | C) for a 3-way joint array, conditioning on axis ``given``.

    The two remaining axes keep their order, so with the default the array is
    read as P(a, b, c) and the result is I(A; B | C).
    """
    arr = _as_array(triple)
    if arr.ndim != 3:
        raise ValidationError("conditional_mutual_information expects a 3-way joint")
    arr = np.moveaxis(arr, given, 2)
    pc = arr.sum(axis=(0, 1))
    pac = arr.sum(axis=1)
    pbc = arr.sum(axis=0)
    # I(A;B|C) = sum p(a,b,c) ln[p(a,b,c) p(c) / (p(a,c) p(b,c))]
    mask = arr > 0
    a_idx, b_idx, c_idx = np.nonzero(mask)
    logs = (np.log(arr[mask]) + np.log(pc[c_idx])
            - np.log(pac[a_idx, c_idx]) - np.log(pbc[b_idx, c_idx]))
    val = float(np.sum(arr[mask] * logs))
    return max(val, 0.0)


def total_variation(p, q):
    pa, qa = _as_array(p), _as_array(q)
    check_same_shape(pa, qa)
    return min(0.5 * float(np.abs(pa - qa).sum()), 1.0)


def compose(source, aux):
    """Joint of (U, V, W) with W drawn from ``aux`` given U: P(u,v) P(w|u)."""
    src = source if isinstance(source, JointPmf) else JointPmf(source)
    cond = aux if isinstance(aux, CondPmf) else CondPmf(aux)
    if cond.input_alphabet.size != src.row_alphabet.size:
        raise ValidationError(
            f"aux channel input size {cond.input_alphabet.size} does not match "
            f"source row alphabet size {src.row_alphabet.size}"
        )
    if (src.row_alphabet.labels is not None and cond.input_alphabet.labels is not None
            and src.row_alphabet.labels != cond.input_alphabet.labels):
        raise ValidationError("aux channel input labels do not match the source row alphabet")
    return src.probs[:, :, None] * cond.rows[:, None, :]


def marginals(j):
    """Row and column marginals of a joint distribution."""
    jp = j if isinstance(j, JointPmf) else JointPmf(j)
    return jp.row_marginal, jp.col_marginal


def condition(j, row):
    """Bayes slice P(col | row = ``row``)."""
    jp = j if isinstance(j, JointPmf) else JointPmf(j)
    slab = jp.probs[row]
    mass = slab.sum()
    if mass <= 0:
        raise ValidationError(f"cannot condition on zero-probability symbol {row}")
    return Pmf(slab / mass, jp.col_alphabet)


def product(p, q):
    pp = p if isinstance(p, Pmf) else Pmf(p)
    qq = q if isinstance(q, Pmf) else Pmf(q)
    return JointPmf(np.outer(pp.probs, qq.probs), pp.alphabet, qq.alphabet)


def binary_entropy(p):
    p = np.asarray(p, dtype=float)
    out = -xlogy(p, p) - xlogy(1 - p, 1 - p)
    return float(out) if out.ndim == 0 else out


def binary_entropy_inverse(h, tol=1e-15):
    """Inverse of the binary entropy (nats) on [0, 1/2], by bisection."""
    if h < -tol or h > math.log(2) + tol:
        raise ValidationError(f"binary entropy value {h} outside [0, ln 2]")
    h = min(max(h, 0.0), math.log(2))
    lo, hi = 0.0, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def binary_convolution(a, b):
    return a * (1 - b) + b * (1 - a)
