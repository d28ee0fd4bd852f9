"""Input checking helpers shared by the public modules.

These play the same role as ``sklearn.utils.validation``: coerce to float
arrays, verify shapes and stochasticity, and raise one of the package
exceptions on failure.
"""

import numbers

import numpy as np

SUM_TOL = 1e-9


class ValidationError(ValueError):
    """Malformed input: bad shape, negative mass, rows not summing to one."""


class SizeLimitError(RuntimeError):
    """A computation was refused because it would exceed a size cap."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""


def check_probability_array(probs, ndim=None, name="probs", renormalize=False):
    arr = np.array(probs, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{name} has negative entries")
    total = arr.sum()
    if renormalize:
        if total <= 0:
            raise ValidationError(f"{name} has zero total mass")
        arr = arr / total
    elif abs(total - 1.0) > SUM_TOL:
        raise ValidationError(f"{name} sums to {total!r}, not 1")
    arr.setflags(write=False)
    return arr


def check_stochastic_matrix(rows, name="rows", renormalize=False):
    arr = np.array(rows, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{name} has negative entries")
    sums = arr.sum(axis=1)
    if renormalize:
        if np.any(sums <= 0):
            raise ValidationError(f"{name} has an all-zero row")
        arr = arr / sums[:, None]
    else:
        bad = np.flatnonzero(np.abs(sums - 1.0) > SUM_TOL)
        if bad.size:
            raise ValidationError(f"{name} row {bad[0]} sums to {sums[bad[0]]!r}, not 1")
    arr.setflags(write=False)
    return arr


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_unit_interval(value, name, closed=True):
    value = float(value)
    ok = 0.0 <= value <= 1.0 if closed else 0.0 < value < 1.0
    if not ok:
        bounds = "[0, 1]" if closed else "(0, 1)"
        raise ValidationError(f"{name} must lie in {bounds}, got {value}")
    return value


def check_same_shape(p, q):
    if p.shape != q.shape:
        raise ValidationError(f"shape mismatch: {p.shape} vs {q.shape}")


def check_size(total, cap, what):
    if total > cap:
        raise SizeLimitError(f"{what}: {total} exceeds the cap of {cap}")
