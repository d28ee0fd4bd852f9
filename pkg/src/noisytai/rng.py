"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, stream_id)``, so each
draw is a pure function of the seed, the stream id and the position in the
stream. Work split into chunks with distinct stream ids therefore gives the
same numbers whether the chunks run serially or in parallel.
"""

import os

import numpy as np

MASK64 = (1 << 64) - 1
THREADS_ENV = "NOISYTAI_THREADS"


def stream(seed, stream_id=0):
    key = np.array([int(seed) & MASK64, int(stream_id) & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def stream_id(*parts):
    """Pack small non-negative integers into one 64-bit stream id (16 bits each)."""
    sid = 0
    for part in parts:
        if not 0 <= part < (1 << 16):
            raise ValueError(f"stream id component {part} out of range")
        sid = (sid << 16) | int(part)
    return sid


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def sample_categorical(gen, cdf, size):
    """Draw indices from the distribution with cumulative sums ``cdf``."""
    u = gen.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)


def sample_rows(gen, cdfs, inputs):
    """For each entry of ``inputs`` draw an output from row ``cdfs[input]``."""
    u = gen.random(inputs.shape)
    rows = cdfs[inputs]
    idx = (rows <= u[..., None]).sum(axis=-1)
    return np.minimum(idx, cdfs.shape[1] - 1)
