"""Counter-based random streams.

Every random draw in the package comes from a Philox 4x64 bit generator keyed
by (seed, purpose tag, subkey) with the stream offset in the high counter
word.  A value is therefore a pure function of its key material, independent
of scheduling, worker count, or how many values were drawn elsewhere.

Reference specification (tests recompute draws from it):

    key     = [uint64(seed), uint64(tag) << 48 | uint64(subkey)]
    counter = [0, 0, 0, uint64(block)]

and draws are read from ``numpy.random.Generator(Philox(...))`` in C order.
The noise block for step ``s`` of an ensemble is
``standard_normal((n_streams, d))`` with tag NOISE, subkey = ensemble id,
block = s; row ``i`` belongs to the particle whose stream id is ``i``.
Philox advances only low counter words during generation, so blocks keyed by
distinct (tag, subkey, block) never overlap.
"""

from __future__ import annotations

import numpy as np

TAG_INIT = 1  # initial-condition draws (disjoint from noise: independence of z0 from W)
TAG_NOISE = 2  # per-step Wiener increments
TAG_VALIDATE = 3  # hypothesis-validator sample points
TAG_PROJECTION = 4  # sliced-Wasserstein projection directions
TAG_SUBSAMPLE = 5  # mean-field measure subsampling
TAG_PROBE = 6  # Lipschitz probes and preservation scans

_SUBKEY_BITS = 48


def stream(seed: int, tag: int, subkey: int = 0, block: int = 0) -> np.random.Generator:
    """Generator for the (seed, tag, subkey, block) stream."""
    if not 0 <= subkey < (1 << _SUBKEY_BITS):
        raise ValueError(f"subkey out of range: {subkey}")
    key = np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64((tag << _SUBKEY_BITS) | subkey)],
        dtype=np.uint64,
    )
    counter = np.array([0, 0, 0, block & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def noise_block(seed: int, step: int, n_streams: int, d: int, ensemble_id: int = 0) -> np.ndarray:
    """Standard-normal increments for one step, shape (n_streams, d), row = stream id."""
    return stream(seed, TAG_NOISE, subkey=ensemble_id, block=step).standard_normal((n_streams, d))
