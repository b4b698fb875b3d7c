"""Mean-field evaluation against an empirical measure.

B0[t, z, mu] = (1/N) sum_j b0(t, z, zeta_j) and likewise for B1 and Sigma:
the kernel is averaged over the atoms of the measure with uniform weights.
An atom is included in its own measure (the measure is the law of the whole
ensemble).  Averages run over the full atom axis in a single numpy reduction
(fixed pairwise summation tree), so results do not depend on worker count and
permuting atoms moves outputs only at floating-point roundoff.

The pairwise evaluator is O(N * M) in kernel evaluations but inspects the
broadcast shape the kernel returns: a size-1 measure axis means the kernel
never read zeta and the average is the value itself; a size-1 query axis
means one evaluation serves every query point.  Both collapses are exact
algebra, not estimators.  The opt-in seeded M-subsample (tagged in reports)
is the only approximate mode.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ConfigError, DomainError, ShapeError

# Fixed chunk target so chunk boundaries never depend on the worker count.
_CHUNK_TARGET_ELEMENTS = 8_000_000


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniformly weighted atoms in R^{2d}."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise DomainError("empirical measure needs a nonempty (N, 2d) atom array")
        if not np.all(np.isfinite(atoms)):
            raise DomainError("empirical measure atoms must be finite")
        object.__setattr__(self, "atoms", atoms)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]


def _atoms_of(measure) -> np.ndarray:
    if isinstance(measure, EmpiricalMeasure):
        return measure.atoms
    atoms = np.asarray(measure, dtype=float)
    if atoms.ndim != 2 or atoms.shape[0] < 1:
        raise DomainError("measure must be a nonempty (N, 2d) atom array")
    return atoms


def _normalize(res: np.ndarray, rows: int, m: int, tail: tuple) -> np.ndarray:
    """Pad implicit leading axes so the result is (rows|1, m|1) + tail."""
    want = 2 + len(tail)
    if res.ndim > want:
        raise ShapeError(f"kernel returned rank-{res.ndim} array, expected at most {want}")
    res = res.reshape((1,) * (want - res.ndim) + res.shape)
    if res.shape[0] not in (1, rows) or res.shape[1] not in (1, m) or res.shape[2:] != tail:
        raise ShapeError(
            f"kernel output shape {res.shape} incompatible with ({rows}, {m}) + {tail}"
        )
    return res


def _mean_over_atoms(kernel, t, queries: np.ndarray, atoms: np.ndarray, tail: tuple,
                     workers: int = 1) -> np.ndarray:
    """Average kernel(t, q_i, atom_j) over j for every query row i."""
    n, m = queries.shape[0], atoms.shape[0]
    zeta = atoms[None, :, :]
    out = np.empty((n,) + tail)
    chunk = max(1, _CHUNK_TARGET_ELEMENTS // max(1, m * int(np.prod(tail))))

    def reduce_chunk(lo: int, hi: int):
        res = np.asarray(kernel(t, queries[lo:hi, None, :], zeta), dtype=float)
        res = _normalize(res, hi - lo, m, tail)
        red = res.mean(axis=1) if res.shape[1] == m else res[:, 0]
        return red  # (hi-lo,) + tail, or (1,) + tail when the kernel ignores queries

    # Query-independence needs a >= 2 row probe to be distinguishable.
    head = min(max(chunk, 2), n)
    first = reduce_chunk(0, head)
    if first.shape[0] == 1 and head > 1:
        out[:] = first[0]
        return out
    out[:head] = first
    starts = list(range(head, n, chunk))
    if workers > 1 and len(starts) > 1:
        def job(lo):
            out[lo: min(lo + chunk, n)] = reduce_chunk(lo, min(lo + chunk, n))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, starts))
    else:
        for lo in starts:
            out[lo: min(lo + chunk, n)] = reduce_chunk(lo, min(lo + chunk, n))
    return out


def _mf_point(kernel, d: int, tail: tuple, t, z, measure) -> np.ndarray:
    atoms = _atoms_of(measure)
    z = np.asarray(z, dtype=float)
    if z.shape != (2 * d,):
        raise ShapeError(f"state must have shape ({2 * d},), got {z.shape}")
    if atoms.shape[1] != 2 * d:
        raise ShapeError(f"measure atoms must have {2 * d} components, got {atoms.shape[1]}")
    if not (np.all(np.isfinite(z)) and np.isfinite(t)) or t < 0:
        raise DomainError("mean-field evaluation needs finite state and t >= 0")
    return _mean_over_atoms(kernel, float(t), z[None, :], atoms, tail)[0]


def mf_drift0(cs, t, z, measure) -> np.ndarray:
    """Averaged position drift B0[t, z, mu-hat], shape (d,)."""
    return _mf_point(cs.b0, cs.d, (cs.d,), t, z, measure)


def mf_drift1(cs, t, z, measure) -> np.ndarray:
    """Averaged velocity drift B1[t, z, mu-hat], shape (d,)."""
    return _mf_point(cs.b1, cs.d, (cs.d,), t, z, measure)


def mf_sigma(cs, t, z, measure) -> np.ndarray:
    """Averaged diffusion Sigma[t, z, mu-hat], shape (d, d), symmetric and elliptic."""
    return _mf_point(cs.sigma, cs.d, (cs.d, cs.d), t, z, measure)


def mf_batch(cs, t, atoms, measure=None, subsample=None, seed: int = 0, step: int = 0,
             workers: int = 1):
    """Per-particle (B0, B1, Sigma) against the ensemble's own empirical law.

    measure defaults to the atoms themselves (self-interaction included).  A
    positive ``subsample`` M < N averages over a seeded M-subset of the
    measure atoms; M >= N is the exact full evaluation, bit-identical to the
    default.  Deterministic for fixed (seed, step) and any worker count.
    """
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim != 2 or atoms.shape[0] < 1:
        raise DomainError("ensemble must be a nonempty (N, 2d) array")
    m_atoms = atoms if measure is None else _atoms_of(measure)
    if subsample is not None:
        if subsample < 1:
            raise ConfigError(f"subsample size must be >= 1, got {subsample}")
        if subsample < m_atoms.shape[0]:
            idx = rng.stream(seed, rng.TAG_SUBSAMPLE, block=step).permutation(m_atoms.shape[0])
            m_atoms = m_atoms[np.sort(idx[:subsample])]
    d = cs.d
    tf = float(t)
    b0 = _mean_over_atoms(cs.b0, tf, atoms, m_atoms, (d,), workers)
    b1 = _mean_over_atoms(cs.b1, tf, atoms, m_atoms, (d,), workers)
    sig = _mean_over_atoms(cs.sigma, tf, atoms, m_atoms, (d, d), workers)
    return b0, b1, sig
