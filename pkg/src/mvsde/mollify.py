"""Coefficient smoothing by convolution with compactly supported bump kernels.

Each coefficient is convolved, in every variable it depends on, with the
standard bump profile

    psi_eps(u) = kappa * exp(-1 / (1 - (u/eps)^2))   for |u| < eps, 0 outside,

normalized to unit mass, with bandwidth eps = 1/n at smoothing level n.  The
time variable is special: the base coefficients are extended below t = 0 by
zero (drifts) and the identity matrix (diffusion) before convolving, which
keeps the smoothed diffusion uniformly elliptic down to t = 0.  Consequences
used downstream: quadrature weights are positive and sum to one, so smoothing
preserves the declared bound C (provided C >= sqrt(d), the Frobenius norm of
the identity extension) and preserves ellipticity with constant min(nu, 1).

The convolution integral is discretized by a fixed node/weight table built at
construction: a tensor-product midpoint rule (even point count per axis, so no
node sits on the t = 0 jump of the extension) or an importance-sampled
quasi-random set with uniform weights.  Only axes the coefficient declares are
materialized; on an undeclared axis the convolution is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.stats import qmc

from . import rng
from .coefficients import AXIS_BLOCKS, CoefficientSet
from .errors import ConfigError, ConstructionError, DomainError

# Mass of exp(-1/(1-v^2)) on [-1, 1]; fixes the unit-integral normalization.
_UNIT_BUMP_MASS = quad(lambda v: np.exp(-1.0 / (1.0 - v * v)), -1.0, 1.0,
                       epsabs=1e-14, epsrel=1e-13, limit=200)[0]

DEFAULT_POINTS_PER_AXIS = 10
DEFAULT_QMC_NODES = 4096
QMC_NODE_SEED = 0x5EED_0DD5  # fixed: node sets do not depend on run seeds


@dataclass(frozen=True)
class MollifierKernel:
    """The 1-d bump profile at a given bandwidth."""

    bandwidth: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ConstructionError(f"bandwidth must be positive, got {self.bandwidth}")

    def profile(self, u) -> np.ndarray:
        """Unit-mass bump density; zero outside (-bandwidth, bandwidth)."""
        u = np.asarray(u, dtype=float)
        v = u / self.bandwidth
        inside = np.abs(v) < 1.0
        out = np.zeros_like(v)
        vs = v[inside]
        out[inside] = np.exp(-1.0 / (1.0 - vs * vs))
        return out / (self.bandwidth * _UNIT_BUMP_MASS)


@dataclass(frozen=True)
class QuadratureSpec:
    """Discretization rule for the smoothing convolution.

    mode "auto" resolves to tensor-midpoint for d = 1 (always) and for d >= 2
    whenever the restricted integration dimension is at most 3; otherwise a
    scrambled-Sobol node set with uniform weights, importance-sampled from the
    product bump density.
    """

    mode: str = "auto"
    points_per_axis: int = DEFAULT_POINTS_PER_AXIS
    total_nodes: int = DEFAULT_QMC_NODES
    node_seed: int = QMC_NODE_SEED

    def __post_init__(self):
        if self.mode not in ("auto", "tensor", "quasirandom"):
            raise ConfigError(f"unknown quadrature mode {self.mode!r}")
        if self.points_per_axis < 2 or self.points_per_axis % 2 != 0:
            raise ConfigError(
                "points_per_axis must be an even integer >= 2 "
                "(an odd count puts a node on the t=0 extension jump)"
            )
        if self.total_nodes < 1:
            raise ConfigError("total_nodes must be >= 1")

    def resolve(self, dims: int, d: int) -> str:
        if self.mode != "auto":
            return self.mode
        if d == 1 or dims <= 3:
            return "tensor"
        return "quasirandom"


def _axis_nodes(kernel: MollifierKernel, m: int):
    """Midpoint nodes and profile weights on [-eps, eps], normalized to sum 1."""
    eps = kernel.bandwidth
    u = -eps + (np.arange(m) + 0.5) * (2.0 * eps / m)
    w = kernel.profile(u)
    return u, w / w.sum()


_INV_CDF_GRID = 4097


def _bump_inverse_cdf() -> tuple[np.ndarray, np.ndarray]:
    v = np.linspace(-1.0, 1.0, _INV_CDF_GRID)
    pdf = np.zeros_like(v)
    inner = np.abs(v) < 1.0
    pdf[inner] = np.exp(-1.0 / (1.0 - v[inner] ** 2))
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(v))])
    return cdf / cdf[-1], v


_BUMP_CDF, _BUMP_GRID = _bump_inverse_cdf()


@dataclass(frozen=True)
class _NodeTable:
    """Offsets (K, 1 + 4d) over (t, x, y, xi, eta) and weights (K,); unused axes are zero columns."""

    offsets: np.ndarray
    weights: np.ndarray
    mode: str


def _build_table(kernel: MollifierKernel, d: int, axes: Optional[tuple[str, ...]],
                 spec: QuadratureSpec) -> _NodeTable:
    used = AXIS_BLOCKS if axes is None else tuple(a for a in AXIS_BLOCKS if a in axes)
    n_coords = 1 + d * len(used)  # t always smoothed: the extension acts through it
    mode = spec.resolve(n_coords, d)
    base = {"x": 1, "y": 1 + d, "xi": 1 + 2 * d, "eta": 1 + 3 * d}

    if mode == "tensor":
        if spec.points_per_axis ** n_coords > 2_000_000:
            raise ConfigError(
                f"tensor rule would need {spec.points_per_axis}^{n_coords} nodes; "
                "use quasirandom mode or declare coefficient axes"
            )
        u, w = _axis_nodes(kernel, spec.points_per_axis)
        grids = np.meshgrid(*([u] * n_coords), indexing="ij")
        wgrids = np.meshgrid(*([w] * n_coords), indexing="ij")
        packed = np.stack([g.ravel() for g in grids], axis=1)
        weights = np.ones(packed.shape[0])
        for g in wgrids:
            weights = weights * g.ravel()
    else:
        sob = qmc.Sobol(n_coords, scramble=True, seed=spec.node_seed)
        u01 = sob.random(spec.total_nodes)
        packed = kernel.bandwidth * np.interp(u01, _BUMP_CDF, _BUMP_GRID)
        weights = np.full(spec.total_nodes, 1.0 / spec.total_nodes)

    offsets = np.zeros((packed.shape[0], 1 + 4 * d))
    offsets[:, 0] = packed[:, 0]
    col = 1
    for block in used:
        offsets[:, base[block]:base[block] + d] = packed[:, col:col + d]
        col += d
    return _NodeTable(offsets=offsets, weights=weights, mode=mode)


class MollifiedCoefficientSet:
    """A CoefficientSet smoothed at level n; evaluates like a CoefficientSet.

    Immutable after construction; node tables are materialized once and
    evaluation is a fixed-order weighted sum over them, so two constructions
    from identical inputs evaluate bit-identically.  The declared ellipticity
    constant drops to min(nu, 1) because the t < 0 extension of sigma is the
    identity.
    """

    def __init__(self, base: CoefficientSet, level_n: int, quadrature: QuadratureSpec):
        if level_n < 1:
            raise ConstructionError(f"mollification level must be >= 1, got {level_n}")
        if base.bound_C < np.sqrt(base.d):
            raise ConstructionError(
                "identity extension violates declared bound: "
                f"bound_C = {base.bound_C} < sqrt(d) = {np.sqrt(base.d)}"
            )
        self.base = base
        self.level_n = int(level_n)
        self.quadrature = quadrature
        self.kernel = MollifierKernel(bandwidth=1.0 / level_n)
        self.d = base.d
        self.bound_C = base.bound_C
        self.ellipticity_nu = min(base.ellipticity_nu, 1.0)
        self.modulus_rho = base.modulus_rho
        self.name = f"{base.name}-mollified-n{level_n}"
        self._tables = {
            "b0": _build_table(self.kernel, base.d, base.b0_axes, quadrature),
            "b1": _build_table(self.kernel, base.d, base.b1_axes, quadrature),
            "sigma": _build_table(self.kernel, base.d, base.sigma_axes, quadrature),
        }
        self._eye = np.eye(base.d)

    # CoefficientSet-compatible axis metadata (smoothing does not add dependence).
    @property
    def b0_axes(self):
        return self.base.b0_axes

    @property
    def b1_axes(self):
        return self.base.b1_axes

    @property
    def sigma_axes(self):
        return self.base.sigma_axes

    def node_table(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        tab = self._tables[which]
        return tab.offsets, tab.weights

    def _smoothed(self, kernel_fn, table: _NodeTable, extension, tail_ndim, t, z, zeta):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("time must be nonnegative")
        z = np.asarray(z, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        d = self.d
        acc = None
        for k in range(table.offsets.shape[0]):
            off = table.offsets[k]
            tk = t - off[0]
            mask = np.asarray(tk < 0.0)
            val = np.asarray(
                kernel_fn(np.maximum(tk, 0.0), z - off[1:1 + 2 * d], zeta - off[1 + 2 * d:]),
                dtype=float,
            )
            if np.any(mask):
                val = np.where(mask.reshape(mask.shape + (1,) * tail_ndim), extension, val)
            term = table.weights[k] * val
            acc = term if acc is None else acc + term
        return acc

    def b0(self, t, z, zeta):
        return self._smoothed(self.base.b0, self._tables["b0"], 0.0, 1, t, z, zeta)

    def b1(self, t, z, zeta):
        return self._smoothed(self.base.b1, self._tables["b1"], 0.0, 1, t, z, zeta)

    def sigma(self, t, z, zeta):
        return self._smoothed(self.base.sigma, self._tables["sigma"], self._eye, 2, t, z, zeta)


def mollify(cs: CoefficientSet, n: int, quadrature: Optional[QuadratureSpec] = None) -> MollifiedCoefficientSet:
    """Smooth all three coefficients at level n (bandwidth 1/n)."""
    return MollifiedCoefficientSet(cs, n, quadrature or QuadratureSpec())


_PROBE_AXES = ("t", "x", "y", "xi", "eta")


def lipschitz_probe(mcs, axis: str, num_pairs: int = 256, seed: int = 0) -> float:
    """Empirical Lipschitz estimate along one variable axis.

    Max over sampled pairs and over the three coefficients of |df| / |du| for
    a displacement du = bandwidth/32 along the first scalar coordinate of the
    named block ("t", "x", "y", "xi", "eta").  Smoothing makes this finite;
    for discontinuous bases it grows with the level.
    """
    if num_pairs < 1:
        raise DomainError("num_pairs must be >= 1")
    if axis not in _PROBE_AXES:
        raise ConfigError(f"unknown probe axis {axis!r}; expected one of {_PROBE_AXES}")
    d = mcs.d
    eps = getattr(mcs, "kernel", MollifierKernel(1.0)).bandwidth
    delta = eps / 32.0
    gen = rng.stream(seed, rng.TAG_PROBE)
    t = gen.uniform(eps, 2.0 + eps, size=num_pairs)
    z = gen.uniform(-2.0, 2.0, size=(num_pairs, 2 * d))
    zeta = gen.uniform(-2.0, 2.0, size=(num_pairs, 2 * d))
    dt = np.zeros(num_pairs)
    dz = np.zeros((num_pairs, 2 * d))
    dzeta = np.zeros((num_pairs, 2 * d))
    if axis == "t":
        dt[:] = delta
    elif axis == "x":
        dz[:, 0] = delta
    elif axis == "y":
        dz[:, d] = delta
    elif axis == "xi":
        dzeta[:, 0] = delta
    else:
        dzeta[:, d] = delta

    worst = 0.0
    for fn, tail in ((mcs.b0, (d,)), (mcs.b1, (d,)), (mcs.sigma, (d, d))):
        lo = np.broadcast_to(np.asarray(fn(t, z, zeta), dtype=float), (num_pairs,) + tail)
        hi = np.broadcast_to(np.asarray(fn(t + dt, z + dz, zeta + dzeta), dtype=float), (num_pairs,) + tail)
        diff = np.linalg.norm((hi - lo).reshape(num_pairs, -1), axis=1)
        worst = max(worst, float(np.max(diff) / delta))
    return worst
