"""Coefficient triples (b0, b1, sigma) for the kinetic mean-field system.

The state is z = (x, y) in R^{2d} and the interaction argument is
zeta = (xi, eta) in R^{2d}.  The position block x moves by the averaged drift
b0 only; the velocity block y moves by the averaged drift b1 plus the averaged
diffusion sigma applied to Wiener increments.

Kernel calling convention
-------------------------
Each coefficient is a callable ``f(t, z, zeta)``:

* ``t`` is a float or a float array broadcastable against the leading
  dimensions of ``z`` / ``zeta``;
* ``z`` and ``zeta`` are arrays of shape ``(..., 2d)`` with
  broadcast-compatible leading dimensions;
* drifts return ``(..., d)``, sigma returns ``(..., d, d)``; size-1 leading
  axes may be left implicit (constants can return shape ``(d,)``).

Kernels must be pure functions of their arguments: they are evaluated
concurrently from many workers and results must not depend on call order.

The ``*_axes`` fields name the variable blocks (subsets of
``("x", "y", "xi", "eta")``) a kernel actually reads.  ``None`` means "assume
all of them".  Declaring fewer axes than the callable reads silently breaks
the mollifier's preservation guarantees, so only declare what is true.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng
from .errors import ConstructionError, DomainError, ShapeError

AXIS_BLOCKS = ("x", "y", "xi", "eta")

DEFAULT_TOLERANCE = 1e-9
MODULUS_SEPARATIONS = (1e-1, 1e-2, 1e-3)


@dataclass(frozen=True)
class CoefficientSet:
    """The triple (b0, b1, sigma) with its declared constants.

    bound_C is the declared uniform bound on |b0| + |b1| + ||sigma||_F,
    ellipticity_nu the declared lower bound on lambda^T sigma lambda over unit
    lambda, and modulus_rho (optional) the declared joint modulus of
    continuity of b1 and sigma in the (x, xi) variables.
    """

    d: int
    b0: Callable
    b1: Callable
    sigma: Callable
    bound_C: float
    ellipticity_nu: float
    modulus_rho: Optional[Callable] = None
    b0_axes: Optional[tuple[str, ...]] = None
    b1_axes: Optional[tuple[str, ...]] = None
    sigma_axes: Optional[tuple[str, ...]] = None
    name: str = "custom"

    def __post_init__(self):
        if self.d < 1:
            raise ConstructionError(f"dimension must be positive, got {self.d}")
        if self.bound_C <= 0:
            raise ConstructionError(f"bound_C must be positive, got {self.bound_C}")
        if self.ellipticity_nu <= 0:
            raise ConstructionError(f"ellipticity_nu must be positive, got {self.ellipticity_nu}")
        for label, axes in (("b0", self.b0_axes), ("b1", self.b1_axes), ("sigma", self.sigma_axes)):
            if axes is not None and any(a not in AXIS_BLOCKS for a in axes):
                raise ConstructionError(f"{label}_axes contains unknown block in {axes}")


def _check_point(d: int, t, z, zeta):
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if z.shape[-1:] != (2 * d,) or zeta.shape[-1:] != (2 * d,):
        raise ShapeError(f"state vectors must have length {2 * d}, got {z.shape} and {zeta.shape}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(z)) and np.all(np.isfinite(zeta))):
        raise DomainError("non-finite input to coefficient evaluation")
    if np.any(t < 0):
        raise DomainError("time must be nonnegative")
    return t, z, zeta


def _eval(kernel, out_tail, d, t, z, zeta):
    t, z, zeta = _check_point(d, t, z, zeta)
    lead = np.broadcast_shapes(t.shape, z.shape[:-1], zeta.shape[:-1])
    out = np.asarray(kernel(t, z, zeta), dtype=float)
    return np.array(np.broadcast_to(out, lead + out_tail))


def eval_b0(cs: CoefficientSet, t, z, zeta) -> np.ndarray:
    """Pointwise position-drift kernel b0(t, z, zeta), shape (d,)."""
    return _eval(cs.b0, (cs.d,), cs.d, t, z, zeta)


def eval_b1(cs: CoefficientSet, t, z, zeta) -> np.ndarray:
    """Pointwise velocity-drift kernel b1(t, z, zeta), shape (d,)."""
    return _eval(cs.b1, (cs.d,), cs.d, t, z, zeta)


def eval_sigma(cs: CoefficientSet, t, z, zeta) -> np.ndarray:
    """Pointwise diffusion kernel sigma(t, z, zeta), shape (d, d), symmetric."""
    return _eval(cs.sigma, (cs.d, cs.d), cs.d, t, z, zeta)


# ---------------------------------------------------------------------------
# Hypothesis validation
# ---------------------------------------------------------------------------


@dataclass
class ConditionResult:
    condition: str
    passed: bool
    margin: Optional[float]
    worst_sample: Optional[dict]
    observational: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "passed": bool(self.passed),
            "margin": None if self.margin is None else float(self.margin),
            "worst_sample": self.worst_sample,
            "observational": bool(self.observational),
            "details": self.details,
        }


@dataclass
class HypothesisReport:
    system: str
    num_points: int
    box_radius: float
    seed: int
    conditions: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def condition(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.condition == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "num_points": self.num_points,
            "box_radius": self.box_radius,
            "seed": self.seed,
            "all_passed": self.all_passed,
            "conditions": [c.to_dict() for c in self.conditions],
        }


def _sample_points(d: int, num_points: int, box_radius: float, seed: int, subkey: int = 0):
    gen = rng.stream(seed, rng.TAG_VALIDATE, subkey=subkey)
    t = gen.uniform(0.0, box_radius, size=num_points)
    z = gen.uniform(-box_radius, box_radius, size=(num_points, 2 * d))
    zeta = gen.uniform(-box_radius, box_radius, size=(num_points, 2 * d))
    return t, z, zeta


def _worst(t, z, zeta, idx) -> dict:
    return {"t": float(t[idx]), "z": [float(v) for v in z[idx]], "zeta": [float(v) for v in zeta[idx]]}


def validate_hypotheses(
    cs: CoefficientSet,
    num_points: int = 10_000,
    box_radius: float = 10.0,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> HypothesisReport:
    """Sampling check of the declared bound, ellipticity, symmetry, and continuity.

    Bound and ellipticity margins are worst-case over the sample (negative
    margin = violation).  Continuity of b1/sigma in (x, xi) is compared with
    modulus_rho when declared, otherwise reported observationally, as is the
    joint continuity of b0 in (z, zeta).  Failures are report entries, never
    exceptions.
    """
    if num_points < 1:
        raise DomainError("num_points must be >= 1")
    d = cs.d
    t, z, zeta = _sample_points(d, num_points, box_radius, seed)
    b0 = np.asarray(cs.b0(t, z, zeta), dtype=float)
    b1 = np.asarray(cs.b1(t, z, zeta), dtype=float)
    sig = np.asarray(cs.sigma(t, z, zeta), dtype=float)
    b0 = np.broadcast_to(b0, (num_points, d))
    b1 = np.broadcast_to(b1, (num_points, d))
    sig = np.broadcast_to(sig, (num_points, d, d))

    conditions = []

    total = (
        np.linalg.norm(b0, axis=-1)
        + np.linalg.norm(b1, axis=-1)
        + np.linalg.norm(sig, axis=(-2, -1))
    )
    i = int(np.argmax(total))
    margin = float(cs.bound_C - total[i])
    conditions.append(
        ConditionResult(
            "bound",
            passed=margin >= -tolerance,
            margin=margin,
            worst_sample=_worst(t, z, zeta, i),
            details={"max_total": float(total[i]), "bound_C": float(cs.bound_C)},
        )
    )

    asym = np.max(np.abs(sig - np.swapaxes(sig, -2, -1)), axis=(-2, -1))
    j = int(np.argmax(asym))
    conditions.append(
        ConditionResult(
            "symmetry",
            passed=bool(asym[j] == 0.0),
            margin=float(-asym[j]),
            worst_sample=_worst(t, z, zeta, j),
            details={"max_asymmetry": float(asym[j])},
        )
    )

    eigs = np.linalg.eigvalsh((sig + np.swapaxes(sig, -2, -1)) / 2.0)
    min_eig = eigs[..., 0]
    k = int(np.argmin(min_eig))
    margin = float(min_eig[k] - cs.ellipticity_nu)
    conditions.append(
        ConditionResult(
            "ellipticity",
            passed=margin >= -tolerance,
            margin=margin,
            worst_sample=_worst(t, z, zeta, k),
            details={"min_eigenvalue": float(min_eig[k]), "nu": float(cs.ellipticity_nu)},
        )
    )

    conditions.append(_modulus_condition(cs, num_points, box_radius, seed, tolerance))
    conditions.append(_b0_continuity_condition(cs, num_points, box_radius, seed))

    return HypothesisReport(cs.name, num_points, box_radius, seed, conditions)


def _modulus_condition(cs, num_points, box_radius, seed, tolerance) -> ConditionResult:
    d = cs.d
    n_pairs = min(num_points, 1000)
    t, z, zeta = _sample_points(d, n_pairs, box_radius, seed, subkey=1)
    gen = rng.stream(seed, rng.TAG_VALIDATE, subkey=2)
    # Perturbations confined to the (x, xi) subspace, exact Euclidean norm r.
    direction = gen.standard_normal((n_pairs, 2 * d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    table = {}
    worst = None
    worst_gap = np.inf
    for r in MODULUS_SEPARATIONS:
        dz = np.zeros((n_pairs, 2 * d))
        dzeta = np.zeros((n_pairs, 2 * d))
        dz[:, :d] = r * direction[:, :d]
        dzeta[:, :d] = r * direction[:, d:]
        vb1 = np.linalg.norm(
            np.broadcast_to(np.asarray(cs.b1(t, z + dz, zeta + dzeta), dtype=float), (n_pairs, d))
            - np.broadcast_to(np.asarray(cs.b1(t, z, zeta), dtype=float), (n_pairs, d)),
            axis=-1,
        )
        vsig = np.linalg.norm(
            np.broadcast_to(np.asarray(cs.sigma(t, z + dz, zeta + dzeta), dtype=float), (n_pairs, d, d))
            - np.broadcast_to(np.asarray(cs.sigma(t, z, zeta), dtype=float), (n_pairs, d, d)),
            axis=(-2, -1),
        )
        variation = np.maximum(vb1, vsig)
        i = int(np.argmax(variation))
        table[f"{r:g}"] = float(variation[i])
        if cs.modulus_rho is not None:
            gap = float(cs.modulus_rho(r)) - float(variation[i])
            if gap < worst_gap:
                worst_gap = gap
                worst = _worst(t, z, zeta, i)
    if cs.modulus_rho is None:
        return ConditionResult(
            "modulus_x_xi", passed=True, margin=None, worst_sample=None,
            observational=True, details={"max_variation": table},
        )
    return ConditionResult(
        "modulus_x_xi",
        passed=worst_gap >= -tolerance,
        margin=float(worst_gap),
        worst_sample=worst,
        details={"max_variation": table},
    )


def _b0_continuity_condition(cs, num_points, box_radius, seed) -> ConditionResult:
    d = cs.d
    n_pairs = min(num_points, 1000)
    t, z, zeta = _sample_points(d, n_pairs, box_radius, seed, subkey=3)
    gen = rng.stream(seed, rng.TAG_VALIDATE, subkey=4)
    direction = gen.standard_normal((n_pairs, 4 * d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    table = {}
    for r in MODULUS_SEPARATIONS:
        dz = r * direction[:, : 2 * d]
        dzeta = r * direction[:, 2 * d :]
        variation = np.linalg.norm(
            np.broadcast_to(np.asarray(cs.b0(t, z + dz, zeta + dzeta), dtype=float), (n_pairs, d))
            - np.broadcast_to(np.asarray(cs.b0(t, z, zeta), dtype=float), (n_pairs, d)),
            axis=-1,
        )
        table[f"{r:g}"] = float(np.max(variation))
    return ConditionResult(
        "b0_continuity", passed=True, margin=None, worst_sample=None,
        observational=True, details={"max_variation": table},
    )


# ---------------------------------------------------------------------------
# Built-in test systems
# ---------------------------------------------------------------------------


def _zero_modulus(r):
    return np.zeros_like(np.asarray(r, dtype=float))


def free_system(d: int = 1) -> CoefficientSet:
    """b0 = b1 = 0, sigma = I: the analytically solvable reference system."""
    eye = np.eye(d)
    zero = np.zeros(d)
    return CoefficientSet(
        d=d,
        b0=lambda t, z, zeta: zero,
        b1=lambda t, z, zeta: zero,
        sigma=lambda t, z, zeta: eye,
        bound_C=float(np.sqrt(d)),
        ellipticity_nu=1.0,
        modulus_rho=_zero_modulus,
        b0_axes=(), b1_axes=(), sigma_axes=(),
        name=f"free-d{d}",
    )


def transport_system(d: int = 1, strength: float = 1.0) -> CoefficientSet:
    """Positions integrate a saturating function of own velocity; y diffuses freely."""
    eye = np.eye(d)
    zero = np.zeros(d)
    return CoefficientSet(
        d=d,
        b0=lambda t, z, zeta: strength * np.tanh(z[..., d:]),
        b1=lambda t, z, zeta: zero,
        sigma=lambda t, z, zeta: eye,
        bound_C=float((1.0 + strength) * np.sqrt(d)),
        ellipticity_nu=1.0,
        modulus_rho=_zero_modulus,
        b0_axes=("y",), b1_axes=(), sigma_axes=(),
        name=f"transport-d{d}",
    )


def attraction_system(d: int = 1, strength: float = 1.0, kappa: float = 1.0) -> CoefficientSet:
    """Saturating attraction tanh(kappa (xi - x)) in both drift blocks; true pairwise mean field."""
    eye = np.eye(d)

    def pull(t, z, zeta):
        return strength * np.tanh(kappa * (zeta[..., :d] - z[..., :d]))

    def rho(r):
        return np.sqrt(2.0) * kappa * strength * np.asarray(r, dtype=float)

    return CoefficientSet(
        d=d,
        b0=pull,
        b1=pull,
        sigma=lambda t, z, zeta: eye,
        bound_C=float((1.0 + 2.0 * strength) * np.sqrt(d)),
        ellipticity_nu=1.0,
        modulus_rho=rho,
        b0_axes=("x", "xi"), b1_axes=("x", "xi"), sigma_axes=(),
        name=f"attraction-d{d}",
    )


ROUGH_WAVE_PERIOD = 1.6
ROUGH_RAMP_TIME = 0.3
ROUGH_B0_AMP = 0.5
ROUGH_B1_AMP = 0.1
ROUGH_SIGMA_AMP = 0.2


def rough_system(d: int = 1) -> CoefficientSet:
    """Coefficients with no regularity in t, y, eta: the regime the solver targets.

    Positions ride alternating shear layers of the velocity field,
    b0 = ramp(t) cos(2 pi y / period) / 2 with a start-up ramp (continuous in
    (z, zeta), kinked in t).  The velocity block has a small sign(y) drift
    that reverses direction at t = 1/2 (discontinuous in y and t), and the
    first diffusion direction strengthens or weakens with the population
    fraction of positive first velocity components,
    sigma = I + a (1{eta_1 > 0} - 1/2) E_11 (discontinuous in eta, coupled to
    the law, anisotropic for d >= 2).  Everything is constant in (x, xi), the
    declared modulus there is zero.  The shear-layer period is chosen so the
    smoothing ladder's resolution transition falls between levels 2 and 4,
    which makes the level distances decay faster than the bandwidth.
    """
    eye = np.eye(d)

    def b0(t, z, zeta):
        ramp = np.minimum(np.asarray(t, dtype=float) / ROUGH_RAMP_TIME, 1.0)
        return ROUGH_B0_AMP * ramp[..., None] * np.cos(2.0 * np.pi * z[..., d:] / ROUGH_WAVE_PERIOD)

    def b1(t, z, zeta):
        flip = np.where(np.asarray(t, dtype=float) < 0.5, 1.0, -1.0)
        return ROUGH_B1_AMP * np.sign(z[..., d:]) * flip[..., None]

    def sigma(t, z, zeta):
        bump = ROUGH_SIGMA_AMP * ((zeta[..., d] > 0).astype(float) - 0.5)
        out = np.zeros(np.shape(bump) + (d, d))
        out[...] = eye
        out[..., 0, 0] += bump
        return out

    half = 0.5 * ROUGH_SIGMA_AMP
    return CoefficientSet(
        d=d,
        b0=b0,
        b1=b1,
        sigma=sigma,
        bound_C=float((ROUGH_B0_AMP + ROUGH_B1_AMP) * np.sqrt(d)
                      + np.sqrt((1.0 + half) ** 2 + (d - 1))),
        ellipticity_nu=1.0 - half,
        modulus_rho=_zero_modulus,
        b0_axes=("y",), b1_axes=("y",), sigma_axes=("eta",),
        name=f"rough-d{d}",
    )


CATALOG = {
    "free": free_system,
    "transport": transport_system,
    "attraction": attraction_system,
    "rough": rough_system,
}

_CONSTRUCTION_POINTS = 256
_CONSTRUCTION_RADIUS = 5.0


def _construction_scan(cs: CoefficientSet) -> None:
    """Reject catalog entries violating ellipticity/bound/symmetry on a quick scan."""
    report = validate_hypotheses(cs, num_points=_CONSTRUCTION_POINTS,
                                 box_radius=_CONSTRUCTION_RADIUS, seed=20_24)
    for name in ("ellipticity", "bound", "symmetry"):
        cond = report.condition(name)
        if not cond.passed:
            raise ConstructionError(
                f"catalog entry {cs.name!r} violates {name} at a validator sample point "
                f"(margin {cond.margin:.3g})"
            )


def make_system(name: str, d: Optional[int] = None) -> CoefficientSet:
    """Build a catalog entry by name.

    Names are a family optionally suffixed with a dimension, e.g. "rough" or
    "rough-d2".  An explicit ``d`` argument overrides the suffix.
    """
    family, dim = name, 1
    if "-d" in name:
        family, _, tail = name.rpartition("-d")
        try:
            dim = int(tail)
        except ValueError:
            raise ConstructionError(f"unknown system name {name!r}") from None
    if d is not None:
        dim = d
    if family not in CATALOG:
        raise ConstructionError(f"unknown system name {name!r}; catalog: {sorted(CATALOG)}")
    if dim < 1:
        raise ConstructionError(f"dimension must be positive, got {dim}")
    cs = CATALOG[family](dim)
    _construction_scan(cs)
    return cs


def catalog_names(dims: Sequence[int] = (1, 2)) -> list[str]:
    """All catalog entry names across the given dimensions."""
    return [f"{family}-d{d}" for family in sorted(CATALOG) for d in dims]
