"""Euler time stepping of the interacting-particle system.

The position block moves by the averaged drift alone; the velocity block
moves by the averaged drift plus the averaged diffusion matrix applied to a
Gaussian increment.  Coefficients are evaluated at the pre-step time and
pre-step ensemble (left-point rule), and the diffusion matrix multiplies the
increment directly; no square root of Sigma Sigma^T is taken.

Structural degeneracy: the position update never touches the random stream,
so replaying the drifts from stored snapshots reproduces the position block
bit for bit.

Randomness: particle i's increment at step s is row ``stream_ids[i]`` of the
counter-based noise block keyed by (seed, step) -- see :mod:`mvsde.rng`.
Initial draws live under a different tag, so the initial condition is
independent of the driving noise by key-space construction, and permuting
atoms together with their stream ids permutes trajectories exactly.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import rng
from .coefficients import make_system
from .errors import ConfigError, DomainError, SimulationError
from .meanfield import mf_batch
from .mollify import QuadratureSpec, mollify


@dataclass(frozen=True)
class InitialLawSpec:
    """Initial distribution of (x0, y0); every kind has finite fourth moment."""

    kind: str
    center: tuple = (0.0,)
    scale: float = 1.0
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ("point", "gaussian", "ball"):
            raise ConfigError(f"unknown initial law kind {self.kind!r}")
        if self.scale < 0:
            raise ConfigError(f"initial law scale must be >= 0, got {self.scale}")
        if self.radius < 0:
            raise ConfigError(f"initial law radius must be >= 0, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    @classmethod
    def point(cls, z0) -> "InitialLawSpec":
        return cls(kind="point", center=tuple(np.atleast_1d(z0)))

    @classmethod
    def gaussian(cls, mean=0.0, scale=1.0) -> "InitialLawSpec":
        return cls(kind="gaussian", center=tuple(np.atleast_1d(mean)), scale=scale)

    @classmethod
    def uniform_ball(cls, center=0.0, radius=1.0) -> "InitialLawSpec":
        return cls(kind="ball", center=tuple(np.atleast_1d(center)), radius=radius)

    def center_vector(self, d: int) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        if c.size == 1:
            return np.full(2 * d, c[0])
        if c.size != 2 * d:
            raise ConfigError(f"initial center needs 1 or {2 * d} components, got {c.size}")
        return c

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": list(self.center),
                "scale": self.scale, "radius": self.radius}

    @classmethod
    def from_dict(cls, payload: dict) -> "InitialLawSpec":
        return cls(kind=payload["kind"], center=tuple(payload["center"]),
                   scale=payload["scale"], radius=payload["radius"])


@dataclass(frozen=True)
class SimulationConfig:
    system: str
    N: int
    T: float
    steps: int
    seed: int
    d: int = 1
    mollify_n: int = 0  # 0 = raw coefficients
    initial: InitialLawSpec = field(default_factory=lambda: InitialLawSpec.gaussian(0.0, 1.0))
    subsample: Optional[int] = None  # None = full O(N^2) evaluation
    snapshot_stride: int = 1
    retain_increments: bool = False
    independent_ensemble: bool = False
    workers: int = 1
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.T <= 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.mollify_n < 0:
            raise ConfigError(f"mollification level must be >= 0, got {self.mollify_n}")
        if self.snapshot_stride < 1:
            raise ConfigError(f"snapshot_stride must be >= 1, got {self.snapshot_stride}")
        if self.subsample is not None and self.subsample < 1:
            raise ConfigError(f"subsample must be >= 1 or full, got {self.subsample}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @property
    def h(self) -> float:
        return self.T / self.steps

    def coefficient_set(self):
        cs = make_system(self.system, d=self.d)
        if self.mollify_n >= 1:
            return mollify(cs, self.mollify_n, self.quadrature)
        return cs

    def to_dict(self) -> dict:
        return {
            "system": self.system, "N": self.N, "T": self.T, "steps": self.steps,
            "seed": self.seed, "d": self.d, "mollify_n": self.mollify_n,
            "initial": self.initial.to_dict(),
            "subsample": self.subsample, "snapshot_stride": self.snapshot_stride,
            "retain_increments": self.retain_increments,
            "independent_ensemble": self.independent_ensemble,
            "workers": self.workers,
            "quadrature": {
                "mode": self.quadrature.mode,
                "points_per_axis": self.quadrature.points_per_axis,
                "total_nodes": self.quadrature.total_nodes,
                "node_seed": self.quadrature.node_seed,
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SimulationConfig":
        q = payload.get("quadrature", {})
        return cls(
            system=payload["system"], N=payload["N"], T=payload["T"],
            steps=payload["steps"], seed=payload["seed"], d=payload.get("d", 1),
            mollify_n=payload.get("mollify_n", 0),
            initial=InitialLawSpec.from_dict(payload["initial"]),
            subsample=payload.get("subsample"),
            snapshot_stride=payload.get("snapshot_stride", 1),
            retain_increments=payload.get("retain_increments", False),
            independent_ensemble=payload.get("independent_ensemble", False),
            workers=payload.get("workers", 1),
            quadrature=QuadratureSpec(
                mode=q.get("mode", "auto"),
                points_per_axis=q.get("points_per_axis", 10),
                total_nodes=q.get("total_nodes", 4096),
                node_seed=q.get("node_seed", 0x5EED_0DD5),
            ),
        )


@dataclass
class ParticleEnsemble:
    """N states (x_i, y_i) plus per-particle noise stream identities."""

    t: float
    atoms: np.ndarray  # (N, 2d)
    stream_ids: np.ndarray  # (N,) int64
    step_index: int = 0

    @property
    def n_particles(self) -> int:
        return self.atoms.shape[0]

    @property
    def d(self) -> int:
        return self.atoms.shape[1] // 2


@dataclass
class TrajectoryStore:
    """Snapshots, optional increments, and the config that produced them."""

    config: SimulationConfig
    snapshot_steps: list
    snapshot_times: list
    snapshots: list  # each (N, 2d) float64
    stream_ids: np.ndarray
    increments: Optional[np.ndarray] = None  # (steps, N, d) Wiener increments
    indep_snapshots: Optional[list] = None
    created_at: str = ""

    @property
    def terminal_atoms(self) -> np.ndarray:
        return self.snapshots[-1]

    def snapshot_index_at(self, time: float, tol: float = 1e-9) -> int:
        for i, s in enumerate(self.snapshot_times):
            if abs(s - time) <= tol:
                return i
        raise ConfigError(f"no snapshot at time {time} (times: {self.snapshot_times[:5]}...)")


def init_ensemble(spec: InitialLawSpec, N: int, d: int, seed: int,
                  ensemble_id: int = 0) -> ParticleEnsemble:
    """N i.i.d. draws from the initial law; deterministic in (seed, ensemble_id)."""
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    center = spec.center_vector(d)
    if spec.kind == "point":
        atoms = np.tile(center, (N, 1))
    elif spec.kind == "gaussian":
        gen = rng.stream(seed, rng.TAG_INIT, subkey=ensemble_id)
        atoms = center + spec.scale * gen.standard_normal((N, 2 * d))
    else:  # ball
        gen = rng.stream(seed, rng.TAG_INIT, subkey=ensemble_id)
        direction = gen.standard_normal((N, 2 * d))
        norms = np.linalg.norm(direction, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        radii = spec.radius * gen.uniform(size=(N, 1)) ** (1.0 / (2 * d))
        atoms = center + radii * direction / norms
    return ParticleEnsemble(t=0.0, atoms=atoms.astype(float),
                            stream_ids=np.arange(N, dtype=np.int64))


def em_step(ensemble: ParticleEnsemble, cs, h: float, seed: int,
            measure_atoms: Optional[np.ndarray] = None,
            subsample: Optional[int] = None, workers: int = 1,
            ensemble_id: int = 0):
    """One explicit Euler step; returns (new ensemble, Wiener increments (N, d)).

    x <- x + B0 h;  y <- y + B1 h + Sigma (sqrt(h) g), with g the documented
    per-(seed, particle, step) stream values and all mean-field terms read
    from the pre-step ensemble.
    """
    if h <= 0:
        raise DomainError(f"step size must be positive, got {h}")
    d = ensemble.d
    b0, b1, sig = mf_batch(cs, ensemble.t, ensemble.atoms, measure=measure_atoms,
                           subsample=subsample, seed=seed, step=ensemble.step_index,
                           workers=workers)
    n_streams = int(ensemble.stream_ids.max()) + 1
    block = rng.noise_block(seed, ensemble.step_index, n_streams, d, ensemble_id)
    dw = np.sqrt(h) * block[ensemble.stream_ids]
    atoms = np.empty_like(ensemble.atoms)
    atoms[:, :d] = ensemble.atoms[:, :d] + b0 * h
    atoms[:, d:] = ensemble.atoms[:, d:] + b1 * h + np.einsum("nij,nj->ni", sig, dw)
    if not np.all(np.isfinite(atoms)):
        bad = np.argwhere(~np.isfinite(atoms))[0]
        raise SimulationError(
            f"non-finite state for particle {bad[0]} after step {ensemble.step_index}"
        )
    return (
        ParticleEnsemble(t=ensemble.t + h, atoms=atoms, stream_ids=ensemble.stream_ids,
                         step_index=ensemble.step_index + 1),
        dw,
    )


def simulate(config: SimulationConfig) -> TrajectoryStore:
    """Run the particle system from 0 to T and collect snapshots.

    Bit-reproducible for a fixed config at any worker count.  With
    independent_ensemble, a second, independently seeded ensemble evolves
    self-interactingly and its empirical law drives the main ensemble.
    """
    cs = config.coefficient_set()
    if cs.d != config.d:
        raise ConfigError(f"system dimension {cs.d} != configured d {config.d}")
    h = config.h
    ens = init_ensemble(config.initial, config.N, config.d, config.seed, ensemble_id=0)
    indep = None
    if config.independent_ensemble:
        indep = init_ensemble(config.initial, config.N, config.d, config.seed, ensemble_id=1)

    snapshot_steps = [0]
    snapshot_times = [0.0]
    snapshots = [ens.atoms.copy()]
    indep_snaps = [indep.atoms.copy()] if indep is not None else None
    increments = (np.empty((config.steps, config.N, config.d))
                  if config.retain_increments else None)

    for s in range(config.steps):
        measure = indep.atoms if indep is not None else None
        ens, dw = em_step(ens, cs, h, config.seed, measure_atoms=measure,
                          subsample=config.subsample, workers=config.workers,
                          ensemble_id=0)
        if indep is not None:
            indep, _ = em_step(indep, cs, h, config.seed, measure_atoms=None,
                               subsample=config.subsample, workers=config.workers,
                               ensemble_id=1)
        if increments is not None:
            increments[s] = dw
        done = s + 1
        if done % config.snapshot_stride == 0 or done == config.steps:
            snapshot_steps.append(done)
            snapshot_times.append(done * h)
            snapshots.append(ens.atoms.copy())
            if indep is not None:
                indep_snaps.append(indep.atoms.copy())

    return TrajectoryStore(
        config=config,
        snapshot_steps=snapshot_steps,
        snapshot_times=snapshot_times,
        snapshots=snapshots,
        stream_ids=ens.stream_ids.copy(),
        increments=increments,
        indep_snapshots=indep_snaps,
        created_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
    )


def with_overrides(config: SimulationConfig, **kw) -> SimulationConfig:
    """Convenience wrapper around dataclasses.replace."""
    return replace(config, **kw)
