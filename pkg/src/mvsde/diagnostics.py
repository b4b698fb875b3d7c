"""Estimators and tests for the solver's checkable properties.

* fourth-moment estimates: running sup and increment table with its log-log
  slope (an elliptic velocity block gives E|dZ|^4 ~ h^2, slope ~ 2; a
  drift-only position block gives O(h^4));
* sliced Wasserstein-1 distances between empirical laws, and Cauchy ladders
  across mollification level, particle count, or step count;
* ellipticity and bound scans for raw and smoothed coefficient sets;
* a factorization test for independence of Wiener increments from the path's
  past, with a fixed catalog of bounded continuous test functions;
* structural-degeneracy checks: drift replay of the position block and the
  bounded-drift envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.stats import wasserstein_distance

from . import rng
from .errors import ConfigError, DomainError, ShapeError
from .integrator import SimulationConfig, TrajectoryStore, simulate
from .meanfield import EmpiricalMeasure, mf_batch

_BLOCKS = ("z", "x", "y")


def _block_slice(store_d: int, block: str) -> slice:
    if block == "z":
        return slice(0, 2 * store_d)
    if block == "x":
        return slice(0, store_d)
    if block == "y":
        return slice(store_d, 2 * store_d)
    raise ConfigError(f"unknown block {block!r}; expected one of {_BLOCKS}")


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@dataclass
class MomentReport:
    block: str
    num_particles: int
    snapshots_used: int
    sup_moment: Optional[float] = None
    table: list = field(default_factory=list)  # rows (h, estimate, num_pairs)
    slope: Optional[float] = None
    intercept: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "num_particles": self.num_particles,
            "snapshots_used": self.snapshots_used,
            "sup_moment": self.sup_moment,
            "table": [{"h": h, "estimate": v, "num_pairs": k} for h, v, k in self.table],
            "slope": self.slope,
            "intercept": self.intercept,
        }


def _stacked(store: TrajectoryStore, block: str) -> np.ndarray:
    if len(store.snapshots) < 2:
        raise DomainError("store needs at least 2 snapshots")
    sl = _block_slice(store.config.d, block)
    return np.stack([snap[:, sl] for snap in store.snapshots])  # (S, N, dims)


def moment_sup4(store: TrajectoryStore, block: str = "z") -> MomentReport:
    """Monte Carlo estimate of E sup_{t<=T} |Z_t|^4 over the snapshot grid."""
    stack = _stacked(store, block)
    norms_sq = np.einsum("snk,snk->sn", stack, stack)
    sup4 = float(np.mean(np.max(norms_sq, axis=0) ** 2))
    return MomentReport(block=block, num_particles=stack.shape[1],
                        snapshots_used=stack.shape[0], sup_moment=sup4)


def increment_moment4(store: TrajectoryStore, h_values: Sequence[float],
                      block: str = "z") -> MomentReport:
    """Table of E|Z_{t+h} - Z_t|^4 averaged over admissible t, with log-log fit.

    Every h must be an integer number of steps whose endpoints both lie on the
    snapshot grid.  h_values are reported in decreasing order.
    """
    h_values = sorted((float(h) for h in h_values), reverse=True)
    if len(h_values) < 1:
        raise ConfigError("need at least one increment span")
    stack = _stacked(store, block)
    step_of = {s: i for i, s in enumerate(store.snapshot_steps)}
    dt = store.config.h
    table = []
    for h in h_values:
        lag = h / dt
        lag_steps = int(round(lag))
        if lag_steps < 1 or abs(lag - lag_steps) > 1e-9:
            raise ConfigError(f"increment span {h} is not a whole number of steps (h_step={dt})")
        pairs = [(step_of[s], step_of[s + lag_steps]) for s in store.snapshot_steps
                 if s + lag_steps in step_of]
        if not pairs:
            raise ConfigError(f"increment span {h} has no matching snapshot pairs")
        lo = np.array([p[0] for p in pairs])
        hi = np.array([p[1] for p in pairs])
        diff = stack[hi] - stack[lo]
        est = float(np.mean(np.einsum("pnk,pnk->pn", diff, diff) ** 2))
        table.append((h, est, len(pairs)))
    report = MomentReport(block=block, num_particles=stack.shape[1],
                          snapshots_used=stack.shape[0], table=table)
    if len(table) >= 2 and all(v > 0 for _, v, _ in table):
        hs = np.log([row[0] for row in table])
        vs = np.log([row[1] for row in table])
        slope, intercept = np.polyfit(hs, vs, 1)
        report.slope = float(slope)
        report.intercept = float(intercept)
    return report


# ---------------------------------------------------------------------------
# Sliced Wasserstein distance and ladders
# ---------------------------------------------------------------------------


def sliced_w1(mu_a, mu_b, num_projections: int = 64, seed: int = 0) -> float:
    """Average 1-d transport distance over seeded random unit projections.

    Exact sorted-coupling transport in each projection; a pseudometric on
    atom lists (symmetric, triangle inequality up to roundoff, zero on
    identical inputs).
    """
    a = mu_a.atoms if isinstance(mu_a, EmpiricalMeasure) else np.asarray(mu_a, dtype=float)
    b = mu_b.atoms if isinstance(mu_b, EmpiricalMeasure) else np.asarray(mu_b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] < 1 or b.shape[0] < 1:
        raise DomainError("sliced_w1 needs nonempty (N, dims) atom arrays")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if num_projections < 1:
        raise ConfigError("num_projections must be >= 1")
    gen = rng.stream(seed, rng.TAG_PROJECTION)
    directions = gen.standard_normal((num_projections, a.shape[1]))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    directions /= norms
    total = 0.0
    for u in directions:
        total += wasserstein_distance(a @ u, b @ u)
    return float(total / num_projections)


_LADDER_AXES = {"n": "n", "mollification-n": "n",
                "N": "N", "particles-N": "N",
                "h": "h", "timestep-h": "h"}


@dataclass
class LadderReport:
    axis: str
    levels: list
    distances: list  # consecutive pairs, or each level vs the reference
    verdict: str
    reference: Optional[int] = None  # the reference level, when used

    def to_dict(self) -> dict:
        return {"axis": self.axis, "levels": self.levels, "distances": self.distances,
                "verdict": self.verdict, "reference": self.reference}


def _ladder_verdict(distances: Sequence[float], slack: float = 0.2) -> str:
    if len(distances) < 2:
        return "inconclusive"
    nonincreasing = all(distances[i + 1] <= (1.0 + slack) * distances[i]
                        for i in range(len(distances) - 1))
    halved = distances[-1] < distances[0] / 2.0
    return "cauchy-consistent" if (nonincreasing and halved) else "inconclusive"


def ladder(base_config: SimulationConfig, axis: str, levels: Sequence[int],
           reference: bool = False, num_projections: int = 64,
           w1_seed: int = 0) -> LadderReport:
    """Terminal-law distances across refinement levels of one axis.

    axis "n" varies the mollification level, "N" the particle count, "h" the
    step count (levels are step counts, increasing = finer).  All runs share
    the base seed, so particle-count levels use common random numbers (stream
    prefixes) and mollification levels use identical noise.  Without a
    reference, distances join consecutive levels; with reference=True the
    largest level is the reference and every other level is compared to it.
    """
    key = _LADDER_AXES.get(axis)
    if key is None:
        raise ConfigError(f"unknown ladder axis {axis!r}; expected one of {sorted(set(_LADDER_AXES.values()))}")
    levels = [int(v) for v in levels]
    if len(levels) < 2:
        raise ConfigError("ladder needs at least 2 levels")
    if any(levels[i + 1] <= levels[i] for i in range(len(levels) - 1)):
        raise ConfigError(f"ladder levels must be strictly increasing, got {levels}")

    def configured(level: int) -> SimulationConfig:
        if key == "n":
            return replace(base_config, mollify_n=level)
        if key == "N":
            return replace(base_config, N=level)
        return replace(base_config, steps=level)

    terminal = [simulate(configured(v)).terminal_atoms for v in levels]
    if reference:
        ref = terminal[-1]
        distances = [sliced_w1(term, ref, num_projections, w1_seed) for term in terminal[:-1]]
        report_levels = levels[:-1]
        ref_level = levels[-1]
    else:
        distances = [sliced_w1(terminal[i], terminal[i + 1], num_projections, w1_seed)
                     for i in range(len(terminal) - 1)]
        report_levels = levels
        ref_level = None
    return LadderReport(axis=key, levels=report_levels, distances=distances,
                        verdict=_ladder_verdict(distances), reference=ref_level)


# ---------------------------------------------------------------------------
# Ellipticity scan
# ---------------------------------------------------------------------------


def ellipticity_scan(cs, num_points: int = 10_000, box_radius: float = 10.0,
                     seed: int = 0) -> float:
    """Worst sampled margin min_eig(sigma) - nu; negative means a violation."""
    if num_points < 1:
        raise DomainError("num_points must be >= 1")
    d = cs.d
    gen = rng.stream(seed, rng.TAG_VALIDATE, subkey=7)
    t = gen.uniform(0.0, box_radius, size=num_points)
    z = gen.uniform(-box_radius, box_radius, size=(num_points, 2 * d))
    zeta = gen.uniform(-box_radius, box_radius, size=(num_points, 2 * d))
    sig = np.broadcast_to(np.asarray(cs.sigma(t, z, zeta), dtype=float),
                          (num_points, d, d))
    sym = (sig + np.swapaxes(sig, -2, -1)) / 2.0
    min_eig = np.linalg.eigvalsh(sym)[..., 0]
    return float(np.min(min_eig) - cs.ellipticity_nu)


# ---------------------------------------------------------------------------
# Independence of Wiener increments from the past
# ---------------------------------------------------------------------------


def _clip(v: np.ndarray) -> np.ndarray:
    return np.clip(v, -1.0, 1.0)


# f sees (z_at_times, w_at_times): lists over the k history times of
# (N, 2d) states and (N, d) Wiener values; returns (N,) with |f| <= 1.
F_CATALOG = {
    "clip_y_first": lambda zs, ws: _clip(zs[0][:, zs[0].shape[1] // 2]),
    "clip_y_last": lambda zs, ws: _clip(zs[-1][:, zs[-1].shape[1] // 2]),
    "clip_w_first": lambda zs, ws: _clip(ws[0][:, 0]),
    "clip_w_last": lambda zs, ws: _clip(ws[-1][:, 0]),
    "clip_y_sum": lambda zs, ws: _clip(sum(z[:, z.shape[1] // 2] for z in zs)),
    "cos_y_last": lambda zs, ws: np.cos(zs[-1][:, zs[-1].shape[1] // 2]),
    "cos_w_sum": lambda zs, ws: np.cos(sum(w[:, 0] for w in ws)),
    "clip_w_span": lambda zs, ws: _clip(ws[-1][:, 0] - ws[0][:, 0]),
    "cos_2y_first": lambda zs, ws: np.cos(2.0 * zs[0][:, zs[0].shape[1] // 2]),
    "clip_xy_last": lambda zs, ws: _clip(zs[-1][:, 0] + zs[-1][:, zs[-1].shape[1] // 2]),
    "const_half": lambda zs, ws: np.full(zs[0].shape[0], 0.5),
}

# g sees the increment W_{s_{k+1}} - W_{s_k}, shape (N, d); returns (N,).
G_CATALOG = {
    "clip_dw": lambda dw: _clip(dw[:, 0]),
    "cos_dw": lambda dw: np.cos(dw[:, 0]),
    "clip_2dw": lambda dw: _clip(2.0 * dw[:, 0]),
    "cos_3dw": lambda dw: np.cos(3.0 * dw[:, 0]),
    "const_half": lambda dw: np.full(dw.shape[0], 0.5),
}

# The ten catalog pairs the acceptance battery runs.
INDEPENDENCE_PAIRS = (
    ("clip_y_first", "clip_dw"),
    ("clip_y_last", "cos_dw"),
    ("clip_w_first", "clip_dw"),
    ("clip_w_last", "cos_dw"),
    ("clip_y_sum", "clip_2dw"),
    ("cos_y_last", "clip_dw"),
    ("cos_w_sum", "cos_3dw"),
    ("clip_w_span", "clip_dw"),
    ("cos_2y_first", "cos_dw"),
    ("clip_xy_last", "clip_2dw"),
)


@dataclass
class IndependenceReport:
    times: list
    f_id: str
    g_id: str
    e_fg: float
    e_f: float
    e_g: float
    covariance: float
    statistic: float
    passed: bool
    num_samples: int
    mollify_level: int

    def to_dict(self) -> dict:
        return {
            "times": self.times, "f_id": self.f_id, "g_id": self.g_id,
            "e_fg": self.e_fg, "e_f": self.e_f, "e_g": self.e_g,
            "covariance": self.covariance, "statistic": self.statistic,
            "passed": bool(self.passed), "num_samples": self.num_samples,
            "mollify_level": self.mollify_level,
        }


def wiener_paths(store: TrajectoryStore) -> np.ndarray:
    """Cumulative Wiener values on the snapshot grid, shape (S, N, d)."""
    if store.increments is None:
        raise ConfigError("increments absent: rerun with increments retained")
    cum = np.concatenate(
        [np.zeros((1,) + store.increments.shape[1:]), np.cumsum(store.increments, axis=0)]
    )
    idx = np.asarray(store.snapshot_steps, dtype=int)
    return cum[idx]


def independence_test(store: TrajectoryStore, times: Sequence[float], f_id: str,
                      g_id: str, threshold: float = 3.0) -> IndependenceReport:
    """Factorization check E[f g] = E[f] E[g] across particles.

    f reads the path and Wiener values at times[:-1]; g reads the Wiener
    increment over (times[-2], times[-1]].  Each particle path is one sample;
    the studentized sample covariance is compared to the threshold.
    """
    times = [float(s) for s in times]
    if len(times) < 2 or any(times[i + 1] <= times[i] for i in range(len(times) - 1)):
        raise ConfigError(f"need strictly increasing times, got {times}")
    if f_id not in F_CATALOG:
        raise ConfigError(f"unknown f_id {f_id!r}; catalog: {sorted(F_CATALOG)}")
    if g_id not in G_CATALOG:
        raise ConfigError(f"unknown g_id {g_id!r}; catalog: {sorted(G_CATALOG)}")
    w = wiener_paths(store)
    snap_idx = [store.snapshot_index_at(s) for s in times]
    zs = [store.snapshots[i] for i in snap_idx[:-1]]
    ws = [w[i] for i in snap_idx[:-1]]
    dw = w[snap_idx[-1]] - w[snap_idx[-2]]
    f = np.asarray(F_CATALOG[f_id](zs, ws), dtype=float)
    g = np.asarray(G_CATALOG[g_id](dw), dtype=float)
    n = f.shape[0]
    e_f, e_g, e_fg = float(np.mean(f)), float(np.mean(g)), float(np.mean(f * g))
    prod = (f - np.mean(f)) * (g - np.mean(g))
    cov = float(np.mean(prod))
    se = float(np.std(prod, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    stat = cov / se if se > 0 else 0.0
    return IndependenceReport(
        times=times, f_id=f_id, g_id=g_id, e_fg=e_fg, e_f=e_f, e_g=e_g,
        covariance=cov, statistic=float(stat), passed=bool(abs(stat) <= threshold),
        num_samples=n, mollify_level=store.config.mollify_n,
    )


def run_independence_battery(store: TrajectoryStore, times: Sequence[float],
                             pairs: Optional[Sequence] = None,
                             threshold: float = 3.0) -> list:
    """Run the catalog (f, g) pairs; returns one IndependenceReport per pair."""
    chosen = INDEPENDENCE_PAIRS if pairs is None else pairs
    return [independence_test(store, times, f_id, g_id, threshold) for f_id, g_id in chosen]


# ---------------------------------------------------------------------------
# Structural degeneracy
# ---------------------------------------------------------------------------


def degeneracy_check(store: TrajectoryStore, cs=None, envelope_tol: float = 1e-9) -> dict:
    """Drift replay of the position block plus the bounded-drift envelope.

    Replay recomputes B0 from each stored snapshot and rebuilds the position
    path; it must match the stored one bit for bit (the position update reads
    no randomness).  The envelope asserts |x(t) - x(0)| <= C t + tol.
    Requires snapshot_stride == 1.
    """
    cfg = store.config
    if cfg.snapshot_stride != 1:
        raise ConfigError("degeneracy replay needs snapshot_stride == 1")
    if cs is None:
        cs = cfg.coefficient_set()
    d = cfg.d
    h = cfg.h
    replay_exact = True
    max_diff = 0.0
    for i in range(len(store.snapshots) - 1):
        atoms = store.snapshots[i]
        t = store.snapshot_times[i]
        measure = store.indep_snapshots[i] if store.indep_snapshots is not None else None
        b0, _, _ = mf_batch(cs, t, atoms, measure=measure, subsample=cfg.subsample,
                            seed=cfg.seed, step=store.snapshot_steps[i], workers=cfg.workers)
        x_next = atoms[:, :d] + b0 * h
        stored = store.snapshots[i + 1][:, :d]
        if not np.array_equal(x_next, stored):
            replay_exact = False
            max_diff = max(max_diff, float(np.max(np.abs(x_next - stored))))

    x0 = store.snapshots[0][:, :d]
    envelope_margin = np.inf
    for atoms, t in zip(store.snapshots, store.snapshot_times):
        drift_dist = np.linalg.norm(atoms[:, :d] - x0, axis=1)
        envelope_margin = min(envelope_margin,
                              float(np.min(cs.bound_C * t + envelope_tol - drift_dist)))
    return {
        "replay_exact": replay_exact,
        "max_replay_diff": max_diff,
        "envelope_margin": envelope_margin,
        "envelope_ok": bool(envelope_margin >= 0.0),
    }
