"""Run configuration: sectioned key=value files plus flag overrides.

The format is deliberately plain so configs diff well:

    [run]
    system = rough
    N = 10000
    T = 1.0
    steps = 256
    seed = 42

    [mollify]
    n = 4

Unknown sections or keys are rejected with the offending name and line
number.  Flags override file values; every unset key falls back to the
documented default and the fully resolved configuration is echoed into
reports and manifests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .integrator import InitialLawSpec, SimulationConfig
from .mollify import DEFAULT_QMC_NODES, QMC_NODE_SEED, QuadratureSpec

# (type, default); default None with required=True means the key must be set.
_BOOL = "bool"
_INT = "int"
_FLOAT = "float"
_STR = "str"
_INT_LIST = "int_list"
_FLOAT_LIST = "float_list"

KEY_TABLE = {
    ("run", "system"): (_STR, None),
    ("run", "d"): (_INT, None),  # default: the system name's -d suffix, else 1
    ("run", "N"): (_INT, None),
    ("run", "T"): (_FLOAT, None),
    ("run", "steps"): (_INT, None),
    ("run", "seed"): (_INT, None),
    ("run", "snapshot_stride"): (_INT, 1),
    ("run", "retain_increments"): (_BOOL, False),
    ("run", "independent_ensemble"): (_BOOL, False),
    ("run", "workers"): (_INT, 1),
    ("run", "initial"): (_STR, "gaussian"),
    ("run", "initial_center"): (_FLOAT_LIST, [0.0]),
    ("run", "initial_scale"): (_FLOAT, 1.0),
    ("run", "initial_radius"): (_FLOAT, 1.0),
    ("mollify", "n"): (_INT, 0),
    ("mollify", "mode"): (_STR, "auto"),
    ("mollify", "nodes"): (_INT, 10),
    ("mollify", "qmc_nodes"): (_INT, DEFAULT_QMC_NODES),
    ("meanfield", "subsample"): (_STR, "full"),
    ("validate", "num_points"): (_INT, 10_000),
    ("validate", "box_radius"): (_FLOAT, 10.0),
    ("validate", "seed"): (_INT, 0),
    ("ladder", "axis"): (_STR, "n"),
    ("ladder", "levels"): (_INT_LIST, [2, 4, 8]),
    ("ladder", "reference"): (_BOOL, False),
    ("ladder", "projections"): (_INT, 64),
    ("ladder", "w1_seed"): (_INT, 0),
    ("diagnose", "h_values"): (_FLOAT_LIST, [0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625]),
    ("diagnose", "block"): (_STR, "z"),
    ("diagnose", "scan_points"): (_INT, 10_000),
    ("diagnose", "degeneracy"): (_BOOL, True),
    ("independence", "times"): (_FLOAT_LIST, [0.25, 0.5, 0.75]),
    ("independence", "threshold"): (_FLOAT, 3.0),
    ("output", "directory"): (_STR, "out"),
    ("output", "figures"): (_BOOL, True),
}

_REQUIRED = (("run", "system"), ("run", "N"), ("run", "T"), ("run", "steps"), ("run", "seed"))
_SECTIONS = sorted({s for s, _ in KEY_TABLE})


def _coerce(kind: str, raw: str, where: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        raw = raw[1:-1]
    try:
        if kind == _STR:
            return raw
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _BOOL:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        parts = [p for p in raw.replace(",", " ").split() if p]
        if kind == _INT_LIST:
            return [int(p) for p in parts]
        if kind == _FLOAT_LIST:
            return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"bad {kind} value {raw!r} for {where}") from None
    raise ConfigError(f"unhandled kind {kind}")


def parse_config_file(path) -> dict:
    """Read a config file into {(section, key): value}, validating every key."""
    target = Path(path)
    if not target.exists():
        raise ConfigError(f"config file not found: {target}")
    values = {}
    section = None
    for lineno, line in enumerate(target.read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith(("#", ";")):
            continue
        if text.startswith("[") and text.endswith("]"):
            section = text[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}] at line {lineno}")
            continue
        if "=" not in text:
            raise ConfigError(f"expected key = value at line {lineno}: {text!r}")
        if section is None:
            raise ConfigError(f"key outside any section at line {lineno}")
        key, _, raw = text.partition("=")
        key = key.strip()
        spot = (section, key)
        if spot not in KEY_TABLE:
            raise ConfigError(f"unknown key '{section}.{key}' at line {lineno}")
        if spot in values:
            raise ConfigError(f"duplicate key '{section}.{key}' at line {lineno}")
        kind, _default = KEY_TABLE[spot]
        values[spot] = _coerce(kind, raw, f"'{section}.{key}' at line {lineno}")
    return values


def _suffix_dim(system: str) -> int:
    if "-d" in system:
        tail = system.rpartition("-d")[2]
        if tail.isdigit():
            return int(tail)
    return 1


@dataclass
class RunConfig:
    """Fully resolved configuration for one CLI invocation."""

    subcommand: str
    sim: SimulationConfig
    validate: dict
    ladder: dict
    diagnose: dict
    independence: dict
    outdir: str
    figures: bool
    resolved: dict = field(default_factory=dict)  # full echo, defaults included

    def echo(self) -> dict:
        return dict(self.resolved)


def resolve_run_config(subcommand: str, file_values: dict, overrides: dict | None = None) -> RunConfig:
    """Merge file values, flag overrides, and defaults into a RunConfig."""
    overrides = overrides or {}
    merged = {}
    for spot, (kind, default) in KEY_TABLE.items():
        if spot in overrides:
            merged[spot] = overrides[spot]
        elif spot in file_values:
            merged[spot] = file_values[spot]
        else:
            merged[spot] = default
    for spot in _REQUIRED:
        if merged[spot] is None:
            raise ConfigError(f"missing required key '{spot[0]}.{spot[1]}'")

    system = merged[("run", "system")]
    d = merged[("run", "d")]
    if d is None:
        d = _suffix_dim(system)

    kind = merged[("run", "initial")]
    center = merged[("run", "initial_center")]
    if kind == "point":
        initial = InitialLawSpec.point(center)
    elif kind == "gaussian":
        initial = InitialLawSpec.gaussian(center, merged[("run", "initial_scale")])
    elif kind == "ball":
        initial = InitialLawSpec.uniform_ball(center, merged[("run", "initial_radius")])
    else:
        raise ConfigError(f"unknown initial law {kind!r} (point, gaussian, ball)")

    sub_raw = merged[("meanfield", "subsample")]
    if isinstance(sub_raw, str) and sub_raw.lower() == "full":
        subsample = None
    else:
        try:
            subsample = int(sub_raw)
        except (TypeError, ValueError):
            raise ConfigError(f"meanfield.subsample must be an integer or 'full', got {sub_raw!r}") from None
        if subsample == 0:
            raise ConfigError("meanfield.subsample must be >= 1 or 'full'")

    quadrature = QuadratureSpec(
        mode=merged[("mollify", "mode")],
        points_per_axis=merged[("mollify", "nodes")],
        total_nodes=merged[("mollify", "qmc_nodes")],
        node_seed=QMC_NODE_SEED,
    )
    sim = SimulationConfig(
        system=system,
        N=merged[("run", "N")],
        T=merged[("run", "T")],
        steps=merged[("run", "steps")],
        seed=merged[("run", "seed")],
        d=d,
        mollify_n=merged[("mollify", "n")],
        initial=initial,
        subsample=subsample,
        snapshot_stride=merged[("run", "snapshot_stride")],
        retain_increments=merged[("run", "retain_increments")],
        independent_ensemble=merged[("run", "independent_ensemble")],
        workers=merged[("run", "workers")],
        quadrature=quadrature,
    )

    resolved = {f"{s}.{k}": merged[(s, k)] for (s, k) in sorted(KEY_TABLE)}
    resolved["run.d"] = d
    return RunConfig(
        subcommand=subcommand,
        sim=sim,
        validate={
            "num_points": merged[("validate", "num_points")],
            "box_radius": merged[("validate", "box_radius")],
            "seed": merged[("validate", "seed")],
        },
        ladder={
            "axis": merged[("ladder", "axis")],
            "levels": merged[("ladder", "levels")],
            "reference": merged[("ladder", "reference")],
            "projections": merged[("ladder", "projections")],
            "w1_seed": merged[("ladder", "w1_seed")],
        },
        diagnose={
            "h_values": merged[("diagnose", "h_values")],
            "block": merged[("diagnose", "block")],
            "scan_points": merged[("diagnose", "scan_points")],
            "degeneracy": merged[("diagnose", "degeneracy")],
        },
        independence={
            "times": merged[("independence", "times")],
            "threshold": merged[("independence", "threshold")],
        },
        outdir=merged[("output", "directory")],
        figures=merged[("output", "figures")],
        resolved=resolved,
    )
