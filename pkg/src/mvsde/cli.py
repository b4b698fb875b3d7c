"""Experiment runner.

Subcommands: simulate, validate, ladder, diagnose, independence.  Each reads
one config file, applies flag overrides, writes report.json plus CSV tables
(and PNG figures unless --no-figures) under the output directory, and prints
a single ``summary:`` line with the headline result.  All randomness flows
from the config seed; nothing is read from the environment.  Exit status is 0
on success and nonzero with a one-line ``error: ...`` message otherwise.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import diagnostics, persistence, reporting
from .coefficients import validate_hypotheses
from .config import RunConfig, parse_config_file, resolve_run_config
from .errors import MVSDEError
from .integrator import simulate

SUBCOMMANDS = ("simulate", "validate", "ladder", "diagnose", "independence")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvsde",
        description="Interacting-particle runs and verification reports for "
                    "degenerate mean-field SDE systems.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", required=True, help="sectioned key=value config file")
        p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--workers", type=int, default=None, help="override run.workers")
        p.add_argument("--retain-increments", action="store_true",
                       help="retain per-step Wiener increments in the store")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return parser


def _overrides(args) -> dict:
    over = {}
    if args.seed is not None:
        over[("run", "seed")] = args.seed
    if args.workers is not None:
        over[("run", "workers")] = args.workers
    if args.retain_increments:
        over[("run", "retain_increments")] = True
    if args.out is not None:
        over[("output", "directory")] = args.out
    if args.no_figures:
        over[("output", "figures")] = False
    return over


def _emit(rc: RunConfig, results: dict) -> Path:
    report = reporting.build_report(rc.subcommand, rc.echo(), results)
    return reporting.write_report(Path(rc.outdir) / "report.json", report)


def _run_simulate(rc: RunConfig) -> str:
    store = simulate(rc.sim)
    run_dir = Path(rc.outdir)
    manifest = persistence.save_store(store, run_dir)
    _emit(rc, {
        "snapshots": len(store.snapshots),
        "block_count": len(manifest["blocks"]),
    })
    return f"store={run_dir} snapshots={len(store.snapshots)}"


def _run_validate(rc: RunConfig) -> str:
    cs = rc.sim.coefficient_set()
    report = validate_hypotheses(cs, **rc.validate)
    payload = report.to_dict()
    payload["mollify_level"] = rc.sim.mollify_n
    results = {"hypotheses": payload}
    if rc.sim.mollify_n >= 1:
        from .mollify import lipschitz_probe
        results["lipschitz_probe"] = {
            axis: lipschitz_probe(cs, axis, num_pairs=256, seed=rc.validate["seed"])
            for axis in ("t", "x", "y", "xi", "eta")
        }
    _emit(rc, results)
    reporting.write_csv(
        Path(rc.outdir) / "hypotheses.csv",
        ["condition", "passed", "margin", "observational"],
        [[c.condition, c.passed, "" if c.margin is None else repr(c.margin), c.observational]
         for c in report.conditions],
    )
    if rc.figures:
        from . import figures
        figures.hypothesis_figure(payload, Path(rc.outdir) / "figures" / "hypotheses.png")
    return f"system={cs.name} all_passed={report.all_passed}"


def _run_ladder(rc: RunConfig) -> str:
    report = diagnostics.ladder(
        rc.sim, rc.ladder["axis"], rc.ladder["levels"],
        reference=rc.ladder["reference"],
        num_projections=rc.ladder["projections"],
        w1_seed=rc.ladder["w1_seed"],
    )
    _emit(rc, {"ladder": report.to_dict()})
    reporting.write_csv(
        Path(rc.outdir) / "ladder.csv",
        ["index", "level", "distance"],
        [[i, lv, repr(float(dist))]
         for i, (lv, dist) in enumerate(zip(report.levels, report.distances))],
    )
    if rc.figures:
        from . import figures
        figures.ladder_figure(report.to_dict(), Path(rc.outdir) / "figures" / "ladder.png")
    dists = " ".join(f"{d:.3g}" for d in report.distances)
    return f"axis={report.axis} verdict={report.verdict} distances=[{dists}]"


def _run_diagnose(rc: RunConfig) -> str:
    store = simulate(rc.sim)
    block = rc.diagnose["block"]
    sup = diagnostics.moment_sup4(store, block=block)
    inc = diagnostics.increment_moment4(store, rc.diagnose["h_values"], block=block)
    cs = rc.sim.coefficient_set()
    scan = diagnostics.ellipticity_scan(cs, num_points=rc.diagnose["scan_points"],
                                        seed=rc.sim.seed)
    results = {
        "sup_moment": sup.to_dict(),
        "increment_moment": inc.to_dict(),
        "ellipticity_margin": scan,
    }
    if rc.diagnose["degeneracy"] and rc.sim.snapshot_stride == 1:
        results["degeneracy"] = diagnostics.degeneracy_check(store, cs)
    _emit(rc, results)
    reporting.write_csv(
        Path(rc.outdir) / "moments.csv",
        ["h", "estimate", "num_pairs"],
        [[repr(h), repr(v), k] for h, v, k in inc.table],
    )
    if rc.figures:
        from . import figures
        figures.moment_figure(inc.to_dict(), Path(rc.outdir) / "figures" / "moments.png")
    slope = "nan" if inc.slope is None else f"{inc.slope:.4f}"
    return f"slope={slope} sup4={sup.sup_moment:.6g} ellipticity_margin={scan:.3g}"


def _run_independence(rc: RunConfig) -> str:
    sim = replace(rc.sim, retain_increments=True)
    store = simulate(sim)
    reports = diagnostics.run_independence_battery(
        store, rc.independence["times"], threshold=rc.independence["threshold"])
    payload = [r.to_dict() for r in reports]
    passed = sum(r.passed for r in reports)
    _emit(rc, {"independence": payload, "passed": passed, "total": len(reports)})
    reporting.write_csv(
        Path(rc.outdir) / "independence.csv",
        ["f_id", "g_id", "e_fg", "e_f_times_e_g", "statistic", "passed"],
        [[r.f_id, r.g_id, repr(r.e_fg), repr(r.e_f * r.e_g), repr(r.statistic), r.passed]
         for r in reports],
    )
    if rc.figures:
        from . import figures
        figures.independence_figure(payload, Path(rc.outdir) / "figures" / "independence.png")
    return f"passed={passed}/{len(reports)}"


_HANDLERS = {
    "simulate": _run_simulate,
    "validate": _run_validate,
    "ladder": _run_ladder,
    "diagnose": _run_diagnose,
    "independence": _run_independence,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        file_values = parse_config_file(args.config)
        rc = resolve_run_config(args.subcommand, file_values, _overrides(args))
        Path(rc.outdir).mkdir(parents=True, exist_ok=True)
        headline = _HANDLERS[args.subcommand](rc)
    except MVSDEError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"summary: subcommand={args.subcommand} {headline}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
