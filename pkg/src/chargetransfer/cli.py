"""Command-line front end: ``chargetransfer <command> --scenario file.json [...]``.

Exit codes: 0 success, 1 configuration error, 2 solver error, 3 numerical
abort (non-finite state), 4 soft warnings (stabilization or convergence).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .model import ScenarioConfig, ScenarioError, load_scenario, save_report, scenario_from_dict, to_jsonable
from .propagate import NumericalAbort
from .runner import COMMANDS

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ABORT, EXIT_SOFT = 0, 1, 2, 3, 4

log = logging.getLogger("chargetransfer")


@dataclass
class RunManifest:
    command: str
    scenario: str
    config_hash: str
    version: str
    seed: int
    exit_code: int = EXIT_OK
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    error: str | None = None


def config_hash(cfg: ScenarioConfig) -> str:
    canonical = json.dumps(to_jsonable(cfg.to_dict()), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_csv(path: Path, header: list, rows: list) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=",", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(float(v)) if not isinstance(v, str) else v for v in row])
    return path


def _override_dt(cfg: ScenarioConfig, dt: float) -> ScenarioConfig:
    doc = cfg.to_dict()
    doc["time"]["dt"] = dt
    return scenario_from_dict(doc)


def run_one(command: str, scenario: str, out: str, seed: int | None, dt_override: float | None) -> RunManifest:
    """Run one scenario end to end and write its outputs; never raises."""
    outdir = Path(out)
    manifest = RunManifest(command, str(scenario), "", __version__, 0)
    start = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cfg = load_scenario(scenario)
            if dt_override is not None:
                cfg = _override_dt(cfg, dt_override)
        manifest.warnings += [str(w.message) for w in caught]
        manifest.config_hash = config_hash(cfg)
        manifest.seed = cfg.seed if seed is None else int(seed)
        manifest.timings["load"] = time.perf_counter() - start
    except (ScenarioError, OSError) as exc:
        manifest.exit_code, manifest.error = EXIT_CONFIG, str(exc)
        return _finish(manifest, outdir, Path(scenario).stem)
    stem = f"{cfg.name}_{command.replace('-', '_')}"
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = COMMANDS[command](cfg, manifest.seed)
        manifest.warnings += [str(w.message) for w in caught] + list(result.warnings)
        manifest.timings.update(result.timings)
        report_path = save_report({"command": command, "scenario": cfg.name, "report": result.report},
                                  outdir / f"{stem}.json")
        manifest.outputs.append(report_path.name)
        for name, table in result.tables.items():
            p = write_csv(outdir / f"{stem}_{name}.csv", table["header"], table["rows"])
            manifest.outputs.append(p.name)
        if result.warnings:
            manifest.exit_code = EXIT_SOFT
    except NumericalAbort as exc:
        manifest.exit_code, manifest.error = EXIT_ABORT, str(exc)
    except ScenarioError as exc:
        manifest.exit_code, manifest.error = EXIT_CONFIG, str(exc)
    except Exception as exc:  # solver failures of any kind
        manifest.exit_code, manifest.error = EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
    manifest.timings["total"] = time.perf_counter() - start
    return _finish(manifest, outdir, stem)


def _finish(manifest: RunManifest, outdir: Path, stem: str) -> RunManifest:
    path = outdir / f"{stem}_manifest.json"
    manifest.outputs.append(path.name)
    save_report(manifest, path)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", action="append", required=True, metavar="PATH",
                        help="scenario JSON file (repeat for a batch)")
    common.add_argument("--out", default="out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--workers", type=int, default=1, help="worker processes for batches")
    common.add_argument("--dt-override", type=float, default=None, help="replace the scenario time step")
    common.add_argument("--quiet", action="store_true", help="suppress the summary line")
    parser = argparse.ArgumentParser(prog="chargetransfer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} pipeline")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    jobs = [(args.command, s, args.out, args.seed, args.dt_override) for s in args.scenario]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            manifests = list(pool.map(run_one, *zip(*jobs)))
    else:
        manifests = [run_one(*job) for job in jobs]
    for m in manifests:
        if not args.quiet:
            status = "ok" if m.exit_code == 0 else (m.error or "; ".join(m.warnings) or "warning")
            print(f"{m.command} {m.scenario}: exit {m.exit_code} ({status})")
    return max(m.exit_code for m in manifests)


if __name__ == "__main__":
    sys.exit(main())
