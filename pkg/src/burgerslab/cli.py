"""Command-line runner: ``burgerslab run|list|validate``.

An experiment file is YAML with ``name``, ``scenario``, ``parameters``,
``seed`` and ``output_dir``.  A run writes one CSV per table, a JSON
summary and a separate manifest (the only file carrying timestamps).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from ._accel import BACKEND
from .errors import BurgersError, ConfigInvalid, IOFailure
from .scenarios import CATALOG, RECIPES, Result, resolve_parameters

log = logging.getLogger("burgerslab")

EXIT_OK = 0
EXIT_ASSERTION = 2
EXIT_TOLERANCE = 3
EXIT_CONFIG = 64
EXIT_IO = 74

OUTPUT_DIR_ENV = "BURGERSLAB_OUTPUT_DIR"
_FIELDS = ("name", "scenario", "parameters", "seed", "output_dir")


@dataclass
class ExperimentSpec:
    name: str
    scenario: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, data) -> "ExperimentSpec":
        if not isinstance(data, dict) or not data:
            raise ConfigInvalid("experiment spec is empty")
        unknown = set(data) - set(_FIELDS)
        if unknown:
            raise ConfigInvalid(f"unknown spec fields {sorted(unknown)}")
        for key in ("name", "scenario"):
            if not isinstance(data.get(key), str) or not data[key]:
                raise ConfigInvalid(f"spec needs a non-empty string {key!r}")
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigInvalid("seed must be a non-negative integer")
        out = data.get("output_dir", "results")
        if not isinstance(out, str) or not out:
            raise ConfigInvalid("output_dir must be a non-empty string")
        params = data.get("parameters") or {}
        resolve_parameters(data["scenario"], params)
        return cls(data["name"], data["scenario"], dict(params), seed, out)

    def to_dict(self) -> dict:
        return {"name": self.name, "scenario": self.scenario, "parameters": self.parameters,
                "seed": self.seed, "output_dir": self.output_dir}

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentSpec":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigInvalid(f"spec is not valid YAML: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise IOFailure(f"cannot read {path}: {exc}") from None
        return cls.from_yaml(text)

    def resolved(self) -> dict:
        return resolve_parameters(self.scenario, self.parameters)


def list_scenarios() -> dict:
    """Catalog entries: section, summary, budget and parameter schema."""
    out = {}
    for name, entry in CATALOG.items():
        out[name] = {
            "section": entry["section"],
            "summary": entry["summary"],
            "budget_seconds": entry["budget_seconds"],
            "parameters": {k: {"type": v["type"], "default": v["default"], "doc": v["doc"]}
                           for k, v in entry["parameters"].items()},
        }
    return out


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def write_artifacts(out_dir: Path, spec: ExperimentSpec, params: dict, result: Result,
                    status: int, wall: float, jobs: int) -> list[str]:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, tab in result.tables.items():
            path = out_dir / f"{name}.csv"
            path.write_text(table_csv(tab.header, tab.rows))
            written.append(path.name)
        summary = {"name": spec.name, "scenario": spec.scenario, "exit_status": status,
                   "failures": [{"kind": k, "message": m} for k, m in result.failures],
                   "results": _jsonable(result.summary), "tables": written}
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        manifest = {"name": spec.name, "scenario": spec.scenario, "parameters": params,
                    "seed": spec.seed, "version": __version__, "backend": BACKEND, "jobs": jobs,
                    "wall_time_seconds": wall,
                    "started": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write to {out_dir}: {exc}") from None
    return written


def run(spec: ExperimentSpec, jobs: int = 1, output_dir: str | None = None) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    params = spec.resolved()
    out_dir = Path(output_dir or os.environ.get(OUTPUT_DIR_ENV) or spec.output_dir)
    t0 = time.perf_counter()
    result = RECIPES[spec.scenario](params, spec.seed, jobs)
    wall = time.perf_counter() - t0
    status = EXIT_OK
    if any(k == "tolerance" for k, _ in result.failures):
        status = EXIT_TOLERANCE
    if any(k == "assertion" for k, _ in result.failures):
        status = EXIT_ASSERTION
    for kind, msg in result.failures:
        log.warning("%s failure: %s", kind, msg)
    write_artifacts(out_dir, spec, params, result, status, wall, jobs)
    log.info("%s finished in %.1f s with status %d", spec.name, wall, status)
    return status


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="burgerslab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment file")
    r.add_argument("spec")
    r.add_argument("--seed", type=int, default=None, help="override the seed in the experiment file")
    r.add_argument("--jobs", type=int, default=1, help="worker cap (results do not depend on it)")
    r.add_argument("--output-dir", default=None)
    sub.add_parser("list", help="list scenarios and their parameters")
    v = sub.add_parser("validate", help="check an experiment file")
    v.add_argument("spec")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "list":
            for name, entry in list_scenarios().items():
                print(f"{name} → {entry['section']}  {entry['summary']}")
                for k, v in entry["parameters"].items():
                    print(f"    {k} ({v['type']}, default {v['default']!r}): {v['doc']}")
            return EXIT_OK
        spec = ExperimentSpec.load(args.spec)
        if args.command == "validate":
            print(json.dumps(spec.resolved(), indent=2))
            return EXIT_OK
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigInvalid("seed must be non-negative")
            spec.seed = args.seed
        if args.jobs < 1:
            raise ConfigInvalid("--jobs must be at least 1")
        return run(spec, jobs=args.jobs, output_dir=args.output_dir)
    except IOFailure as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    except ConfigInvalid as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except BurgersError as exc:
        # a numerical routine gave up; report it as a tolerance failure
        print(exc, file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
