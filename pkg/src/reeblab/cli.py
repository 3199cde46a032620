"""The ``lab`` command.

``lab <census|entropy|surgery|suspend|verify|demo-torus> --config PATH [--set key=value]...``

Data artifacts (JSON lines and CSV) go to the configured output directory
through atomic renames.  ``manifest.json`` gets one entry per run and
``report.md`` is regenerated from it.  Exit status: 0 on success, 1 when a
check fails or a module raises, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .acceptance import Lab
from .config import load_config, worker_count
from .errors import ConfigError, LabError
from .io import atomic_write, dumps, plain, sha256
from .pipeline import RUNNERS, verify_run

SUBCOMMANDS = ["census", "entropy", "surgery", "suspend", "verify", "demo-torus"]
MANIFEST = "manifest.json"
REPORT = "report.md"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def versions() -> dict[str, str]:
    return {"reeblab": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def read_manifest(out_dir: Path) -> dict:
    path = out_dir / MANIFEST
    if not path.exists():
        return {"runs": []}
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError:
        return {"runs": []}


def previous_hashes(manifest: dict, config_hash: str) -> dict[str, str] | None:
    for run in reversed(manifest.get("runs", [])):
        if run.get("subcommand") == "verify" and run.get("config_hash") == config_hash and run.get("exit_code") != 2:
            return {o["file"]: o["sha256"] for o in run.get("outputs", [])}
    return None


def emit_report(manifest: dict) -> str:
    """Readable summary of every run in a manifest; empty for an empty manifest."""
    runs = manifest.get("runs", [])
    if not runs:
        return ""
    lines = ["# Lab report", ""]
    for i, run in enumerate(runs, 1):
        lines.append(f"## Run {i}: {run['subcommand']} (exit {run['exit_code']})")
        lines.append("")
        lines.append(f"- config: `{run['config_hash'][:16]}`")
        lines.append(f"- started {run['started']}, finished {run['finished']}")
        summary = run.get("summary", {})
        ent = summary.get("entropy")
        if ent:
            verdict = "holds" if ent.get("growth_vs_entropy") else "fails"
            lines.append(
                f"- growth against entropy {verdict}: census rate a = {ent['a_fit']:.4f}, "
                f"Bowen estimate h = {ent['h_estimate']:.4f}"
            )
        for key in ("census", "surgery", "suspension", "torus"):
            if key in summary:
                lines.append(f"- {key}: {dumps(summary[key])}")
        for line in summary.get("checks", []):
            lines.append(f"- {line}")
        for name, ok in run.get("checks", {}).items():
            if not name[:2].isdigit():
                lines.append(f"- check {name}: {ok}")
        if run.get("error"):
            lines.append(f"- error: {dumps(run['error'])}")
        lines.append("- outputs: " + ", ".join(o["file"] for o in run.get("outputs", [])))
        lines.append("")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description="Surgered geodesic flow experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    return p


def _error(record: dict, code: int) -> int:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config, args.overrides)
        worker_count()
    except ConfigError as exc:
        return _error(exc.record(), 2)

    out_dir = cfg.output_dir
    manifest = read_manifest(out_dir)
    started = _now()
    lab = Lab(cfg)
    error = None
    try:
        if args.subcommand == "verify":
            result = verify_run(lab, previous_hashes(manifest, cfg.hash()))
        else:
            result = RUNNERS[args.subcommand](lab)
    except LabError as exc:
        error = exc.record()
        result = None

    outputs = []
    if result is not None:
        for name in sorted(result.artifacts):
            data = result.artifacts[name]
            atomic_write(out_dir / name, data)
            outputs.append({"file": name, "bytes": len(data), "sha256": sha256(data)})
        code = 1 if any(v is False for v in result.checks.values()) else 0
    else:
        atomic_write(out_dir / "error.json", (dumps(error) + "\n").encode())
        code = 1
    run = {
        "subcommand": args.subcommand,
        "config_hash": cfg.hash(),
        "versions": versions(),
        "started": started,
        "finished": _now(),
        "outputs": outputs,
        "checks": result.checks if result else {},
        "summary": result.summary if result else {},
        "error": error,
        "exit_code": code,
    }
    manifest.setdefault("runs", []).append(run)
    atomic_write(out_dir / MANIFEST, (json.dumps(plain(manifest), indent=2, sort_keys=True) + "\n").encode())
    atomic_write(out_dir / REPORT, emit_report(manifest).encode())
    if result is not None:
        for line in result.summary.get("checks", []):
            print(line)
    if error:
        return _error(error, 1)
    return code


if __name__ == "__main__":
    sys.exit(main())
