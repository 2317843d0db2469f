"""Command-line entry point: regenerate figure data and the comparison table as CSV or JSON.

Settings resolve in three layers: built-in defaults, then an optional JSON
``--config`` file, then command-line flags.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import panels
from .engine import NoSolutionError, NonMonotoneError, SourceParams
from .fock import InvalidParameterError

log = logging.getLogger("photon_mux")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

COMMANDS = ("figure2", "figure3", "figure4", "table1", "sweep", "mc-validate")

DEFAULTS: dict[str, Any] = {
    "nbar": None,
    "eta_d": 0.7,
    "eta_l": 0.8,
    "depth": None,
    "n_max": 5,
    "snr_target": 100.0,
    "rep_rate_hz": 80e6,
    "trials": 1_000_000,
    "seed": 42,
    "output": ".",
    "format": "csv",
    "panel": None,
    "grid": {},
}

GRID_AXES = ("nbar", "eta_d", "eta_l", "depth", "n_max")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="photon-mux",
        description="Temporal loop multiplexing of heralded photon-pair sources.",
        epilog=(
            "Commands: figure2 (panels a-d), figure3, figure4 (panels a-d), table1, "
            "sweep, mc-validate. Environment: PHOTON_MUX_THREADS caps the worker count. "
            "Exit codes: 0 success, 1 invalid arguments, 2 solver or validation failure."
        ),
    )
    p.add_argument("command", nargs="?", choices=COMMANDS, help="what to compute (may come from --config)")
    p.add_argument("--config", type=Path, help="JSON document with any of the settings below")
    p.add_argument("--panel", help="comma-separated panel letters for figure2/figure4 (default: all)")
    p.add_argument("--nbar", type=float,
                   help="mean pairs per pulse; replaces the n-bar grid of figure2/figure4c and "
                        "the fixed n-bar of figure2d/table1 (default grid: 50 log points in [1e-4, 1]; fixed 0.01)")
    p.add_argument("--eta-d", dest="eta_d", type=float, help="detector efficiency (default 0.7)")
    p.add_argument("--eta-l", dest="eta_l", type=float, help="lumped switch+loop efficiency per pass (default 0.8)")
    p.add_argument("--depth", type=int,
                   help="multiplexing depth (defaults: figure2a/b 1,3,5,15; figure2d up to 15; "
                        "figure3 15; figure4 10; table1 8)")
    p.add_argument("--n-max", dest="n_max", type=int, help="photon-number truncation (default 5)")
    p.add_argument("--snr-target", dest="snr_target", type=float, help="fixed SNR operating point (default 100)")
    p.add_argument("--rep-rate-hz", dest="rep_rate_hz", type=float, help="pump repetition rate (default 80e6)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per grid point (default 1000000)")
    p.add_argument("--seed", type=int, help="Monte Carlo seed (default 42)")
    p.add_argument("--grid", action="append", metavar="AXIS=START:STOP:STEPS[:log]",
                   help=f"sweep axis, repeatable; AXIS in {', '.join(GRID_AXES)}")
    p.add_argument("--output", help="output directory (default: current directory)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_axis(spec: str) -> tuple[str, list[float]]:
    """Parse ``AXIS=START:STOP:STEPS[:log]`` into an axis name and its values."""
    try:
        name, rng = spec.split("=", 1)
        parts = rng.split(":")
        if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
            raise ValueError
        start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"malformed grid {spec!r}; expected AXIS=START:STOP:STEPS[:log]") from None
    name = name.strip().replace("-", "_").lower()
    if name not in GRID_AXES:
        raise UsageError(f"unknown grid axis {name!r}")
    if steps < 2:
        raise UsageError(f"grid {spec!r} needs at least 2 steps")
    if len(parts) == 4:
        if start <= 0 or stop <= 0:
            raise UsageError(f"log grid {spec!r} needs positive bounds")
        values = np.geomspace(start, stop, steps)
    else:
        values = np.linspace(start, stop, steps)
    if name in ("depth", "n_max"):
        ints = sorted({int(round(v)) for v in values})
        return name, ints
    return name, [float(v) for v in values]


def resolve_settings(args: argparse.Namespace) -> dict[str, Any]:
    settings = dict(DEFAULTS)
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        doc = dict(doc)
        settings.update(doc.pop("params", {}) or {})
        unknown = set(doc) - set(settings) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        settings.update(doc)
    for key, value in vars(args).items():
        if key in ("config", "verbose", "grid"):
            continue
        if value is not None:
            settings[key] = value
    if args.grid:
        grid = dict(settings.get("grid") or {})
        for spec in args.grid:
            name, values = parse_axis(spec)
            grid[name] = values
        settings["grid"] = grid
    else:
        settings["grid"] = {
            k: (parse_axis(f"{k}={v}")[1] if isinstance(v, str) else list(v))
            for k, v in (settings.get("grid") or {}).items()
        }
    if settings.get("command") not in COMMANDS:
        raise UsageError(f"a command is required: one of {', '.join(COMMANDS)}")
    return settings


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{float(value):.8e}"
    return str(value)


def _json_cell(value: Any) -> Any:
    text = format_cell(value)
    if value is None:
        return None
    if isinstance(value, (float, np.floating)):
        return text if not math.isfinite(value) else float(text)
    if isinstance(value, (int, np.integer)) and not isinstance(value, (bool, np.bool_)):
        return int(value)
    return text


def render(table: panels.Table, fmt: str) -> str:
    if fmt == "json":
        doc = {
            "name": table.name,
            "columns": list(table.columns),
            "rows": [[_json_cell(v) for v in row] for row in table.rows],
        }
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def _panels(settings: dict[str, Any]) -> tuple[str, ...]:
    raw = settings.get("panel")
    if not raw:
        return ("a", "b", "c", "d")
    letters = tuple(s.strip().lower() for s in str(raw).split(",") if s.strip())
    bad = [s for s in letters if s not in "abcd" or len(s) != 1]
    if bad:
        raise UsageError(f"unknown panel(s): {', '.join(bad)}")
    return letters


def compute(settings: dict[str, Any]) -> list[panels.Table]:
    command = settings["command"]
    nbar, depth = settings["nbar"], settings["depth"]
    base = SourceParams(
        nbar=nbar if nbar is not None else 0.0,
        eta_d=settings["eta_d"],
        eta_l=settings["eta_l"],
        depth=depth if depth is not None else 1,
        n_max=settings["n_max"],
    )
    snr_target = settings["snr_target"]
    nbars = (nbar,) if nbar is not None else panels.DEFAULT_NBAR_GRID
    fixed_nbar = nbar if nbar is not None else panels.FIXED_NBAR

    if command == "figure2":
        return panels.figure2(
            base,
            panels=_panels(settings),
            depths=(depth,) if depth is not None else panels.FIGURE2_DEPTHS,
            nbars=nbars,
            fixed_nbar=fixed_nbar,
            snr_target=snr_target,
            max_depth=depth if depth is not None else panels.FIGURE2D_MAX_DEPTH,
        )
    if command == "figure3":
        return [
            panels.figure3(
                base,
                snr_target=snr_target,
                rep_rate_hz=settings["rep_rate_hz"],
                depth=depth if depth is not None else panels.FIGURE3_DEPTH,
            )
        ]
    if command == "figure4":
        return panels.figure4(
            base.with_(depth=depth if depth is not None else panels.FIGURE4_DEPTH),
            panels=_panels(settings),
            snr_target=snr_target,
            nbars=nbars,
        )
    if command == "table1":
        return [
            panels.table1(
                base,
                depth=depth if depth is not None else panels.TABLE1_DEPTH,
                fixed_nbar=fixed_nbar,
                snr_target=snr_target,
                rep_rate_hz=settings["rep_rate_hz"],
            )
        ]
    if command == "sweep":
        return [panels.sweep(settings["grid"], base)]
    if command == "mc-validate":
        return [panels.mc_validate(base, trials=settings["trials"], seed=settings["seed"])]
    raise UsageError(f"unknown command {command!r}")


def write_tables(tables: Sequence[panels.Table], output: Path, fmt: str) -> list[Path]:
    try:
        output.mkdir(parents=True, exist_ok=True)
        written = []
        for table in tables:
            path = output / f"{table.name}.{fmt}"
            path.write_text(render(table, fmt))
            written.append(path)
    except OSError as exc:
        raise UsageError(f"cannot write to {output}: {exc}") from None
    return written


def _report_validation(table: panels.Table) -> None:
    for row in table.rows:
        nbar, m, eta_l = row[:3]
        print(
            f"[{row[-1].upper()}] nbar={nbar:g} depth={m} eta_L={eta_l:g} "
            f"z_success={row[6]:.2f} z_noise={row[10]:.2f}"
        )
    print(f"{len(table.rows) - table.failures}/{len(table.rows)} grid points within "
          f"{panels.Z_THRESHOLD:g} standard errors")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        settings = resolve_settings(args)
        tables = compute(settings)
        written = write_tables(tables, Path(settings["output"]), settings["format"])
    except (UsageError, InvalidParameterError, ValueError) as exc:
        print(f"photon-mux: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoSolutionError, NonMonotoneError) as exc:
        print(f"photon-mux: solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    for path in written:
        print(path)
    if settings["command"] == "mc-validate":
        _report_validation(tables[0])
    return EXIT_FAILURE if any(t.failures for t in tables) and settings["command"] == "mc-validate" else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
