"""Flat-file tables with an embedded run manifest.

CSV layout: a first line ``# {json}`` holding the resolved config, seed,
command and package version, then a header row, then data rows. Floats are
written with 17 significant digits; files are UTF-8 with LF endings. Wall
time goes only into the side-car ``<stem>.manifest.json`` so that reruns
with the same seed give byte-identical tables.
"""
from __future__ import annotations

import csv
import io
import json
import platform
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy
import yaml


def package_version() -> str:
    from . import __version__

    return __version__


def versions() -> dict[str, str]:
    return {
        "isqlimits": package_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
    }


def format_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _jsonable(v: Any):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if v is None:
        return None
    return str(v)


def table_manifest(command: str, config: dict, seed: int) -> dict:
    return {"command": command, "config": _jsonable(config), "seed": int(seed), "version": package_version()}


def render_csv(columns: Sequence[str], rows: Sequence[Sequence[Any]], manifest: dict) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def render_json(columns: Sequence[str], rows: Sequence[Sequence[Any]], manifest: dict) -> str:
    body = {"manifest": manifest, "columns": list(columns), "rows": [_jsonable(list(r)) for r in rows]}
    return json.dumps(body, sort_keys=True, indent=1) + "\n"


def read_csv(path: str | Path) -> tuple[dict, list[dict[str, str]]]:
    """Manifest and rows (as string dicts) of a table written by ``write_table``."""
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing manifest line")
        manifest = json.loads(first[2:])
        rows = list(csv.DictReader(fh))
    return manifest, rows


def write_table(
    directory: str | Path,
    stem: str,
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
    manifest: dict,
    formats: Sequence[str] = ("csv",),
    wall_time: float | None = None,
) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        text = render_csv(columns, rows, manifest) if fmt == "csv" else render_json(columns, rows, manifest)
        path = directory / f"{stem}.{fmt}"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(path)
    side = dict(manifest, versions=versions(), wall_time_s=wall_time, files=[p.name for p in written])
    mpath = directory / f"{stem}.manifest.json"
    with open(mpath, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_jsonable(side), sort_keys=True, indent=1) + "\n")
    written.append(mpath)
    return written
