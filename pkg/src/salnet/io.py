"""CSV, SVG and manifest output.

Floats are written with ``repr`` (shortest round-trip form), so a CSV read
back with :func:`read_csv` reproduces the written numbers exactly, and two
runs with the same seed produce identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402

OUT_ENV = "SALNET_OUT"


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "salnet-out"))


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return format_value(v.item())
    return str(v)


def parse_value(text: str):
    """Inverse of :func:`format_value` for numbers; other text is returned unchanged."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(path, header, rows) -> Path:
    """Write ``rows`` (sequences matching ``header``) with a header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            row = list(row)
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([format_value(v) for v in row])
    return path


def write_dict_csv(path, records: list[dict], header=None) -> Path:
    header = list(header or (records[0].keys() if records else []))
    return write_csv(path, header, ([r[k] for k in header] for r in records))


def read_csv(path) -> tuple[list[str], list[list]]:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [[parse_value(c) for c in row] for row in r]


def write_svg(path, series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              kind: str = "line") -> Path:
    """Render named ``(x, y)`` series as a chart.

    ``kind`` is ``line``, ``scatter`` or ``bar`` (bar expects bin edges as x).
    Output bytes depend only on the arguments.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": "salnet", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, (x, y) in series.items():
            if kind == "scatter":
                ax.scatter(x, y, s=4, label=name)
            elif kind == "bar":
                ax.stairs(y, x, label=name)
            else:
                ax.plot(x, y, label=name, linewidth=1)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if len(series) > 1:
            ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def file_hash(path) -> str:
    """Git-style blob hash of a file's contents."""
    data = Path(path).read_bytes()
    h = hashlib.sha1(f"blob {len(data)}\0".encode())
    h.update(data)
    return h.hexdigest()


class Manifest:
    """Replay record of one CLI invocation.

    Written to ``manifest.json`` before any result file, then rewritten with
    output hashes when the run finishes.
    """

    def __init__(self, out_dir, kind: str, params: dict, seed: int, run_seeds: list):
        self.path = Path(out_dir) / "manifest.json"
        self.data = {
            "tool": "salnet",
            "version": __version__,
            "kind": kind,
            "seed": seed,
            "run_seeds": run_seeds,
            "params": params,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "finished": None,
            "status": "running",
            "outputs": {},
        }

    def write(self) -> Path:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")
        return self.path

    def finish(self, outputs, status: str = "ok") -> Path:
        self.data["outputs"] = {Path(p).name: file_hash(p) for p in outputs}
        self.data["status"] = status
        self.data["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        return self.write()
