"""Deterministic writers: versioned CSV tables, optional JSON mirrors, SVG frames."""

import json
import os

import numpy as np

SCHEMA_VERSION = 1


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, kind, columns, rows):
    """CSV whose first line is ``# stochmcf <kind> v<version>``."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# stochmcf {kind} v{SCHEMA_VERSION}\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")
    return path


def read_table(path):
    """Return ``(kind, version, columns, rows)``; rows are lists of strings."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        cols = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return head[2], int(head[3].lstrip("v")), cols, rows


def write_json(path, kind, columns, rows):
    payload = {"schema": f"stochmcf {kind} v{SCHEMA_VERSION}", "columns": list(columns), "rows": [[_jsonable(v) for v in r] for r in rows]}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def snapshot_rows(snapshots, flags, observables):
    """One row per snapshot: ``t``, sigma flags, observables, then the heights."""
    N = snapshots[0].u.shape[0] if snapshots else 0
    cols = ["t", "sigma1", "sigma2", "sigma3", "length", "area", "kappa_min", "kappa_max"] + [f"u{j}" for j in range(N)]
    rows = []
    for s, fl, ob in zip(snapshots, flags, observables):
        rows.append([s.t, fl["sigma1"], fl["sigma2"], fl["sigma3"], ob["length"], ob["area"], ob["kappa_min"], ob["kappa_max"]] + list(s.u))
    return cols, rows


def render_frames(snapshots, out_dir, viewport, prefix="frame"):
    """Write one SVG per snapshot; returns the file paths.

    ``snapshots`` are :class:`~stochmcf.observables.CurveSnapshot` objects and
    ``viewport`` is ``((xmin, ymin), (xmax, ymax))``, shared by every frame.
    File names carry the index and the time, so they sort chronologically.
    """
    if not snapshots:
        return []
    os.makedirs(out_dir, exist_ok=True)
    (x0, y0), (x1, y1) = viewport
    pad = 0.05 * max(x1 - x0, y1 - y0)
    x0, y0, x1, y1 = x0 - pad, y0 - pad, x1 + pad, y1 + pad
    w, h = x1 - x0, y1 - y0
    stroke = w / 400.0
    paths = []
    for i, snap in enumerate(snapshots):
        # flip y so the picture has the usual orientation
        pts = " L ".join(f"{px:.6f},{(y0 + y1) - py:.6f}" for px, py in snap.points)
        svg = (
            '<svg xmlns="http://www.w3.org/2000/svg" '
            f'viewBox="{x0:.6f} {y0:.6f} {w:.6f} {h:.6f}" width="480" height="{480 * h / w:.0f}">\n'
            f'<title>t = {snap.t:.6f}</title>\n'
            f'<path d="M {pts} Z" fill="none" stroke="black" stroke-width="{stroke:.6f}"/>\n'
            "</svg>\n"
        )
        name = os.path.join(out_dir, f"{prefix}_{i:05d}_t{snap.t:.6f}.svg")
        with open(name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
        paths.append(name)
    return paths
