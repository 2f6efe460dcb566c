"""Tabular output for fixes, GDOP grids, and command decodes.

Every writer comes in a CSV and a JSON flavour; both carry a schema tag so
downstream consumers can detect layout changes.  Waypoints whose geometry is
unsolvable appear as "Out of Bounds" rows with the coordinate columns left
empty — a bogus coordinate is worse than none.
"""

from __future__ import annotations

import csv
import json
import math

FIXES_SCHEMA = "fixes/v1"
GDOP_SCHEMA = "gdop/v1"
DECODE_SCHEMA = "decode/v1"

OUT_OF_BOUNDS = "Out of Bounds"

FIX_COLUMNS = [
    "position",
    "truth_x", "truth_y", "truth_z",
    "est_x", "est_y", "est_z",
    "rmse", "xy_rmse",
    "gdop", "status",
]


def _fmt(v, digits=6):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return f"{v:.{digits}f}"


def _mean_estimate(result):
    """Average of the converged trial estimates, or None when the waypoint
    produced no usable fix."""
    fixes = [f for f in result.fixes if f.converged]
    if not fixes:
        return None
    n = len(fixes)
    return [sum(f.estimate.position[i] for f in fixes) / n for i in range(3)]


def _clean(v):
    if v is None or not math.isfinite(v):
        return None
    return float(v)


def fix_rows(results):
    rows = []
    for r in results:
        est = _mean_estimate(r) if r.status == "ok" else None
        if r.status == "unsolvable":
            status = OUT_OF_BOUNDS
        elif r.status == "ok" and est is None:
            status = "no_convergence"
        else:
            status = r.status
        truth = [float(v) for v in r.truth.position]
        if not all(math.isfinite(v) for v in truth):
            truth = None
        bias = [f.estimate.clock_bias for f in r.fixes if f.converged]
        rows.append({
            "position": f"P{r.index + 1}",
            "truth": truth,
            "estimate": est,
            "clock_bias": sum(bias) / len(bias) if bias else None,
            "rmse": _clean(r.rmse),
            "xy_rmse": _clean(r.xy_rmse),
            "gdop": r.gdop,
            "status": status,
        })
    return rows


def write_fixes_csv(results, path):
    rows = fix_rows(results)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIX_COLUMNS)
        for row in rows:
            est = row["estimate"] or (None, None, None)
            truth = row["truth"] or (None, None, None)
            w.writerow([
                row["position"],
                *(_fmt(v) for v in truth),
                *(_fmt(v) for v in est),
                _fmt(row["rmse"]), _fmt(row["xy_rmse"]),
                _fmt(row["gdop"], 4), row["status"],
            ])


def write_fixes_json(results, path):
    rows = fix_rows(results)
    for row in rows:
        if row["gdop"] is not None and math.isinf(row["gdop"]):
            row["gdop"] = "inf"
    with open(path, "w") as fh:
        json.dump({"schema": FIXES_SCHEMA, "rows": rows}, fh, indent=2)
        fh.write("\n")


def write_gdop_csv(grid, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "gdop", "band"])
        for (x, y, z), g, band in zip(grid.points, grid.values, grid.bands):
            w.writerow([_fmt(x, 3), _fmt(y, 3), _fmt(z, 3), _fmt(g, 4), band])


def write_gdop_json(grid, path):
    cells = [
        {"x": round(float(x), 6), "y": round(float(y), 6),
         "z": round(float(z), 6),
         "gdop": "inf" if math.isinf(g) else round(float(g), 6),
         "band": band}
        for (x, y, z), g, band in zip(grid.points, grid.values, grid.bands)
    ]
    payload = {
        "schema": GDOP_SCHEMA,
        "spacing": grid.spacing,
        "solvable_fraction": grid.solvable_fraction,
        "mean_solvable_gdop": grid.mean_solvable_gdop,
        "band_fractions": grid.band_fractions(),
        "cells": cells,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_decode_csv(decisions, path):
    ids = sorted({cid for d in decisions for cid in d.scores})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "command", "score"] + [f"score_{c}" for c in ids])
        for d in decisions:
            w.writerow([
                d.epoch, d.command if d.command is not None else "",
                _fmt(d.score, 4),
                *(_fmt(d.scores.get(c), 4) for c in ids),
            ])


def write_decode_json(decisions, path):
    events = [
        {"epoch": d.epoch, "command": d.command,
         "score": round(float(d.score), 6),
         "scores": {c: round(float(s), 6) for c, s in d.scores.items()}}
        for d in decisions
    ]
    with open(path, "w") as fh:
        json.dump({"schema": DECODE_SCHEMA, "events": events}, fh, indent=2)
        fh.write("\n")


def summarize_fixes(results) -> str:
    """One console line per waypoint mirroring the CSV contents."""
    lines = []
    for row in fix_rows(results):
        if row["estimate"] is None:
            lines.append(f"{row['position']}: {row['status']}"
                         f" (gdop {_fmt(row['gdop'], 2)})")
        else:
            e = row["estimate"]
            lines.append(
                f"{row['position']}: est=({e[0]:.3f}, {e[1]:.3f}, {e[2]:.3f})"
                f" rmse={_fmt(row['rmse'], 4)} xy={_fmt(row['xy_rmse'], 4)}"
                f" gdop={_fmt(row['gdop'], 2)}")
    return "\n".join(lines)
