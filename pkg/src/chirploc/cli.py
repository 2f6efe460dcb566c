"""Command-line front end: gen, simulate, locate, gdop, decode.

Every subcommand is driven by one YAML config (all defaults built in) and is
deterministic for a given config + seed.  Exit codes: 0 success, 2 bad
configuration, 3 bad or undetectable input data, 4 unsolvable geometry.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import report
from .config import ToolkitConfig, default_config, load_config, load_scenario, save_config
from .detector import extract_pseudoranges
from .errors import ConfigError, DataError, DetectionError, GeometryError
from .plots import plot_fixes, plot_gdop_slices
from .signals import SampledSignal, assemble_sequence, generate_chirp, read_wav, write_wav
from .simulator import ReceiverState, WaypointResult, simulate_reception
from .solver import SOLVABLE_GDOP, gdop, gdop_map, solve_fix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_UNSOLVABLE = 4

TRUTH_SCHEMA = "truth/v1"


def _load_cfg(args) -> ToolkitConfig:
    return load_config(args.config) if args.config else default_config()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _mono(path) -> SampledSignal:
    sig = read_wav(path)
    if isinstance(sig, list):
        raise DataError(
            f"{path}: expected a mono hydrophone recording, got "
            f"{len(sig)} channels"
        )
    return sig


def cmd_gen(args) -> int:
    """Write the staggered ranging sequence, the command chirps, and the
    fully resolved config."""
    cfg = _load_cfg(args)
    out = _out_dir(args)

    chirp = generate_chirp(cfg.chirp)
    sequence = assemble_sequence(chirp, cfg.layout)
    seq_path = out / "sequence.wav"
    write_wav(sequence, seq_path)
    onsets = [cfg.layout.onset(i) for i in range(cfg.layout.n_channels)]
    print(f"wrote {seq_path} ({cfg.layout.n_channels} channels, "
          f"onsets {'/'.join(str(o) for o in onsets)})")

    for cid, spec in cfg.codebook.entries:
        p = out / f"command_{cid}.wav"
        write_wav(generate_chirp(spec), p)
        print(f"wrote {p}")

    resolved = out / "config_resolved.yaml"
    save_config(cfg, resolved)
    print(f"wrote {resolved}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    """Render one recording per scenario waypoint plus a truth manifest."""
    cfg = _load_cfg(args)
    if not args.scenario:
        raise ConfigError("simulate requires --scenario")
    scenario = load_scenario(args.scenario)
    out = _out_dir(args)

    seed = args.seed if args.seed is not None else (
        scenario.seed if scenario.seed is not None else cfg.channel.seed)
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(scenario.waypoints))

    chirp = generate_chirp(cfg.chirp)
    sequence = assemble_sequence(chirp, cfg.layout)

    manifest = {"schema": TRUTH_SCHEMA, "seed": seed,
                "sample_rate": cfg.chirp.sample_rate,
                "speed_of_sound": cfg.channel.c, "waypoints": []}
    for i, wp in enumerate(scenario.waypoints):
        ch = replace(cfg.channel, seed=children[i])
        rec = simulate_reception(sequence, cfg.constellation, wp, ch)
        name = f"rec_P{i + 1}.wav"
        write_wav(rec, out / name)
        manifest["waypoints"].append({
            "index": i, "file": name,
            "position": [float(v) for v in wp.position],
            "clock_bias": wp.clock_bias,
        })
        print(f"wrote {out / name}")

    truth_path = out / "truth.json"
    with open(truth_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {truth_path}")
    return EXIT_OK


def _read_truth(path) -> dict:
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"truth manifest not found: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"truth manifest {path} is not valid JSON: {exc}")
    table = {}
    for wp in manifest.get("waypoints", []):
        table[Path(wp["file"]).name] = (
            np.asarray(wp["position"], dtype=float),
            float(wp.get("clock_bias", 0.0)),
        )
    return table


def cmd_locate(args) -> int:
    """Extract pseudoranges from each recording and solve for the fix."""
    cfg = _load_cfg(args)
    out = _out_dir(args)
    truth_table = _read_truth(args.truth) if args.truth else {}
    replica = generate_chirp(cfg.chirp)

    results = []
    n_fixed = 0
    for i, rec_path in enumerate(args.recordings):
        rec = _mono(rec_path)
        name = Path(rec_path).name
        truth_pos = truth_table.get(name, (None, None))[0]
        truth = ReceiverState(truth_pos if truth_pos is not None
                              else np.full(3, np.nan))
        try:
            pr = extract_pseudoranges(rec, replica, cfg.layout, cfg.policy,
                                      c=cfg.channel.c)
        except DetectionError as exc:
            print(f"{name}: no usable chirps ({exc})", file=sys.stderr)
            results.append(WaypointResult(index=i, truth=truth, gdop=math.inf,
                                          status="no_detection"))
            continue
        try:
            fix = solve_fix(pr, cfg.constellation, init=cfg.solver.init,
                            tol=cfg.solver.tol, max_iter=cfg.solver.max_iter,
                            step_limit=cfg.solver.step_limit,
                            volume=cfg.volume)
        except GeometryError as exc:
            print(f"{name}: {exc}", file=sys.stderr)
            results.append(WaypointResult(index=i, truth=truth, gdop=math.inf,
                                          status="unsolvable"))
            continue
        ref = truth_pos if truth_pos is not None else fix.estimate.position
        g = gdop(cfg.constellation, ref, c=cfg.channel.c)
        if (fix.status == "unsolvable" or not math.isfinite(g)
                or g >= SOLVABLE_GDOP):
            results.append(WaypointResult(index=i, truth=truth, gdop=g,
                                          status="unsolvable"))
            continue
        rmse = xy = math.nan
        if truth_pos is not None and fix.converged:
            err = fix.estimate.position - truth_pos
            rmse = float(np.linalg.norm(err))
            xy = float(np.linalg.norm(err[:2]))
        status = "ok" if fix.converged else "no_convergence"
        n_fixed += fix.converged
        results.append(WaypointResult(
            index=i, truth=truth, gdop=g, status=status, fixes=(fix,),
            pseudoranges=(np.asarray(pr.ranges),), rmse=rmse, xy_rmse=xy))

    table = out / f"fixes.{args.format}"
    if args.format == "json":
        report.write_fixes_json(results, table)
    else:
        report.write_fixes_csv(results, table)
    fig = out / "fixes.png"
    plot_fixes(results, fig, volume=cfg.volume, constellation=cfg.constellation)
    print(report.summarize_fixes(results))
    print(f"wrote {table}")
    print(f"wrote {fig}")

    if n_fixed == 0:
        return EXIT_DATA
    if any(r.status == "unsolvable" for r in results):
        return EXIT_UNSOLVABLE
    return EXIT_OK


def cmd_gdop(args) -> int:
    """Map GDOP over the configured volume and summarize solvability."""
    cfg = _load_cfg(args)
    out = _out_dir(args)
    grid = gdop_map(cfg.constellation, cfg.volume, cfg.grid_spacing)

    table = out / f"gdop.{args.format}"
    if args.format == "json":
        report.write_gdop_json(grid, table)
    else:
        report.write_gdop_csv(grid, table)
    fig = out / "gdop.png"
    plot_gdop_slices(grid, fig)

    print(f"cells: {len(grid.values)} at {grid.spacing} m spacing")
    print(f"solvable fraction: {100.0 * grid.solvable_fraction:.1f}%")
    if math.isfinite(grid.mean_solvable_gdop):
        print(f"mean solvable GDOP: {grid.mean_solvable_gdop:.2f}")
    for band, frac in grid.band_fractions().items():
        print(f"  {band}: {100.0 * frac:.1f}%")
    print(f"wrote {table}")
    print(f"wrote {fig}")
    return EXIT_OK if grid.solvable_fraction > 0 else EXIT_UNSOLVABLE


def cmd_decode(args) -> int:
    """Scan each epoch's command slot and emit classified command events."""
    cfg = _load_cfg(args)
    out = _out_dir(args)
    rec = _mono(args.recording)
    from .commander import classify_command

    fs = rec.sample_rate
    period = int(round(cfg.layout.period * fs))
    slot_width = cfg.layout.stagger_samples
    decisions = []
    epoch = 0
    while True:
        lo = epoch * period + cfg.layout.command_onset
        if lo >= len(rec):
            break
        hi = min(lo + slot_width, (epoch + 1) * period, len(rec))
        if hi - lo >= min(len(generate_chirp(s)) for _, s in cfg.codebook.entries):
            d = classify_command(rec, cfg.codebook, slot=(lo, hi), epoch=epoch)
            if d.command is not None:
                decisions.append(d)
                print(f"epoch {epoch}: {d.command} (score {d.score:.3f})")
        epoch += 1

    if not decisions:
        print("no commands detected")
    table = out / f"decode.{args.format}"
    if args.format == "json":
        report.write_decode_json(decisions, table)
    else:
        report.write_decode_csv(decisions, table)
    print(f"wrote {table}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file (defaults are built in)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the noise seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="tabular output format")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chirploc",
        description="Acoustic chirp localization: signal generation, channel "
                    "simulation, pseudorange fixes, GDOP maps, command decode.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write transmission WAVs and resolved config")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="render waypoint recordings + truth manifest")
    _add_common(p)
    p.add_argument("--scenario", help="YAML scenario (waypoints, trials, noise)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("locate", help="solve fixes from recordings")
    _add_common(p)
    p.add_argument("--truth", help="truth manifest JSON for error reporting")
    p.add_argument("recordings", nargs="+", help="mono WAV recordings")
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("gdop", help="map GDOP over the configured volume")
    _add_common(p)
    p.set_defaults(func=cmd_gdop)

    p = sub.add_parser("decode", help="classify command chirps per epoch")
    _add_common(p)
    p.add_argument("recording", help="mono WAV recording")
    p.set_defaults(func=cmd_decode)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_UNSOLVABLE


if __name__ == "__main__":
    sys.exit(main())
