"""YAML configuration: one structured file drives every CLI subcommand.

All tunable constants live here with working defaults (sound speed 1480 m/s,
48 kHz sampling, 4.5-8.5 kHz / 10 ms ranging chirp, 9600-sample stagger, a
four-speaker tank constellation), so an empty config is already runnable and
a file only overrides what it mentions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .commander import CommandCodebook, default_codebook
from .detector import PeakPolicy
from .errors import ConfigError
from .signals import ChirpSpec, SequenceLayout
from .simulator import ChannelModel, ReceiverState
from .solver import Box, Constellation, Cylinder, FixEstimate

TANK_RADIUS = 3.65
TANK_DEPTH = 2.7


def _default_constellation() -> Constellation:
    """Four speakers near the tank wall with staggered depths; the depth
    spread is what keeps the vertical axis observable."""
    az = np.deg2rad([0.0, 90.0, 180.0, 270.0])
    spk = np.column_stack([
        3.6 * np.cos(az), 3.6 * np.sin(az), [0.0, 0.9, 1.8, 2.7],
    ])
    return Constellation(spk)


@dataclass(frozen=True)
class SolverSettings:
    init: FixEstimate = field(
        default_factory=lambda: FixEstimate(np.array([0.0, 0.0, 1.0])))
    tol: float = 1e-6
    max_iter: int = 25
    step_limit: float = 1.0

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise ConfigError("solver tol must be > 0 and max_iter >= 1")


@dataclass(frozen=True)
class ToolkitConfig:
    chirp: ChirpSpec
    layout: SequenceLayout
    constellation: Constellation
    channel: ChannelModel
    policy: PeakPolicy
    solver: SolverSettings
    codebook: CommandCodebook
    volume: object
    grid_spacing: float = 0.1


@dataclass(frozen=True)
class Scenario:
    waypoints: tuple[ReceiverState, ...]
    trials: int = 1
    pseudorange_noise_sigma: float = 0.0
    seed: object = None


def default_config() -> ToolkitConfig:
    return ToolkitConfig(
        chirp=ChirpSpec(4500.0, 8500.0, 0.010, 48000.0, 1.0),
        layout=SequenceLayout(),
        constellation=_default_constellation(),
        channel=ChannelModel(),
        policy=PeakPolicy(),
        solver=SolverSettings(),
        codebook=default_codebook(),
        volume=Cylinder(radius=TANK_RADIUS, z_min=0.0, z_max=TANK_DEPTH),
        grid_spacing=0.1,
    )


def _require(mapping, kind):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{kind} section must be a mapping, got {type(mapping).__name__}")
    return mapping


def _chirp_from(d: dict, fallback: ChirpSpec) -> ChirpSpec:
    return ChirpSpec(
        f_start=float(d.get("f_start", fallback.f_start)),
        f_end=float(d.get("f_end", fallback.f_end)),
        duration=float(d.get("duration", fallback.duration)),
        sample_rate=float(d.get("sample_rate", fallback.sample_rate)),
        amplitude=float(d.get("amplitude", fallback.amplitude)),
    )


def _volume_from(d: dict):
    kind = d.get("kind", "cylinder")
    if kind == "cylinder":
        return Cylinder(radius=float(d.get("radius", TANK_RADIUS)),
                        z_min=float(d.get("z_min", 0.0)),
                        z_max=float(d.get("z_max", TANK_DEPTH)),
                        center=tuple(d.get("center", (0.0, 0.0))))
    if kind == "box":
        try:
            return Box(mins=tuple(float(v) for v in d["mins"]),
                       maxs=tuple(float(v) for v in d["maxs"]))
        except KeyError as exc:
            raise ConfigError(f"box volume needs field {exc}") from exc
    raise ConfigError(f"unknown volume kind {kind!r} (cylinder or box)")


def config_from_dict(raw: dict) -> ToolkitConfig:
    """Build a full config from a (possibly sparse) dictionary.

    Unknown top-level sections are rejected — a typoed section name silently
    falling back to defaults is the worst failure mode a config file can have.
    """
    base = default_config()
    raw = dict(raw or {})
    known = {"chirp", "layout", "constellation", "channel", "policy",
             "solver", "codebook", "volume", "grid_spacing"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")

    chirp = _chirp_from(_require(raw.get("chirp", {}), "chirp"), base.chirp)

    ld = _require(raw.get("layout", {}), "layout")
    layout = SequenceLayout(
        n_channels=int(ld.get("n_channels", base.layout.n_channels)),
        stagger_samples=int(ld.get("stagger_samples", base.layout.stagger_samples)),
        period=float(ld.get("period", base.layout.period)),
        command_slot_offset=int(ld.get("command_slot_offset",
                                       base.layout.command_slot_offset)),
    )

    cd = _require(raw.get("constellation", {}), "constellation")
    if "speakers" in cd:
        constellation = Constellation(np.asarray(cd["speakers"], dtype=float),
                                      cd.get("sigmas"))
    elif "sigmas" in cd:
        constellation = Constellation(base.constellation.speakers, cd["sigmas"])
    else:
        constellation = base.constellation

    hd = _require(raw.get("channel", {}), "channel")
    channel = ChannelModel(
        c=float(hd.get("c", base.channel.c)),
        noise_sigma=float(hd.get("noise_sigma", base.channel.noise_sigma)),
        attenuation=bool(hd.get("attenuation", base.channel.attenuation)),
        multipath_taps=tuple(
            (float(e), float(a)) for e, a in hd.get("multipath_taps", ())),
        seed=hd.get("seed", base.channel.seed),
    )

    pd = _require(raw.get("policy", {}), "policy")
    policy = PeakPolicy(
        threshold=float(pd.get("threshold", base.policy.threshold)),
        persistence_ratio=float(pd.get("persistence_ratio",
                                       base.policy.persistence_ratio)),
    )

    sd = _require(raw.get("solver", {}), "solver")
    init_raw = sd.get("init", list(base.solver.init.position))
    solver = SolverSettings(
        init=FixEstimate(np.asarray(init_raw, dtype=float)),
        tol=float(sd.get("tol", base.solver.tol)),
        max_iter=int(sd.get("max_iter", base.solver.max_iter)),
        step_limit=float(sd.get("step_limit", base.solver.step_limit)),
    )

    kd = _require(raw.get("codebook", {}), "codebook")
    ranging_band = (min(chirp.f_start, chirp.f_end), max(chirp.f_start, chirp.f_end))
    if "commands" in kd:
        entries = tuple(
            (cid, _chirp_from(_require(spec, f"codebook command {cid}"),
                              ChirpSpec(500.0, 1500.0, 0.005, chirp.sample_rate)))
            for cid, spec in kd["commands"].items())
    else:
        entries = default_codebook().entries
    codebook = CommandCodebook(
        entries=entries,
        detection_threshold=float(kd.get("detection_threshold",
                                         base.codebook.detection_threshold)),
        ranging_band=ranging_band,
    )

    volume = _volume_from(_require(raw.get("volume", {}), "volume")) \
        if "volume" in raw else base.volume
    spacing = float(raw.get("grid_spacing", base.grid_spacing))

    cfg = ToolkitConfig(chirp=chirp, layout=layout, constellation=constellation,
                        channel=channel, policy=policy, solver=solver,
                        codebook=codebook, volume=volume, grid_spacing=spacing)
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: ToolkitConfig) -> None:
    if cfg.layout.n_channels != len(cfg.constellation):
        raise ConfigError(
            f"layout has {cfg.layout.n_channels} channels but constellation "
            f"has {len(cfg.constellation)} speakers"
        )
    if cfg.layout.stagger_samples < cfg.chirp.n_samples:
        raise ConfigError(
            f"stagger {cfg.layout.stagger_samples} is shorter than the "
            f"{cfg.chirp.n_samples}-sample chirp; chirps would overlap"
        )
    for cid, spec in cfg.codebook.entries:
        if spec.sample_rate != cfg.chirp.sample_rate:
            raise ConfigError(
                f"command {cid!r} sample_rate {spec.sample_rate} differs from "
                f"ranging chirp {cfg.chirp.sample_rate}"
            )


def config_to_dict(cfg: ToolkitConfig) -> dict:
    """Serializable form; feeding it back to config_from_dict reproduces the
    config exactly."""
    vol = cfg.volume
    if isinstance(vol, Cylinder):
        vd = {"kind": "cylinder", "radius": vol.radius, "z_min": vol.z_min,
              "z_max": vol.z_max, "center": list(vol.center)}
    else:
        vd = {"kind": "box", "mins": list(vol.mins), "maxs": list(vol.maxs)}
    return {
        "chirp": {"f_start": cfg.chirp.f_start, "f_end": cfg.chirp.f_end,
                  "duration": cfg.chirp.duration,
                  "sample_rate": cfg.chirp.sample_rate,
                  "amplitude": cfg.chirp.amplitude},
        "layout": {"n_channels": cfg.layout.n_channels,
                   "stagger_samples": cfg.layout.stagger_samples,
                   "period": cfg.layout.period,
                   "command_slot_offset": cfg.layout.command_slot_offset},
        "constellation": {"speakers": cfg.constellation.speakers.tolist(),
                          "sigmas": cfg.constellation.sigmas.tolist()},
        "channel": {"c": cfg.channel.c, "noise_sigma": cfg.channel.noise_sigma,
                    "attenuation": cfg.channel.attenuation,
                    "multipath_taps": [list(t) for t in cfg.channel.multipath_taps],
                    "seed": cfg.channel.seed},
        "policy": {"threshold": cfg.policy.threshold,
                   "persistence_ratio": cfg.policy.persistence_ratio},
        "solver": {"init": cfg.solver.init.position.tolist(),
                   "tol": cfg.solver.tol, "max_iter": cfg.solver.max_iter,
                   "step_limit": cfg.solver.step_limit},
        "codebook": {
            "detection_threshold": cfg.codebook.detection_threshold,
            "commands": {cid: {"f_start": s.f_start, "f_end": s.f_end,
                               "duration": s.duration,
                               "sample_rate": s.sample_rate,
                               "amplitude": s.amplitude}
                         for cid, s in cfg.codebook.entries},
        },
        "volume": vd,
        "grid_spacing": cfg.grid_spacing,
    }


def load_config(path) -> ToolkitConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}")
    return config_from_dict(raw or {})


def save_config(cfg: ToolkitConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def scenario_from_dict(raw: dict) -> Scenario:
    raw = dict(raw or {})
    if "waypoints" not in raw or not raw["waypoints"]:
        raise ConfigError("scenario needs a non-empty 'waypoints' list")
    wps = []
    for i, wd in enumerate(raw["waypoints"]):
        wd = _require(wd, f"waypoint {i}")
        if "position" not in wd:
            raise ConfigError(f"waypoint {i} is missing 'position'")
        wps.append(ReceiverState(
            position=np.asarray(wd["position"], dtype=float),
            clock_bias=float(wd.get("clock_bias", 0.0)),
            recording_length=float(wd.get("recording_length", 2.5)),
        ))
    trials = int(raw.get("trials", 1))
    prn = float(raw.get("pseudorange_noise_sigma", 0.0))
    if prn < 0:
        raise ConfigError("pseudorange_noise_sigma must be >= 0")
    return Scenario(waypoints=tuple(wps), trials=trials,
                    pseudorange_noise_sigma=prn, seed=raw.get("seed"))


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario file {path} is not valid YAML: {exc}")
    return scenario_from_dict(raw or {})
