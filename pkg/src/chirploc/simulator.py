"""Synthetic receiver recordings: delay, attenuate, echo, and add noise.

The channel applies each speaker's propagation delay plus the receiver clock
offset in whole samples (the detector works at whole-sample resolution, so
fractional-delay filtering would only add unobservable complication), then
sums channels into one mono recording the way a single hydrophone hears them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .detector import PeakPolicy, extract_pseudoranges
from .errors import ConfigError, DataError, DetectionError
from .signals import ChirpSpec, SampledSignal, SequenceLayout, assemble_sequence, generate_chirp
from .solver import (SOLVABLE_GDOP, Constellation, FixEstimate, PositionFix,
                     gdop, solve_fix)

DEFAULT_CHIRP = ChirpSpec(4500.0, 8500.0, 0.010)


@dataclass(frozen=True)
class ChannelModel:
    """Propagation model between the speakers and the receiver.

    noise_sigma is the standard deviation of additive white Gaussian noise
    relative to a unit-amplitude chirp.  multipath_taps lists
    (extra_delay_seconds, relative_amplitude) echoes applied to every path.
    A fixed seed makes the output bit-identical.
    """

    c: float = 1480.0
    noise_sigma: float = 0.0
    attenuation: bool = False
    multipath_taps: tuple = ()
    seed: object = None

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        for extra, amp in self.multipath_taps:
            if extra <= 0:
                raise ConfigError(
                    f"multipath extra delay must be > 0 s (echoes follow the "
                    f"direct path), got {extra}"
                )


@dataclass(frozen=True)
class ReceiverState:
    """Ground-truth receiver position, clock bias, and recording window."""

    position: np.ndarray
    clock_bias: float = 0.0
    recording_length: float = 2.5

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,):
            raise ConfigError(f"position must be (x, y, z), got {pos}")
        if self.recording_length <= 0:
            raise ConfigError("recording_length must be positive")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class WaypointResult:
    """One scenario waypoint: ground truth, its fixes, and error summaries.

    ``rmse`` is the root-mean-square 3D position error over the waypoint's
    trials; ``xy_rmse`` restricts the error to the horizontal plane.  Both
    are NaN when no trial produced a converged fix.  ``pseudoranges`` keeps
    the per-trial observation vectors for auditability.
    """

    index: int
    truth: ReceiverState
    gdop: float
    status: str
    fixes: tuple[PositionFix, ...] = ()
    pseudoranges: tuple = ()
    rmse: float = math.nan
    xy_rmse: float = math.nan


def simulate_reception(sequence, constellation: Constellation,
                       receiver: ReceiverState,
                       channel: ChannelModel) -> SampledSignal:
    """Mix the per-speaker transmission into one received mono recording.

    Channel i is delayed by round((range_i / c + clock_bias) * F_s) samples,
    optionally scaled by 1/range spreading, duplicated per multipath tap, and
    summed with white noise.  Arrivals that would end after the recording
    window raise :class:`DataError` stating the minimum length; arrivals
    before sample zero (a large negative clock bias) are silently truncated —
    the receiver simply wasn't recording yet.
    """
    chans = list(sequence)
    if len(chans) != len(constellation):
        raise ConfigError(
            f"{len(chans)} sequence channels vs {len(constellation)} speakers"
        )
    fs = chans[0].sample_rate
    n_out = int(round(receiver.recording_length * fs))
    out = np.zeros(n_out)

    taps = [(0.0, 1.0)] + list(channel.multipath_taps)
    last_end = 0
    for i, ch in enumerate(chans):
        rng_m = float(np.linalg.norm(constellation.speakers[i] - receiver.position))
        delay_s = rng_m / channel.c + receiver.clock_bias
        gain = 1.0 / max(rng_m, 1e-3) if channel.attenuation else 1.0
        for extra, rel in taps:
            d = int(round((delay_s + extra) * fs))
            end = d + len(ch)
            last_end = max(last_end, end)
            if end <= 0:
                continue
            lo = max(d, 0)
            out[lo:min(end, n_out)] += gain * rel * ch.samples[lo - d:n_out - d]
    if last_end > n_out:
        raise DataError(
            f"recording of {receiver.recording_length} s cannot contain the "
            f"last arrival; need at least {last_end / fs:.3f} s"
        )
    if channel.noise_sigma > 0:
        rng = np.random.default_rng(channel.seed)
        out = out + rng.normal(0.0, channel.noise_sigma, n_out)
    return SampledSignal(out, fs)


def run_scenario(constellation: Constellation, waypoints, channel: ChannelModel,
                 layout: SequenceLayout, chirp_spec: ChirpSpec = DEFAULT_CHIRP,
                 policy: PeakPolicy | None = None, trials: int = 1,
                 pseudorange_noise_sigma: float = 0.0, volume=None,
                 init: FixEstimate | None = None) -> list[WaypointResult]:
    """Synthesize, detect, and solve every waypoint of a scenario.

    Each waypoint gets ``trials`` independent recordings (fresh noise, same
    truth); the per-waypoint PRNG streams are spawned deterministically from
    the channel seed, so a scenario is reproducible while waypoints stay
    statistically independent.  ``pseudorange_noise_sigma`` adds calibrated
    measurement scatter directly to the extracted pseudoranges, for studies
    of ranging error larger than the sample-quantization floor.

    A waypoint whose true location has GDOP at or beyond the solvability
    cutoff is flagged 'unsolvable' and reported without coordinates; detector
    misses are flagged 'no_detection'.  Neither aborts the batch.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if pseudorange_noise_sigma < 0:
        raise ConfigError("pseudorange_noise_sigma must be >= 0")
    wps = list(waypoints)
    replica = generate_chirp(chirp_spec)
    sequence = assemble_sequence(replica, layout)
    base = channel.seed
    if not isinstance(base, np.random.SeedSequence):
        base = np.random.SeedSequence(base)
    children = base.spawn(max(len(wps) * trials, 1))

    results = []
    for w_idx, truth in enumerate(wps):
        g = gdop(constellation, truth.position)
        if not math.isfinite(g) or g >= SOLVABLE_GDOP:
            results.append(WaypointResult(index=w_idx, truth=truth, gdop=g,
                                          status="unsolvable"))
            continue
        fixes = []
        prs = []
        sq_err = []
        sq_xy = []
        misses = 0
        for t in range(trials):
            seed = children[w_idx * trials + t]
            ch = replace(channel, seed=seed)
            rec = simulate_reception(sequence, constellation, truth, ch)
            try:
                pr = extract_pseudoranges(rec, replica, layout, policy,
                                          c=channel.c, epoch=t)
            except DetectionError:
                misses += 1
                continue
            obs = np.asarray(pr.ranges, dtype=float)
            if pseudorange_noise_sigma > 0:
                noise_rng = np.random.default_rng(seed.spawn(1)[0])
                obs = obs + noise_rng.normal(0.0, pseudorange_noise_sigma, len(obs))
            prs.append(obs)
            fix = solve_fix(obs, constellation, init=init, volume=volume)
            fixes.append(fix)
            if fix.converged:
                err = fix.estimate.position - truth.position
                sq_err.append(float(err @ err))
                sq_xy.append(float(err[:2] @ err[:2]))
        if not fixes and misses == trials:
            results.append(WaypointResult(index=w_idx, truth=truth, gdop=g,
                                          status="no_detection"))
            continue
        rmse = math.sqrt(np.mean(sq_err)) if sq_err else math.nan
        xy = math.sqrt(np.mean(sq_xy)) if sq_xy else math.nan
        status = "ok" if sq_err else "no_convergence"
        results.append(WaypointResult(index=w_idx, truth=truth, gdop=g,
                                      status=status, fixes=tuple(fixes),
                                      pseudoranges=tuple(prs),
                                      rmse=rmse, xy_rmse=xy))
    return results
