"""Matched filtering and first-significant-peak pseudorange extraction.

The receiver correlates its recording against the known chirp replica.  Each
speaker's correlation peak is *not* taken as the global maximum inside its
search window: reflections can arrive later with more energy, so the selector
walks forward and returns the earliest local maximum that clears a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve, hilbert

from .errors import ConfigError, DataError, DetectionError
from .signals import SampledSignal, SequenceLayout

SPEED_OF_SOUND = 1480.0


@dataclass(frozen=True)
class CorrelationSeries:
    """Matched-filter output, optionally scaled so max |value| == 1."""

    values: np.ndarray
    sample_rate: float
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class PeakPolicy:
    """First-peak selection rules.

    threshold
        Fraction of the window's normalized maximum a sample must reach.
    search_window
        Optional (start, stop) sample interval; None scans the whole series.
    persistence_ratio
        A window only counts as containing a chirp if its peak stands out
        from the window median by at least this factor.  Pure noise windows
        normalize their own maximum to 1.0, so a plain threshold can never
        reject them; the persistence test can.
    """

    threshold: float = 0.5
    search_window: tuple[int, int] | None = None
    persistence_ratio: float = 6.0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.persistence_ratio < 1.0:
            raise ConfigError("persistence_ratio must be >= 1")


@dataclass(frozen=True)
class PseudorangeSet:
    """One epoch's pseudoranges with the peak samples they came from.

    ``ranges[i]`` is exactly ``c / sample_rate * peak_samples[i]``; the
    constructor derives the ranges so the two fields can never drift apart.
    """

    peak_samples: np.ndarray
    c: float = SPEED_OF_SOUND
    sample_rate: float = 48000.0
    epoch: int = 0
    ranges: np.ndarray = field(init=False)

    def __post_init__(self):
        peaks = np.asarray(self.peak_samples)
        if peaks.size < 4:
            raise DataError(
                f"need at least 4 pseudoranges for a fix, got {peaks.size}"
            )
        if np.any(peaks <= 0):
            raise DataError("peak samples must be positive (ranges must be > 0)")
        object.__setattr__(self, "peak_samples", peaks)
        object.__setattr__(
            self, "ranges", pseudorange_from_sample(peaks, self.c, self.sample_rate)
        )

    def __len__(self) -> int:
        return len(self.ranges)


def pseudorange_from_sample(peak_sample, c: float = SPEED_OF_SOUND,
                            sample_rate: float = 48000.0):
    """Convert an arrival sample index to an apparent distance: c/F_s * s."""
    return c / sample_rate * np.asarray(peak_sample, dtype=float)


def matched_filter(recording: SampledSignal, replica: SampledSignal,
                   normalize: bool = True) -> CorrelationSeries:
    """Cross-correlate a recording with the replica waveform.

    Equivalently, convolve with the time-reversed replica.  The output has
    the recording's length, and a replica starting at sample ``n0`` of the
    recording produces its correlation peak at sample ``n0 + len(replica) - 1``
    (the filter needs the full replica to have entered before it can line up).
    That fixed alignment offset is what :func:`extract_pseudoranges` subtracts
    when it converts peaks back to onsets.
    """
    if recording.sample_rate != replica.sample_rate:
        raise DataError("recording and replica sample rates differ")
    if len(replica) > len(recording):
        raise DataError(
            f"replica ({len(replica)} samples) longer than recording "
            f"({len(recording)} samples)"
        )
    if not np.any(recording.samples):
        raise DataError("recording is all zeros")
    y = fftconvolve(recording.samples, replica.samples[::-1], mode="full")
    y = y[: len(recording)]
    if normalize:
        y = y / np.max(np.abs(y))
    return CorrelationSeries(y, recording.sample_rate, normalized=normalize)


def _analytic_envelope(values: np.ndarray) -> np.ndarray:
    """Magnitude of the analytic signal; smooths carrier oscillation so the
    first-peak rule sees one hump per arrival instead of every half-cycle."""
    return np.abs(hilbert(values))


def pick_first_peak(series: CorrelationSeries, policy: PeakPolicy,
                    refine: bool = False):
    """Earliest local maximum in the window reaching the policy threshold.

    This is deliberately *not* argmax: a multipath echo may dominate the
    window, but the direct path arrives first.  Values are re-normalized to
    the window maximum before thresholding.  A local maximum is strictly
    greater than its left neighbor and at least its right neighbor, so
    plateaus resolve to their earliest sample; window edges qualify.

    Returns the winning sample index (a float when ``refine`` asks for
    parabolic sub-sample interpolation), or None when the window fails the
    persistence test or nothing reaches the threshold.
    """
    v = series.values
    lo, hi = policy.search_window if policy.search_window else (0, len(v))
    lo = max(lo, 0)
    hi = min(hi, len(v))
    if hi - lo < 1:
        raise DataError(f"empty search window ({lo}, {hi})")
    w = np.abs(v[lo:hi])
    peak = w.max()
    if peak <= 0.0:
        return None
    med = np.median(w)
    if med > 0 and peak / med < policy.persistence_ratio:
        return None
    wn = w / peak
    above = np.flatnonzero(wn >= policy.threshold)
    for i in above:
        left = wn[i - 1] if i > 0 else -np.inf
        right = wn[i + 1] if i < len(wn) - 1 else -np.inf
        if wn[i] > left and wn[i] >= right:
            idx = lo + int(i)
            if refine and 0 < i < len(wn) - 1:
                denom = wn[i - 1] - 2.0 * wn[i] + wn[i + 1]
                if denom != 0.0:
                    return idx + 0.5 * (wn[i - 1] - wn[i + 1]) / denom
            return idx
    return None


def extract_pseudoranges(recording: SampledSignal, replica: SampledSignal,
                         layout: SequenceLayout, policy: PeakPolicy | None = None,
                         c: float = SPEED_OF_SOUND, epoch: int = 0) -> PseudorangeSet:
    """Recover one pseudorange per channel from a recorded sequence.

    The pipeline is: matched filter, analytic envelope, then first-peak
    selection per channel window.  The first detectable peak anywhere in the
    envelope anchors channel 0's window (a receiver clock offset slides the
    whole sequence, so windows cannot be fixed a priori); window i is centered
    one stagger per channel later, guarded to half a stagger each side so
    channels cannot steal each other's peaks.

    Peak indices are corrected for the correlation alignment offset
    (replica length - 1) and for channel i's known ``i * stagger`` transmit
    delay, leaving the arrival sample that ``c / F_s`` converts to meters.

    Raises :class:`DetectionError` naming the channels that produced no
    detection.
    """
    policy = policy or PeakPolicy()
    series = matched_filter(recording, replica, normalize=True)
    env = _analytic_envelope(series.values)
    env_series = CorrelationSeries(env / env.max(), series.sample_rate, normalized=True)

    m1 = len(replica) - 1
    stagger = layout.stagger_samples
    anchor = pick_first_peak(env_series, PeakPolicy(
        threshold=policy.threshold,
        persistence_ratio=policy.persistence_ratio))
    if anchor is None:
        raise DetectionError(
            "no chirp detected anywhere in the recording",
            missing=range(layout.n_channels),
        )

    peaks = []
    missing = []
    half = stagger // 2
    for i in range(layout.n_channels):
        center = anchor + i * stagger
        win = (center - half, center + half)
        p = pick_first_peak(env_series, PeakPolicy(
            threshold=policy.threshold,
            search_window=win,
            persistence_ratio=policy.persistence_ratio))
        if p is None:
            missing.append(i)
            continue
        peaks.append(p - m1 - i * stagger)
    if missing:
        raise DetectionError(
            f"no detection for speaker channel(s) {missing}", missing=missing
        )
    return PseudorangeSet(np.array(peaks), c=c,
                          sample_rate=recording.sample_rate, epoch=epoch)
