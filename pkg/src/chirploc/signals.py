"""Chirp synthesis, transmission-sequence assembly, and WAV I/O.

A transmission sequence is one linear chirp per speaker channel, staggered at
a known sample offset so the receiver can attribute correlation peaks to
channels.  An optional shorter command chirp can trail the ranging chirps.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field

import numpy as np
from scipy.signal.windows import tukey

from .errors import ConfigError, DataError

DEFAULT_SAMPLE_RATE = 48000


@dataclass(frozen=True)
class ChirpSpec:
    """Parameters of a linear frequency sweep.

    ``duration * sample_rate`` is rounded to the nearest whole sample; the
    resulting count is exposed as :attr:`n_samples` rather than silently
    truncated.
    """

    f_start: float
    f_end: float
    duration: float
    sample_rate: float = DEFAULT_SAMPLE_RATE
    amplitude: float = 1.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError(f"chirp duration must be positive, got {self.duration}")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.f_start <= 0 or self.f_end <= 0:
            raise ConfigError(
                f"chirp frequencies must be positive, got {self.f_start}..{self.f_end}"
            )
        nyq = self.sample_rate / 2.0
        if self.f_start >= nyq or self.f_end >= nyq:
            raise ConfigError(
                f"chirp band {self.f_start}..{self.f_end} Hz violates the "
                f"Nyquist limit {nyq} Hz at {self.sample_rate} Hz"
            )
        if not 0.0 < self.amplitude <= 1.0:
            raise ConfigError(f"amplitude must be in (0, 1], got {self.amplitude}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


@dataclass(frozen=True)
class SampledSignal:
    """A uniformly sampled real waveform; the common currency between modules."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise DataError("signal must be a non-empty 1-D sample array")
        if not np.all(np.isfinite(arr)):
            raise DataError("signal contains non-finite samples")
        if self.sample_rate <= 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class SequenceLayout:
    """Timing of a multi-speaker transmission sequence.

    Channel i's ranging chirp starts at sample ``i * stagger_samples``.  The
    optional command chirp starts ``command_slot_offset`` samples after the
    last ranging chirp's onset.  ``period`` is the wall-clock repetition
    interval of the whole sequence.
    """

    n_channels: int = 4
    stagger_samples: int = 9600
    period: float = 10.0
    command_slot_offset: int = 9600

    def __post_init__(self):
        if self.n_channels < 4:
            raise ConfigError(
                f"at least 4 channels are required for a position fix, got {self.n_channels}"
            )
        if self.stagger_samples <= 0:
            raise ConfigError("stagger_samples must be positive")
        if self.command_slot_offset <= 0:
            raise ConfigError("command_slot_offset must be positive")
        if self.period <= 0:
            raise ConfigError("period must be positive")

    def onset(self, channel: int) -> int:
        return channel * self.stagger_samples

    @property
    def last_onset(self) -> int:
        return (self.n_channels - 1) * self.stagger_samples

    @property
    def command_onset(self) -> int:
        return self.last_onset + self.command_slot_offset


def generate_chirp(spec: ChirpSpec, taper: float = 0.0) -> SampledSignal:
    """Synthesize a linear up- or down-chirp.

    Parameters
    ----------
    spec : ChirpSpec
        Sweep band, duration, rate, and peak amplitude.
    taper : float, optional
        Raised-cosine edge fraction in [0, 1] (Tukey window shape parameter).
        0 keeps the rectangular envelope.

    Returns
    -------
    SampledSignal
        ``sin(2*pi*(f0*t + k/2*t^2))`` with ``k = (f1-f0)/T``, scaled to
        ``spec.amplitude``.  Phase starts at zero, so the waveform is a
        deterministic fixture for a given spec.
    """
    if not 0.0 <= taper <= 1.0:
        raise ConfigError(f"taper must be in [0, 1], got {taper}")
    n = spec.n_samples
    if n < 2:
        raise ConfigError(f"chirp of {n} samples is too short; increase duration")
    t = np.arange(n) / spec.sample_rate
    sweep_rate = (spec.f_end - spec.f_start) / spec.duration
    phase = 2.0 * np.pi * (spec.f_start * t + 0.5 * sweep_rate * t * t)
    samples = spec.amplitude * np.sin(phase)
    if taper > 0.0:
        samples = samples * tukey(n, alpha=taper)
    return SampledSignal(samples, spec.sample_rate)


def assemble_sequence(
    chirp: SampledSignal,
    layout: SequenceLayout,
    command: SampledSignal | None = None,
) -> list[SampledSignal]:
    """Place one ranging chirp per channel at the layout's staggered onsets.

    Channel i's chirp onset lands at sample ``i * stagger_samples``; chirps
    must not overlap in time, so the stagger has to be at least the chirp
    length (equality — back-to-back chirps — is accepted).  A command chirp,
    when given, is written onto channel 0 at ``layout.command_onset``.

    Returns one :class:`SampledSignal` per channel, all of equal length.
    """
    m = len(chirp)
    if layout.stagger_samples < m:
        raise ConfigError(
            f"stagger of {layout.stagger_samples} samples overlaps the "
            f"{m}-sample chirp; need stagger >= chirp length"
        )
    total = layout.last_onset + m
    if command is not None:
        if command.sample_rate != chirp.sample_rate:
            raise ConfigError("command chirp sample_rate differs from ranging chirp")
        if layout.command_slot_offset < m:
            raise ConfigError(
                f"command_slot_offset {layout.command_slot_offset} overlaps the "
                f"last ranging chirp ({m} samples)"
            )
        total = max(total, layout.command_onset + len(command))

    channels = []
    for i in range(layout.n_channels):
        buf = np.zeros(total)
        on = layout.onset(i)
        buf[on:on + m] = chirp.samples
        if command is not None and i == 0:
            co = layout.command_onset
            buf[co:co + len(command)] += command.samples
        channels.append(SampledSignal(buf, chirp.sample_rate))
    return channels


def _as_channel_list(signals) -> list[SampledSignal]:
    if isinstance(signals, SampledSignal):
        return [signals]
    chans = list(signals)
    if not chans:
        raise DataError("no channels to write")
    return chans


def write_wav(signals, path) -> None:
    """Write a mono signal or a per-channel set as 16-bit PCM RIFF.

    All channels must share length and sample rate.  Samples are expected in
    [-1, 1]; values outside are clipped to full scale.
    """
    chans = _as_channel_list(signals)
    rate = chans[0].sample_rate
    length = len(chans[0])
    for i, ch in enumerate(chans):
        if ch.sample_rate != rate:
            raise DataError(f"channel {i} sample_rate {ch.sample_rate} != {rate}")
        if len(ch) != length:
            raise DataError(f"channel {i} length {len(ch)} != {length}")
    data = np.stack([ch.samples for ch in chans], axis=1)
    pcm = np.clip(np.round(data * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(len(chans))
        w.setsampwidth(2)
        w.setframerate(int(round(rate)))
        w.writeframes(pcm.tobytes())


def read_wav(path):
    """Read a 16-bit PCM RIFF file written by :func:`write_wav`.

    Returns a single :class:`SampledSignal` for mono files, else a list with
    one signal per channel.
    """
    try:
        with wave.open(str(path), "rb") as w:
            if w.getcomptype() != "NONE":
                raise DataError(
                    f"unsupported WAV compression type {w.getcomptype()!r} "
                    "(only uncompressed PCM is handled)"
                )
            width = w.getsampwidth()
            if width != 2:
                raise DataError(
                    f"unsupported WAV sample width {width * 8} bit (expected 16 bit PCM)"
                )
            n_ch = w.getnchannels()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise DataError(f"not a RIFF/WAV file: {exc}") from exc
    pcm = np.frombuffer(raw, dtype="<i2").reshape(-1, n_ch)
    if pcm.size == 0:
        raise DataError("WAV file contains no frames")
    data = pcm.astype(float) / 32767.0
    chans = [SampledSignal(data[:, i], rate) for i in range(n_ch)]
    return chans[0] if n_ch == 1 else chans
