"""One-way command link: classify which short chirp trails the sequence.

Commands ride in frequency bands disjoint from each other and from the
ranging chirp, so a normalized matched-filter score separates them cleanly
even buried in noise.  Classification is a pure decision; acting on it is
the caller's business.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError, DataError
from .signals import ChirpSpec, SampledSignal, generate_chirp

RANGING_BAND = (4500.0, 8500.0)

COMMAND_IDS = ("forward", "left", "right")


def _band(spec: ChirpSpec) -> tuple[float, float]:
    return (min(spec.f_start, spec.f_end), max(spec.f_start, spec.f_end))


@dataclass(frozen=True)
class CommandCodebook:
    """Command identifiers mapped to their chirp specs.

    Construction rejects codebooks whose chirp bands overlap each other or
    the ranging band — overlapping bands would make the matched-filter
    scores ambiguous by design, not by noise.
    """

    entries: tuple
    detection_threshold: float = 0.6
    ranging_band: tuple[float, float] = RANGING_BAND

    def __post_init__(self):
        if not 0.0 < self.detection_threshold < 1.0:
            raise ConfigError("detection_threshold must be in (0, 1)")
        entries = tuple(self.entries)
        if not entries:
            raise ConfigError("codebook has no entries")
        bands = {cid: _band(spec) for cid, spec in entries}
        if len(bands) != len(entries):
            raise ConfigError("duplicate command ids in codebook")
        named = list(bands.items()) + [("ranging", self.ranging_band)]
        for i, (id_a, a) in enumerate(named):
            for id_b, b in named[i + 1:]:
                if a[0] < b[1] and b[0] < a[1]:
                    raise ConfigError(
                        f"chirp bands overlap: {id_a} {a} and {id_b} {b}"
                    )
        object.__setattr__(self, "entries", entries)

    def replicas(self) -> dict[str, SampledSignal]:
        return {cid: generate_chirp(spec) for cid, spec in self.entries}

    def margins(self) -> dict[str, float]:
        """Clean-signal separation per command: self-match score (1.0) minus
        the best cross-match score of its chirp against the other replicas."""
        reps = self.replicas()
        out = {}
        for cid, sig in reps.items():
            cross = max(
                _ncc_peak(sig.samples, other.samples)
                for oid, other in reps.items() if oid != cid
            )
            out[cid] = 1.0 - cross
        return out


def default_codebook() -> CommandCodebook:
    """Three 5 ms command chirps in disjoint bands below the ranging sweep."""
    return CommandCodebook(entries=(
        ("forward", ChirpSpec(500.0, 1500.0, 0.005)),
        ("left", ChirpSpec(1800.0, 2800.0, 0.005)),
        ("right", ChirpSpec(3100.0, 4100.0, 0.005)),
    ))


@dataclass(frozen=True)
class CommandDecision:
    """Outcome of one classification: winning id (or None) and all scores.

    The score always ships with the decision; whether a sub-threshold epoch
    means "no command sent" or "command missed" is policy the caller owns.
    """

    command: str | None
    score: float
    scores: dict[str, float]
    epoch: int = 0


def _ncc_peak(x: np.ndarray, s: np.ndarray) -> float:
    """Peak of the normalized sliding cross-correlation of s within x.

    Normalizing by both the replica energy and the local segment energy makes
    the score amplitude-invariant, with an exact replica scoring 1.0.
    Segments with essentially no energy score 0 rather than dividing by a
    vanishing norm.
    """
    if len(s) > len(x):
        return 0.0
    corr = fftconvolve(x, s[::-1], mode="valid")
    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    seg = csum[len(s):] - csum[:-len(s)]
    den = np.sqrt(seg * float(s @ s))
    score = np.zeros_like(corr)
    top = den.max()
    if top <= 0.0:
        return 0.0
    ok = den > 1e-12 * top
    score[ok] = np.abs(corr[ok]) / den[ok]
    return float(score.max())


def classify_command(recording: SampledSignal, codebook: CommandCodebook,
                     slot: tuple[int, int] | None = None,
                     epoch: int = 0) -> CommandDecision:
    """Score the slot against every codebook replica; best score wins.

    Returns a :class:`CommandDecision` whose ``command`` is None when no
    replica's normalized peak reaches the detection threshold (silence, pure
    noise, or a chirp from outside the codebook).
    """
    lo, hi = slot if slot is not None else (0, len(recording))
    if not 0 <= lo < hi <= len(recording):
        raise DataError(f"slot ({lo}, {hi}) outside recording of {len(recording)}")
    x = recording.samples[lo:hi]
    scores = {}
    for cid, spec in codebook.entries:
        rep = generate_chirp(spec)
        if rep.sample_rate != recording.sample_rate:
            raise DataError("codebook and recording sample rates differ")
        scores[cid] = _ncc_peak(x, rep.samples)
    best = max(scores, key=scores.get)
    winner = best if scores[best] >= codebook.detection_threshold else None
    return CommandDecision(command=winner, score=scores[best], scores=scores,
                           epoch=epoch)
