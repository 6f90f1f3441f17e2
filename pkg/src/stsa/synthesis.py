"""Track assembly, waveform synthesis, and coherent subtraction.

Per-block sinusoid estimates are chained into tracks by greedy
nearest-frequency association.  Each track is rendered into a noise-free
waveform: between the centers of adjacent blocks the two blocks' sinusoids
are cross-faded linearly, which keeps the waveform continuous while leaving
each block's own estimate exact at its center.  The rendered waveform is then
subtracted sample-by-sample from the original stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockproc import BlockEstimates, SinusoidEstimate, StsaConfig
from .iq import SampleStream

DEFAULT_JUMP_LIMIT_BINS = 0.5


@dataclass(frozen=True)
class Track:
    """Time-ordered chain of per-block estimates belonging to one signal."""

    entries: tuple
    signal_id: int

    def __post_init__(self):
        indices = [e.block_index for e in self.entries]
        if any(later <= earlier for earlier, later in zip(indices, indices[1:])):
            raise ValueError("track block indices must be strictly increasing")

    def total_energy(self) -> float:
        return float(sum(e.amp**2 for e in self.entries))

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class SynthesizedWaveform:
    """Rendered waveform aligned to the original stream.

    samples are zero wherever coverage is False, so cancellation is the
    identity outside the rendered span.
    """

    samples: np.ndarray
    coverage: np.ndarray


def assemble_tracks(
    all_blocks: list[BlockEstimates],
    config: StsaConfig,
    sample_rate_hz: float,
    jump_limit_bins: float = DEFAULT_JUMP_LIMIT_BINS,
) -> list[Track]:
    """Greedy nearest-frequency association of block estimates into tracks.

    Within a block, estimates are matched in peel order; each joins the open
    track whose last frequency is nearest, provided the jump stays under
    jump_limit_bins bins per elapsed block, otherwise it starts a new track.
    A track accepts at most one estimate per block.
    """
    bin_width = config.bin_width_hz(sample_rate_hz)
    open_tracks: list[dict] = []
    last_index = None
    for blk in all_blocks:
        if last_index is not None and blk.block_index <= last_index:
            raise ValueError("blocks must be supplied in increasing index order")
        last_index = blk.block_index
        taken = set()
        for est in blk.estimates:
            best = None
            best_dist = None
            for ti, trk in enumerate(open_tracks):
                if ti in taken:
                    continue
                gap = est.block_index - trk["last_block"]
                limit = jump_limit_bins * bin_width * gap
                dist = abs(est.freq_hz - trk["last_freq"])
                if dist < limit and (best_dist is None or dist < best_dist):
                    best, best_dist = ti, dist
            if best is None:
                open_tracks.append(
                    {"entries": [est], "last_freq": est.freq_hz, "last_block": est.block_index}
                )
                taken.add(len(open_tracks) - 1)
            else:
                trk = open_tracks[best]
                trk["entries"].append(est)
                trk["last_freq"] = est.freq_hz
                trk["last_block"] = est.block_index
                taken.add(best)
    return [
        Track(tuple(trk["entries"]), signal_id)
        for signal_id, trk in enumerate(open_tracks)
    ]


def _tone_at(est: SinusoidEstimate, sample_indices: np.ndarray, center_index: float,
             sample_rate_hz: float) -> np.ndarray:
    dt = (sample_indices - center_index) / sample_rate_hz
    return est.amp * np.exp(1j * (2.0 * np.pi * est.freq_hz * dt + est.phase_rad))


def synthesize(
    track: Track,
    stream_meta: tuple[int, float, float],
    config: StsaConfig,
) -> SynthesizedWaveform:
    """Render one track into a waveform on the stream's sample grid.

    Between the centers of estimates in adjacent blocks the two sinusoids are
    blended as (1-a)*x_i + a*x_j with a running 0 -> 1; the outer half-blocks
    use the nearest estimate unblended.  Detection gaps wider than one block
    step are left at zero (coverage False) rather than bridged.
    """
    if not track.entries:
        raise ValueError("cannot synthesize an empty track")
    length, sample_rate_hz, _t0 = stream_meta
    n = config.block_len_n
    hop = config.hop
    out = np.zeros(length, dtype=np.complex128)
    covered = np.zeros(length, dtype=bool)

    def center_of(e):
        return e.block_index * hop + (n - 1) / 2.0

    def fill(lo: int, hi: int, values: np.ndarray):
        lo = max(lo, 0)
        hi = min(hi, length)
        if lo < hi:
            out[lo:hi] = values[: hi - lo]
            covered[lo:hi] = True

    entries = track.entries
    first, last = entries[0], entries[-1]

    # Leading half-block: nearest (first) estimate, unblended.
    start0 = first.block_index * hop
    c0 = int(np.ceil(center_of(first)))
    idx = np.arange(start0, min(c0, length))
    fill(start0, c0, _tone_at(first, idx, center_of(first), sample_rate_hz))

    for ea, eb in zip(entries, entries[1:]):
        ca, cb = center_of(ea), center_of(eb)
        ia, ib = int(np.ceil(ca)), int(np.ceil(cb))
        if eb.block_index - ea.block_index == 1:
            idx = np.arange(ia, ib, dtype=np.float64)
            alpha = (idx - ca) / (cb - ca)
            blend = (1.0 - alpha) * _tone_at(ea, idx, ca, sample_rate_hz) + alpha * _tone_at(
                eb, idx, cb, sample_rate_hz
            )
            fill(ia, ib, blend)
        else:
            # Gap: each side covers only its own block, zeros in between.
            end_a = ea.block_index * hop + n
            idx = np.arange(ia, min(end_a, length), dtype=np.float64)
            fill(ia, end_a, _tone_at(ea, idx, ca, sample_rate_hz))
            start_b = eb.block_index * hop
            idx = np.arange(start_b, min(ib, length), dtype=np.float64)
            fill(start_b, ib, _tone_at(eb, idx, cb, sample_rate_hz))

    # Trailing half-block.
    c_last = center_of(last)
    i_last = int(np.ceil(c_last))
    end_last = last.block_index * hop + n
    idx = np.arange(i_last, min(end_last, length), dtype=np.float64)
    fill(i_last, end_last, _tone_at(last, idx, c_last, sample_rate_hz))

    return SynthesizedWaveform(out, covered)


def combine_waveforms(waveforms: list[SynthesizedWaveform], length: int) -> SynthesizedWaveform:
    """Sum per-track waveforms into one cancelable estimate."""
    total = np.zeros(length, dtype=np.complex128)
    covered = np.zeros(length, dtype=bool)
    for w in waveforms:
        total += w.samples
        covered |= w.coverage
    return SynthesizedWaveform(total, covered)


def cancel(original: SampleStream, synthesized: SynthesizedWaveform) -> SampleStream:
    """Coherent subtraction: exact elementwise difference."""
    if len(original) != synthesized.samples.size:
        raise ValueError(
            f"length mismatch: stream has {len(original)} samples, "
            f"waveform has {synthesized.samples.size}"
        )
    return SampleStream(
        original.samples - synthesized.samples, original.sample_rate_hz, original.t0_s
    )


def write_tracks_csv(tracks: list[Track], path) -> None:
    """Per-entry table: signal_id, block_index, t_center_s, peel_rank, amp, freq_hz, phase_rad."""
    with open(path, "w") as fh:
        fh.write("signal_id,block_index,t_center_s,peel_rank,amp,freq_hz,phase_rad\n")
        for trk in tracks:
            for e in trk.entries:
                fh.write(
                    f"{trk.signal_id},{e.block_index},{e.t_center_s:.9f},{e.peel_rank},"
                    f"{e.amp:.9g},{e.freq_hz:.6f},{e.phase_rad:.9f}\n"
                )
