"""Per-block stationary-sinusoid estimation.

Each length-N block is treated as a stationary complex sinusoid and processed
by an iterative peel loop:

  1. window the (residual) block,
  2. locate the strongest FFT bin and compare it against a median-based noise
     floor; stop when nothing clears the detection threshold,
  3. refine the frequency by maximizing |sum_k y_w[k] * exp(-j*2*pi*f*t_k)|
     over a uniform grid finer than the bin spacing,
  4. read magnitude and phase off the same correlation, undo the window's
     coherent gain,
  5. subtract the estimated sinusoid from the unwindowed residual and repeat.

Times t_k are referenced to the block center, so each estimate's phase is the
carrier phase at the center of its block.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from .iq import SampleStream

WINDOW_NAMES = ("triangular", "hamming", "rectangular")
OVERLAP_MODES = ("none", "half")


def wrap_phase(phi: float) -> float:
    """Reduce an angle into the principal range (-pi, pi]."""
    out = (phi + np.pi) % (2.0 * np.pi) - np.pi
    if out <= -np.pi:
        out += 2.0 * np.pi
    return float(out)


@dataclass(frozen=True)
class StsaConfig:
    """Estimator configuration.

    fine_grid_fraction is the frequency search step as a fraction of one FFT
    bin; fine_search_span_bins is the half-width of the search around the
    coarse peak.  max_peel bounds how many sinusoids are extracted per block
    (the detection threshold is the primary stop).
    """

    block_len_n: int = 256
    window: str = "triangular"
    detect_threshold_db: float = 10.0
    fine_grid_fraction: float = 0.01
    fine_search_span_bins: float = 1.0
    max_peel: int = 8
    overlap: str = "none"

    def __post_init__(self):
        if self.block_len_n < 8:
            raise ValueError("block_len_n must be at least 8")
        if self.window not in WINDOW_NAMES:
            raise ValueError(f"window must be one of {WINDOW_NAMES}")
        if not 0 < self.fine_grid_fraction <= 1:
            raise ValueError("fine_grid_fraction must lie in (0, 1]")
        if self.fine_search_span_bins <= 0:
            raise ValueError("fine_search_span_bins must be positive")
        if self.max_peel < 1:
            raise ValueError("max_peel must be at least 1")
        if self.overlap not in OVERLAP_MODES:
            raise ValueError(f"overlap must be one of {OVERLAP_MODES}")
        if self.overlap == "half" and self.block_len_n % 2:
            raise ValueError("half overlap requires an even block length")

    @property
    def hop(self) -> int:
        return self.block_len_n if self.overlap == "none" else self.block_len_n // 2

    def bin_width_hz(self, sample_rate_hz: float) -> float:
        return sample_rate_hz / self.block_len_n

    def fine_step_hz(self, sample_rate_hz: float) -> float:
        return self.fine_grid_fraction * self.bin_width_hz(sample_rate_hz)

    def check_short_term(self, sample_rate_hz: float, signal_bandwidth_hz: float) -> bool:
        """Warn when the block is too long for a signal of the given bandwidth.

        The stationary approximation needs roughly Fs >= N*B; returns True
        when that holds.
        """
        ok = self.block_len_n <= sample_rate_hz / signal_bandwidth_hz
        if not ok:
            warnings.warn(
                f"block_len_n={self.block_len_n} exceeds Fs/B="
                f"{sample_rate_hz / signal_bandwidth_hz:.0f}; "
                "short-term sinusoidal condition violated"
            )
        return ok


@dataclass(frozen=True)
class SinusoidEstimate:
    """One stationary-sinusoid fit, phase referenced to the block center."""

    amp: float
    freq_hz: float
    phase_rad: float
    block_index: int
    t_center_s: float
    peel_rank: int


@dataclass(frozen=True)
class BlockEstimates:
    """All sinusoids peeled from one block, in extraction order."""

    block_index: int
    estimates: tuple
    residual_power: float
    noise_floor: float


class PeakDetection(NamedTuple):
    coarse_bin: int
    peak_power: float
    noise_floor: float


@lru_cache(maxsize=None)
def window_values(window: str, n: int) -> np.ndarray:
    if window == "triangular":
        k = np.arange(n, dtype=np.float64)
        w = 1.0 - np.abs(2.0 * k - (n - 1)) / (n - 1)
    elif window == "hamming":
        w = np.hamming(n)
    elif window == "rectangular":
        w = np.ones(n)
    else:
        raise ValueError(f"window must be one of {WINDOW_NAMES}")
    w.flags.writeable = False
    return w


@lru_cache(maxsize=None)
def _window_mean(window: str, n: int) -> float:
    return float(np.mean(window_values(window, n)))


@lru_cache(maxsize=None)
def _centered_times(n: int, sample_rate_hz: float) -> np.ndarray:
    t = (np.arange(n, dtype=np.float64) - (n - 1) / 2.0) / sample_rate_hz
    t.flags.writeable = False
    return t


@lru_cache(maxsize=8)
def _correlation_bank(n, sample_rate_hz, fraction, span_bins):
    """Fine-grid frequency offsets (Hz) and the matching probe matrix.

    Row m of the matrix is exp(-j*2*pi*offset[m]*t_k); the search for any
    coarse frequency reuses it after mixing the block down by the coarse
    frequency.
    """
    bin_width = sample_rate_hz / n
    n_steps = int(round(span_bins / fraction))
    offsets_hz = np.arange(-n_steps, n_steps + 1) * (fraction * bin_width)
    t = _centered_times(n, sample_rate_hz)
    bank = np.exp(-2j * np.pi * np.outer(offsets_hz, t))
    offsets_hz.flags.writeable = False
    bank.flags.writeable = False
    return offsets_hz, bank


def apply_window(block: np.ndarray, window: str) -> np.ndarray:
    """Elementwise product with the named window (peak 1 at the center)."""
    block = np.asarray(block)
    return block * window_values(window, block.size)


def detect_peak(windowed_block: np.ndarray, threshold_db: float) -> Optional[PeakDetection]:
    """Strongest FFT bin, if it clears the SNR threshold over the median floor.

    Returns None when nothing is detected; an all-zero block never detects.
    """
    power = np.abs(np.fft.fft(windowed_block)) ** 2 / windowed_block.size**2
    coarse_bin = int(np.argmax(power))
    peak = float(power[coarse_bin])
    floor = float(np.median(power))
    if peak == 0.0:
        return None
    if floor > 0.0 and peak / floor < 10.0 ** (threshold_db / 10.0):
        return None
    return PeakDetection(coarse_bin, peak, floor)


def bin_to_freq_hz(coarse_bin: int, n: int, sample_rate_hz: float) -> float:
    """Center frequency of an FFT bin in baseband Hz (DFT bin ordering)."""
    f = coarse_bin * sample_rate_hz / n
    if f >= sample_rate_hz / 2:
        f -= sample_rate_hz
    return f


def refine_frequency(
    windowed_block: np.ndarray,
    coarse_freq_hz: float,
    sample_rate_hz: float,
    config: StsaConfig,
) -> float:
    """Grid argmax of the correlation magnitude around the coarse frequency.

    The grid spans coarse +/- fine_search_span_bins bins in steps of
    fine_grid_fraction of a bin; ties break toward the frequency nearest the
    coarse estimate.
    """
    n = windowed_block.size
    offsets_hz, bank = _correlation_bank(
        n, sample_rate_hz, config.fine_grid_fraction, config.fine_search_span_bins
    )
    t = _centered_times(n, sample_rate_hz)
    mixed = windowed_block * np.exp(-2j * np.pi * coarse_freq_hz * t)
    mags = np.abs(bank @ mixed)
    peak = mags.max()
    candidates = np.nonzero(mags == peak)[0]
    best = min(candidates, key=lambda i: (abs(offsets_hz[i]), offsets_hz[i]))
    return coarse_freq_hz + float(offsets_hz[best])


def estimate_amp_phase(
    windowed_block: np.ndarray,
    freq_hz: float,
    window: str,
    sample_rate_hz: float,
) -> tuple[float, float]:
    """Magnitude and center phase by correlation at the given frequency.

    c = (1/N) * sum_k y_w[k] * exp(-j*2*pi*f*t_k); the window's coherent gain
    mean(w) is divided back out so a noiseless matched tone returns its true
    amplitude (factor 2 for the triangular window).
    """
    n = windowed_block.size
    t = _centered_times(n, sample_rate_hz)
    c = np.dot(windowed_block, np.exp(-2j * np.pi * freq_hz * t)) / n
    amp = abs(c) / _window_mean(window, n)
    return float(amp), wrap_phase(float(np.angle(c)))


def subtract_sinusoid(
    block: np.ndarray, est: SinusoidEstimate, sample_rate_hz: float
) -> np.ndarray:
    """Remove est from an unwindowed block (times centered on the block)."""
    t = _centered_times(block.size, sample_rate_hz)
    tone = est.amp * np.exp(1j * (2.0 * np.pi * est.freq_hz * t + est.phase_rad))
    return block - tone


def estimate_block(
    block: np.ndarray,
    config: StsaConfig,
    sample_rate_hz: float,
    t_center_s: float = 0.0,
    block_index: int = 0,
) -> BlockEstimates:
    """Run the full peel loop on one block.

    Each iteration re-windows the current unwindowed residual, so earlier
    subtractions sharpen later detections.  Stops at the detection threshold
    or after max_peel extractions.
    """
    block = np.asarray(block, dtype=np.complex128)
    if block.size != config.block_len_n:
        raise ValueError(
            f"block length {block.size} != configured block_len_n {config.block_len_n}"
        )
    residual = block.copy()
    estimates = []
    for rank in range(config.max_peel):
        windowed = apply_window(residual, config.window)
        detection = detect_peak(windowed, config.detect_threshold_db)
        if detection is None:
            break
        coarse = bin_to_freq_hz(detection.coarse_bin, block.size, sample_rate_hz)
        freq = refine_frequency(windowed, coarse, sample_rate_hz, config)
        amp, phase = estimate_amp_phase(windowed, freq, config.window, sample_rate_hz)
        if abs(freq) >= sample_rate_hz / 2:
            # fold the search overshoot at the Nyquist edge back into the
            # principal span; with center-referenced times a full-rate shift
            # also rotates the phase by pi*(N-1)
            freq -= np.sign(freq) * sample_rate_hz
            phase = wrap_phase(phase + np.pi * ((block.size - 1) % 2))
        est = SinusoidEstimate(amp, freq, phase, block_index, t_center_s, rank)
        residual = subtract_sinusoid(residual, est, sample_rate_hz)
        estimates.append(est)
    final_windowed = apply_window(residual, config.window)
    floor = float(
        np.median(np.abs(np.fft.fft(final_windowed)) ** 2 / block.size**2)
    )
    residual_power = float(np.mean(np.abs(residual) ** 2))
    return BlockEstimates(block_index, tuple(estimates), residual_power, floor)


def block_center_time(stream: SampleStream, config: StsaConfig, block_index: int) -> float:
    start = block_index * config.hop
    return stream.t0_s + (start + (config.block_len_n - 1) / 2.0) / stream.sample_rate_hz


def process_stream(stream: SampleStream, config: StsaConfig) -> list[BlockEstimates]:
    """Estimate every complete block of the stream (tail samples are dropped)."""
    n = config.block_len_n
    hop = config.hop
    if len(stream) < n:
        return []
    results = []
    for index, start in enumerate(range(0, len(stream) - n + 1, hop)):
        block = stream.samples[start : start + n]
        results.append(
            estimate_block(
                block,
                config,
                stream.sample_rate_hz,
                t_center_s=block_center_time(stream, config, index),
                block_index=index,
            )
        )
    return results


def write_estimates_csv(blocks: list[BlockEstimates], path) -> None:
    """Flat per-estimate table: block_index, t_center_s, peel_rank, amp, freq_hz, phase_rad."""
    with open(path, "w") as fh:
        fh.write("block_index,t_center_s,peel_rank,amp,freq_hz,phase_rad\n")
        for blk in blocks:
            for e in blk.estimates:
                fh.write(
                    f"{e.block_index},{e.t_center_s:.9f},{e.peel_rank},"
                    f"{e.amp:.9g},{e.freq_hz:.6f},{e.phase_rad:.9f}\n"
                )
