"""Spectral and suppression measurement.

Spectra are averaged periodograms over non-overlapping rectangular segments,
normalized as power spectral density so that sum(power) * bin_width equals
the mean-square sample power (Parseval).  Suppression reports compare band
powers before and after cancellation and check that power outside the band
was left alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .iq import SampleStream


@dataclass(frozen=True)
class SpectrumFrame:
    """Averaged power spectral density, bins in ascending frequency order."""

    freqs_hz: np.ndarray
    power: np.ndarray
    resolution_hz: float
    averaging_count: int


@dataclass(frozen=True)
class DynamicSpectrum:
    """Waterfall: one averaged spectrum per time cell (rows are time)."""

    times_s: np.ndarray
    freqs_hz: np.ndarray
    power: np.ndarray
    t_resolution_s: float
    f_resolution_hz: float


@dataclass(frozen=True)
class SuppressionReport:
    band_hz: tuple[float, float]
    power_before: float
    power_after: float
    suppression_db: float
    out_of_band_delta_db: float
    snr_in_band_db: float | None = None


def _segment_length(sample_rate_hz: float, resolution_hz: float) -> int:
    if resolution_hz <= 0:
        raise ValueError("resolution_hz must be positive")
    seg = int(round(sample_rate_hz / resolution_hz))
    return max(seg, 1)


def _averaged_psd(segments: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    seg_len = segments.shape[-1]
    spec = np.fft.fft(segments, axis=-1)
    psd = np.mean(np.abs(spec) ** 2, axis=-2) / (seg_len * sample_rate_hz)
    return np.fft.fftshift(psd, axes=-1)


def power_spectrum(stream: SampleStream, resolution_hz: float) -> SpectrumFrame:
    """Average the periodogram of non-overlapping segments at the given resolution."""
    seg_len = _segment_length(stream.sample_rate_hz, resolution_hz)
    n_seg = len(stream) // seg_len
    if n_seg == 0:
        raise ValueError(
            f"stream too short: need at least {seg_len} samples for {resolution_hz} Hz resolution"
        )
    segments = stream.samples[: n_seg * seg_len].reshape(n_seg, seg_len)
    psd = _averaged_psd(segments, stream.sample_rate_hz)
    freqs = np.fft.fftshift(np.fft.fftfreq(seg_len, d=1.0 / stream.sample_rate_hz))
    return SpectrumFrame(freqs, psd, stream.sample_rate_hz / seg_len, n_seg)


def dynamic_spectrum(stream: SampleStream, t_res_s: float, f_res_hz: float) -> DynamicSpectrum:
    """Tile the stream into time cells and average a spectrum inside each."""
    seg_len = _segment_length(stream.sample_rate_hz, f_res_hz)
    cell = int(round(t_res_s * stream.sample_rate_hz))
    if cell < seg_len:
        raise ValueError(
            f"infeasible resolution pair: {t_res_s} s cells hold {cell} samples, "
            f"fewer than the {seg_len}-sample segments {f_res_hz} Hz requires"
        )
    rows = len(stream) // cell
    if rows == 0:
        raise ValueError("stream shorter than one time cell")
    segs_per_cell = cell // seg_len
    used = stream.samples[: rows * cell].reshape(rows, cell)
    segments = used[:, : segs_per_cell * seg_len].reshape(rows, segs_per_cell, seg_len)
    psd = _averaged_psd(segments, stream.sample_rate_hz)
    freqs = np.fft.fftshift(np.fft.fftfreq(seg_len, d=1.0 / stream.sample_rate_hz))
    times = stream.t0_s + (np.arange(rows) + 0.5) * cell / stream.sample_rate_hz
    return DynamicSpectrum(times, freqs, psd, cell / stream.sample_rate_hz,
                           stream.sample_rate_hz / seg_len)


def frame_band_power(frame: SpectrumFrame, band_hz: tuple[float, float]) -> float:
    """Integrate the PSD over [lo, hi] (band edges inclusive)."""
    lo, hi = band_hz
    if lo >= hi:
        raise ValueError(f"inverted band ({lo}, {hi})")
    mask = (frame.freqs_hz >= lo) & (frame.freqs_hz <= hi)
    return float(np.sum(frame.power[mask]) * frame.resolution_hz)


def band_power(stream: SampleStream, band_hz: tuple[float, float],
               resolution_hz: float | None = None) -> float:
    """Band-integrated power.

    With resolution_hz None a single full-length periodogram is used, which
    keeps Parseval exact over the whole stream.
    """
    lo, hi = band_hz
    nyq = stream.sample_rate_hz / 2
    if not (-nyq <= lo < hi <= nyq):
        raise ValueError(f"band ({lo}, {hi}) outside Nyquist span ±{nyq}")
    if resolution_hz is None:
        resolution_hz = stream.sample_rate_hz / len(stream)
    return frame_band_power(power_spectrum(stream, resolution_hz), band_hz)


def _log_ratio_db(numerator: float, denominator: float) -> float:
    # Computed as a difference of logs so that swapping the arguments negates
    # the result exactly.
    if numerator == 0.0 and denominator == 0.0:
        return 0.0
    if denominator == 0.0:
        return math.inf
    if numerator == 0.0:
        return -math.inf
    return 10.0 * (math.log10(numerator) - math.log10(denominator))


def suppression_report(
    original: SampleStream,
    residual: SampleStream,
    band_hz: tuple[float, float],
    noise_power_in_band: float | None = None,
    resolution_hz: float = 125.0,
) -> SuppressionReport:
    """Before/after band powers plus an out-of-band distortion check.

    The out-of-band comparison excludes a guard of one analysis bin on each
    side of the band so edge widening does not contaminate it.  When the true
    in-band noise power is supplied, the pre-cancellation in-band SNR is
    reported (the ideal suppression ceiling).
    """
    if len(original) != len(residual):
        raise ValueError("original and residual must have equal length")
    frame_before = power_spectrum(original, resolution_hz)
    frame_after = power_spectrum(residual, resolution_hz)
    before = frame_band_power(frame_before, band_hz)
    after = frame_band_power(frame_after, band_hz)
    suppression = _log_ratio_db(before, after)

    lo, hi = band_hz
    guard = frame_before.resolution_hz
    out_mask = (frame_before.freqs_hz < lo - guard) | (frame_before.freqs_hz > hi + guard)
    out_before = float(np.sum(frame_before.power[out_mask]) * frame_before.resolution_hz)
    out_after = float(np.sum(frame_after.power[out_mask]) * frame_after.resolution_hz)
    out_delta = _log_ratio_db(out_after, out_before)

    snr = None
    if noise_power_in_band is not None and noise_power_in_band > 0:
        signal_only = before - noise_power_in_band
        snr = _log_ratio_db(max(signal_only, 0.0), noise_power_in_band)
    return SuppressionReport((lo, hi), before, after, suppression, out_delta, snr)


def offset_band_power(
    frame: SpectrumFrame, center_hz: float, offset_hz: float, half_width_hz: float = 250.0
) -> float:
    """Power in a small window at center + offset (for block-rate artifact checks)."""
    return frame_band_power(
        frame, (center_hz + offset_hz - half_width_hz, center_hz + offset_hz + half_width_hz)
    )


def format_report(report: SuppressionReport) -> str:
    lines = [
        f"band_hz: {report.band_hz[0]:.1f} .. {report.band_hz[1]:.1f}",
        f"power_before: {report.power_before:.6g}",
        f"power_after: {report.power_after:.6g}",
        f"suppression_db: {report.suppression_db:.2f}",
        f"out_of_band_delta_db: {report.out_of_band_delta_db:+.3f}",
    ]
    if report.snr_in_band_db is not None:
        lines.append(f"snr_in_band_db: {report.snr_in_band_db:.2f}")
    return "\n".join(lines)


def write_report_csv(report: SuppressionReport, path) -> None:
    with open(path, "w") as fh:
        fh.write(
            "band_lo_hz,band_hi_hz,power_before,power_after,"
            "suppression_db,out_of_band_delta_db,snr_in_band_db\n"
        )
        snr = "" if report.snr_in_band_db is None else f"{report.snr_in_band_db:.6f}"
        fh.write(
            f"{report.band_hz[0]:.6f},{report.band_hz[1]:.6f},"
            f"{report.power_before:.9g},{report.power_after:.9g},"
            f"{report.suppression_db:.6f},{report.out_of_band_delta_db:.6f},{snr}\n"
        )


def write_spectrum_csv(frame: SpectrumFrame, path) -> None:
    with open(path, "w") as fh:
        fh.write("freq_hz,power\n")
        for f, p in zip(frame.freqs_hz, frame.power):
            fh.write(f"{f:.6f},{p:.9g}\n")


def write_dynamic_spectrum_csv(ds: DynamicSpectrum, path) -> None:
    """Row-major waterfall: header of frequencies, one row per time cell."""
    with open(path, "w") as fh:
        fh.write("time_s," + ",".join(f"{f:.3f}" for f in ds.freqs_hz) + "\n")
        for t, row in zip(ds.times_s, ds.power):
            fh.write(f"{t:.6f}," + ",".join(f"{p:.6g}" for p in row) + "\n")
