"""Spectral balance measures and MFCCs on the short-time power spectrum."""

import numpy as np
import scipy.fft

from ..errors import ZeroSpectrumError
from .framing import Frames, FrameTrack

MIN_FFT = 512
POWER_FLOOR = 1e-30

SLOPE_BAND_HZ = (0.0, 500.0)        # inclusive
ALPHA_LOW_HZ = (50.0, 1000.0)       # inclusive of both edges
ALPHA_HIGH_HZ = (1000.0, 5000.0)    # exclusive low edge, inclusive high
HAMMARBERG_LOW_HZ = (0.0, 2000.0)
HAMMARBERG_HIGH_HZ = (2000.0, 5000.0)


def _power_spectrum(frames: Frames):
    nfft = max(MIN_FFT, 1 << int(np.ceil(np.log2(frames.frame_len))))
    spec = np.fft.rfft(frames.data, nfft, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    freqs = np.fft.rfftfreq(nfft, d=1.0 / frames.sample_rate)
    return power, freqs


def extract_spectral_measures(frames: Frames, voiced: np.ndarray) -> dict:
    """Spectral slope (0-500 Hz), alpha ratio and Hammarberg index per frame.

    slope_v0_500: least-squares slope in dB/Hz of the log power spectrum over
        bins in [0, 500] Hz, on voiced frames only (NaN elsewhere).
    alpha_ratio_db: 10*log10 of band energy (1-5 kHz) over (50-1000 Hz).
    hammarberg_db: max bin level (dB) in 0-2 kHz minus max in 2-5 kHz.
    """
    power, freqs = _power_spectrum(frames)
    totals = power.sum(axis=1)
    if np.any(totals == 0.0):
        bad = int(np.argmax(totals == 0.0))
        raise ZeroSpectrumError(f"all-zero frame at index {bad}")
    level_db = 10.0 * np.log10(np.maximum(power, POWER_FLOOR))

    t0 = frames.frame_len / 2 / frames.sample_rate
    rate = frames.frame_rate

    slope_bins = (freqs >= SLOPE_BAND_HZ[0]) & (freqs <= SLOPE_BAND_HZ[1])
    f = freqs[slope_bins]
    f_centered = f - f.mean()
    l_band = level_db[:, slope_bins]
    slope = (l_band - l_band.mean(axis=1, keepdims=True)) @ f_centered / np.sum(f_centered ** 2)
    slope = np.where(voiced, slope, np.nan)

    lo = (freqs >= ALPHA_LOW_HZ[0]) & (freqs <= ALPHA_LOW_HZ[1])
    hi = (freqs > ALPHA_HIGH_HZ[0]) & (freqs <= ALPHA_HIGH_HZ[1])
    e_lo = np.maximum(power[:, lo].sum(axis=1), POWER_FLOOR)
    e_hi = np.maximum(power[:, hi].sum(axis=1), POWER_FLOOR)
    alpha = 10.0 * np.log10(e_hi / e_lo)

    ham_lo = (freqs >= HAMMARBERG_LOW_HZ[0]) & (freqs <= HAMMARBERG_LOW_HZ[1])
    ham_hi = (freqs > HAMMARBERG_HIGH_HZ[0]) & (freqs <= HAMMARBERG_HIGH_HZ[1])
    ham = level_db[:, ham_lo].max(axis=1) - level_db[:, ham_hi].max(axis=1)

    return {
        "slope_v0_500": FrameTrack("slope_v0_500", rate, slope, t0=t0),
        "alpha_ratio_db": FrameTrack("alpha_ratio_db", rate, alpha, t0=t0),
        "hammarberg_db": FrameTrack("hammarberg_db", rate, ham, t0=t0),
    }


def mel_filterbank(n_mels: int, nfft: int, fs: int, fmin: float = 50.0) -> np.ndarray:
    """Triangular mel filters (HTK mel scale) over rfft bins."""
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    fmax = fs / 2.0
    mel_pts = np.linspace(to_mel(fmin), to_mel(fmax), n_mels + 2)
    hz_pts = from_mel(mel_pts)
    freqs = np.fft.rfftfreq(nfft, d=1.0 / fs)
    fb = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        left, center, right = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (freqs - left) / max(center - left, 1e-12)
        down = (right - freqs) / max(right - center, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def extract_mfcc(frames: Frames, n_coeffs: int = 13, n_mels: int = 26,
                 fmin: float = 50.0) -> list:
    """MFCC tracks 1..n_coeffs (c0 excluded, so gain lands nowhere)."""
    power, _ = _power_spectrum(frames)
    nfft = 2 * (power.shape[1] - 1)
    fb = mel_filterbank(n_mels, nfft, frames.sample_rate, fmin)
    mel_energy = power @ fb.T
    log_mel = np.log(np.maximum(mel_energy, POWER_FLOOR))
    cep = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)
    t0 = frames.frame_len / 2 / frames.sample_rate
    return [FrameTrack(f"mfcc_{k}", frames.frame_rate, cep[:, k], t0=t0)
            for k in range(1, n_coeffs + 1)]
