"""F0 tracking via normalized autocorrelation (NCCF) with octave control.

Per frame, the normalized cross-correlation of the frame with itself

    ncc(tau) = sum_t x[t] x[t+tau] / sqrt(e_head(tau) * e_tail(tau))

stays in [-1, 1] at every lag, unlike the plain windowed ACF whose taper
bias would need explosive compensation at long lags. The best candidate
peak is parabolic-interpolated and a small cost per octave below the lag
floor avoids period-doubling on pulse-train-like signals.
"""

from dataclasses import dataclass

import numpy as np

from .framing import Frames, FrameTrack

F0_MIN_HZ = 50.0
F0_MAX_HZ = 600.0
VOICING_THRESHOLD = 0.45
OCTAVE_COST = 0.03
SILENCE_RMS = 1e-5


@dataclass(frozen=True)
class PitchTrack:
    """F0 per frame plus the NCCF peak strength used for voicing/HNR."""

    f0: FrameTrack        # Hz, NaN in unvoiced frames
    strength: FrameTrack  # hnr_db-kind carrier is derived via hnr_track()

    @property
    def voiced(self) -> np.ndarray:
        return np.isfinite(self.f0.values)


def _nccf(data: np.ndarray, lag_max: int) -> np.ndarray:
    """Normalized cross-correlation per frame for lags 0..lag_max."""
    n_frames, win = data.shape
    x = data - data.mean(axis=1, keepdims=True)
    nfft = 1 << int(np.ceil(np.log2(2 * win)))
    spec = np.fft.rfft(x, nfft, axis=1)
    ac = np.fft.irfft(spec * np.conj(spec), nfft, axis=1)[:, :lag_max + 1]
    csq = np.cumsum(x ** 2, axis=1)
    total = csq[:, -1]
    lags = np.arange(lag_max + 1)
    e_head = csq[:, win - 1 - lags]                      # energy of x[0 .. win-1-tau]
    e_tail = total[:, None] - np.where(lags > 0, csq[:, np.maximum(lags - 1, 0)], 0.0)
    denom = np.sqrt(np.maximum(e_head * e_tail, 0.0))
    return ac / np.maximum(denom, 1e-20)


def extract_f0(frames: Frames) -> PitchTrack:
    """Estimate F0 in [50, 600] Hz per frame; NaN where unvoiced.

    Expects rectangular (unwindowed) frames so the correlation is not
    biased by a taper.
    """
    fs = frames.sample_rate
    win = frames.frame_len
    tau_min = max(2, int(np.floor(fs / F0_MAX_HZ)))
    tau_max = min(win - 2, int(np.ceil(fs / F0_MIN_HZ)))
    ncc = _nccf(frames.data, tau_max + 1)

    band = np.arange(tau_min, tau_max + 1)
    v = ncc[:, band]
    v_prev = ncc[:, band - 1]
    v_next = ncc[:, band + 1]
    is_peak = (v > v_prev) & (v >= v_next)

    # Parabolic refinement of peak position and height.
    denom = v_prev - 2.0 * v + v_next
    safe = np.where(np.abs(denom) > 1e-12, denom, 1.0)
    delta = np.where(np.abs(denom) > 1e-12, 0.5 * (v_prev - v_next) / safe, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    tau_ref = band[None, :] + delta
    v_ref = v - 0.25 * (v_prev - v_next) * delta

    score = np.where(is_peak, v_ref - OCTAVE_COST * np.log2(tau_ref / tau_min), -np.inf)
    best = np.argmax(score, axis=1)
    rows = np.arange(frames.n_frames)
    best_tau = tau_ref[rows, best]
    best_val = v_ref[rows, best]
    has_peak = np.isfinite(score[rows, best])

    rms = np.sqrt(np.mean(frames.data ** 2, axis=1))
    voiced = has_peak & (best_val >= VOICING_THRESHOLD) & (rms > SILENCE_RMS)

    f0 = np.full(frames.n_frames, np.nan)
    f0[voiced] = np.clip(fs / best_tau[voiced], F0_MIN_HZ, F0_MAX_HZ)
    strength = np.full(frames.n_frames, np.nan)
    strength[voiced] = np.minimum(best_val[voiced], 1.0)

    t0 = win / 2 / fs
    return PitchTrack(
        f0=FrameTrack("f0_hz", frames.frame_rate, f0, t0=t0),
        strength=FrameTrack("hnr_db", frames.frame_rate, strength, t0=t0),
    )


def hnr_track(pitch: PitchTrack, floor_db: float = -20.0, ceil_db: float = 40.0) -> FrameTrack:
    """Harmonics-to-noise ratio per voiced frame: 10*log10(r / (1 - r))."""
    r = pitch.strength.values
    with np.errstate(divide="ignore", invalid="ignore"):
        hnr = 10.0 * np.log10(r / (1.0 - r))
    hnr = np.where(r >= 1.0 - 1e-12, ceil_db, hnr)
    hnr = np.clip(hnr, floor_db, ceil_db)
    hnr = np.where(np.isfinite(r), hnr, np.nan)
    return FrameTrack("hnr_db", pitch.strength.frame_rate, hnr, t0=pitch.strength.t0)
