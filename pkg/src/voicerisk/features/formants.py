"""Formant estimation: LPC by Levinson-Durbin, roots of the prediction polynomial.

Each voiced frame is pre-emphasized, Hann-windowed and fitted with an
all-pole model; complex roots above the real axis give candidate formants
with frequency angle*fs/2pi and bandwidth -(fs/pi)*ln|root|. The three
lowest-frequency candidates with bandwidth < 1000 Hz and frequency > 90 Hz
become F1-F3.
"""

import numpy as np

from .framing import Frames, FrameTrack

LPC_ORDER = 12
PREEMPHASIS = 0.7
MIN_FORMANT_HZ = 90.0
MAX_BANDWIDTH_HZ = 1000.0


def _batch_autocorr(data: np.ndarray, order: int) -> np.ndarray:
    n_frames, win = data.shape
    nfft = 1 << int(np.ceil(np.log2(2 * win)))
    spec = np.fft.rfft(data, nfft, axis=1)
    ac = np.fft.irfft(spec * np.conj(spec), nfft, axis=1)[:, :order + 1]
    return ac


def _levinson_batch(r: np.ndarray):
    """Levinson-Durbin recursion vectorized over frames.

    Returns (a, ok) where a[:, 0] == 1 and ok flags frames whose prediction
    error stayed positive throughout.
    """
    n_frames, p1 = r.shape
    order = p1 - 1
    a = np.zeros((n_frames, order + 1))
    a[:, 0] = 1.0
    err = r[:, 0].copy()
    ok = err > 0.0
    err = np.where(ok, err, 1.0)  # keep the recursion finite for bad frames
    for i in range(1, order + 1):
        acc = r[:, i].copy()
        for j in range(1, i):
            acc += a[:, j] * r[:, i - j]
        k = -acc / err
        a_new = a.copy()
        for j in range(1, i):
            a_new[:, j] = a[:, j] + k * a[:, i - j]
        a_new[:, i] = k
        a = a_new
        err = err * (1.0 - k * k)
        ok &= err > 1e-18
    return a, ok


def extract_formants(frames: Frames, voiced: np.ndarray, lpc_order: int = LPC_ORDER,
                     preemphasis: float = PREEMPHASIS) -> dict:
    """F1-F3 center frequencies plus the F1 bandwidth, NaN on unvoiced frames.

    Expects rectangular frames; pre-emphasis and windowing happen here so
    the taper applies to the emphasized signal.
    """
    fs = frames.sample_rate
    n = frames.n_frames
    y = frames.data.copy()
    y[:, 1:] -= preemphasis * y[:, :-1]
    y *= np.hanning(frames.frame_len)[None, :]

    r = _batch_autocorr(y, lpc_order)
    r[:, 0] *= 1.0 + 1e-9  # white-noise regularization
    a, ok = _levinson_batch(r)

    f1 = np.full(n, np.nan)
    f1_bw = np.full(n, np.nan)
    f2 = np.full(n, np.nan)
    f3 = np.full(n, np.nan)

    for i in np.flatnonzero(voiced & ok):
        roots = np.roots(a[i])
        roots = roots[roots.imag > 0.0]
        if roots.size == 0:
            continue
        freq = np.angle(roots) * fs / (2.0 * np.pi)
        mag = np.abs(roots)
        bw = -(fs / np.pi) * np.log(np.maximum(mag, 1e-12))
        keep = (freq > MIN_FORMANT_HZ) & (bw < MAX_BANDWIDTH_HZ)
        if not np.any(keep):
            continue  # unstable polynomial: leave the frame NaN
        cand = np.sort(freq[keep])
        order_idx = np.argsort(freq[keep])
        bw_sorted = bw[keep][order_idx]
        f1[i] = cand[0]
        f1_bw[i] = bw_sorted[0]
        if cand.size > 1:
            f2[i] = cand[1]
        if cand.size > 2:
            f3[i] = cand[2]

    t0 = frames.frame_len / 2 / fs
    rate = frames.frame_rate
    return {
        "f1_hz": FrameTrack("f1_hz", rate, f1, t0=t0),
        "f1_bw_hz": FrameTrack("f1_bw_hz", rate, f1_bw, t0=t0),
        "f2_hz": FrameTrack("f2_hz", rate, f2, t0=t0),
        "f3_hz": FrameTrack("f3_hz", rate, f3, t0=t0),
    }
