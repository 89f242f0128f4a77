"""Short-time framing and the frame-level track container."""

from dataclasses import dataclass

import numpy as np

from ..audio import AudioBuffer
from ..errors import TooShortError

DEFAULT_WIN_MS = 25.0
DEFAULT_HOP_MS = 10.0

TRACK_KINDS = (
    "f0_hz", "loudness_rms", "slope_v0_500", "alpha_ratio_db", "hammarberg_db",
    "f1_hz", "f1_bw_hz", "f2_hz", "f3_hz", "hnr_db",
) + tuple(f"mfcc_{k}" for k in range(1, 14))


@dataclass(frozen=True)
class Frames:
    """Windowed analysis frames of one segment."""

    data: np.ndarray  # (n_frames, frame_len)
    sample_rate: int
    hop: int          # samples
    window: str       # "hann" or "rect"

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def frame_len(self) -> int:
        return self.data.shape[1]

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop

    def times(self) -> np.ndarray:
        """Frame center times in seconds."""
        return (np.arange(self.n_frames) * self.hop + self.frame_len / 2) / self.sample_rate


@dataclass(frozen=True)
class FrameTrack:
    """One low-level descriptor sampled at the frame rate.

    NaN marks frames where the descriptor is undefined (e.g. F0 in
    unvoiced frames). `t0` is the time of the first frame center.
    """

    kind: str
    frame_rate: float
    values: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if self.kind not in TRACK_KINDS:
            raise ValueError(f"unknown track kind {self.kind!r}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size) / self.frame_rate

    def finite(self) -> np.ndarray:
        return self.values[np.isfinite(self.values)]


def frame_signal(a: AudioBuffer, win_ms: float = DEFAULT_WIN_MS,
                 hop_ms: float = DEFAULT_HOP_MS, window: str = "hann") -> Frames:
    """Split a signal into overlapping frames; Hann-windowed by default."""
    fs = a.sample_rate
    win = int(round(win_ms / 1000.0 * fs))
    hop = int(round(hop_ms / 1000.0 * fs))
    x = a.samples
    if x.size < win:
        raise TooShortError(
            f"{a.source_id!r}: {x.size} samples is shorter than one {win}-sample window"
        )
    n_frames = (x.size - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    data = x[idx]
    if window == "hann":
        data = data * np.hanning(win)[None, :]
    elif window != "rect":
        raise ValueError(f"unknown window {window!r}")
    return Frames(data=data, sample_rate=fs, hop=hop, window=window)


def extract_loudness(frames: Frames) -> FrameTrack:
    """Per-frame RMS energy (computed on unwindowed frames)."""
    rms = np.sqrt(np.mean(frames.data ** 2, axis=1))
    return FrameTrack("loudness_rms", frames.frame_rate, rms,
                      t0=frames.frame_len / 2 / frames.sample_rate)
