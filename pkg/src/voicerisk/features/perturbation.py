"""Cycle-level perturbation measures: local jitter, local shimmer, mean HNR.

Glottal cycle marks are placed by walking the waveform one period at a
time inside each voiced run, snapping to the waveform peak in a +-30 %
window around the expected next period and refining the peak position and
height by parabolic interpolation. Jitter and shimmer are the mean
absolute consecutive differences of period lengths / cycle peak amplitudes
normalized by their means, pooled over voiced runs.
"""

from dataclasses import dataclass

import numpy as np

from ..audio import AudioBuffer
from ..errors import NoVoicedRunError
from .pitch import PitchTrack, hnr_track

MIN_RUN_FRAMES = 3


@dataclass(frozen=True)
class PerturbationStats:
    jitter_local: float
    shimmer_local: float
    mean_hnr_db: float


def _voiced_runs(voiced: np.ndarray, min_frames: int = MIN_RUN_FRAMES):
    runs = []
    start = None
    for i, v in enumerate(voiced):
        if v and start is None:
            start = i
        elif not v and start is not None:
            if i - start >= min_frames:
                runs.append((start, i - 1))
            start = None
    if start is not None and voiced.size - start >= min_frames:
        runs.append((start, voiced.size - 1))
    return runs


def _refine_peak(x: np.ndarray, i: int):
    """Parabolic sub-sample refinement of a local peak at index i."""
    if i <= 0 or i >= x.size - 1:
        return float(i), float(x[i])
    denom = x[i - 1] - 2.0 * x[i] + x[i + 1]
    if abs(denom) < 1e-18:
        return float(i), float(x[i])
    delta = 0.5 * (x[i - 1] - x[i + 1]) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    height = x[i] - 0.25 * (x[i - 1] - x[i + 1]) * delta
    return i + delta, float(height)


def _mark_cycles(x: np.ndarray, fs: int, run_times, run_f0):
    """Peak-pick one mark per glottal cycle inside a voiced run."""
    t_start, t_end = run_times
    s_start = max(int(round(t_start * fs)), 0)
    s_end = min(int(round(t_end * fs)), x.size - 1)
    if s_end - s_start < 4:
        return [], []
    seg = x[s_start:s_end + 1]
    polarity = 1.0 if seg.max() >= -seg.min() else -1.0
    y = polarity * x

    def f0_at(sample):
        t = sample / fs
        return float(np.interp(t, run_f0[0], run_f0[1]))

    period0 = fs / f0_at(s_start)
    w0, w1 = s_start, min(int(round(s_start + period0)), s_end)
    if w1 <= w0:
        return [], []
    first = w0 + int(np.argmax(y[w0:w1 + 1]))
    pos, height = _refine_peak(y, first)
    marks = [pos]
    heights = [height]
    while True:
        period = fs / f0_at(marks[-1])
        lo = int(round(marks[-1] + 0.7 * period))
        hi = int(round(marks[-1] + 1.3 * period))
        if hi > s_end or lo >= hi:
            break
        nxt = lo + int(np.argmax(y[lo:hi + 1]))
        pos, height = _refine_peak(y, nxt)
        if pos <= marks[-1]:
            break
        marks.append(pos)
        heights.append(height)
    return marks, heights


def extract_perturbation(a: AudioBuffer, pitch: PitchTrack) -> PerturbationStats:
    """Jitter, shimmer and mean HNR over the voiced parts of one segment."""
    voiced = pitch.voiced
    runs = _voiced_runs(voiced)
    if not runs:
        raise NoVoicedRunError(
            f"{a.source_id!r}: no run of {MIN_RUN_FRAMES}+ consecutive voiced frames"
        )

    times = pitch.f0.times()
    fs = a.sample_rate
    periods = []
    period_diffs = []
    amps = []
    amp_diffs = []
    for r0, r1 in runs:
        run_t = (times[r0], times[r1])
        run_f0 = (times[r0:r1 + 1], pitch.f0.values[r0:r1 + 1])
        marks, heights = _mark_cycles(a.samples, fs, run_t, run_f0)
        if len(marks) < 3:
            continue
        t = np.asarray(marks) / fs
        p = np.diff(t)
        h = np.abs(np.asarray(heights))
        periods.extend(p)
        period_diffs.extend(np.abs(np.diff(p)))
        amps.extend(h)
        amp_diffs.extend(np.abs(np.diff(h)))

    if not period_diffs:
        raise NoVoicedRunError(f"{a.source_id!r}: voiced runs too short for cycle marks")

    jitter = float(np.mean(period_diffs) / np.mean(periods))
    shimmer = float(np.mean(amp_diffs) / np.mean(amps)) if np.mean(amps) > 0 else 0.0
    hnr = hnr_track(pitch).finite()
    mean_hnr = float(np.mean(hnr)) if hnr.size else 0.0
    return PerturbationStats(jitter_local=jitter, shimmer_local=shimmer, mean_hnr_db=mean_hnr)
