import math

import numpy as np

from voicerisk.audio import AudioBuffer
from scipy.signal import lfilter

FS = 16000


def sine(freq, dur_s=1.5, amp=0.3, fs=FS):
    t = np.arange(int(dur_s * fs)) / fs
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t), fs, f"sine{freq}")


def harmonic_voice(f0, dur_s=1.5, tilt_db_oct=-6.0, fs=FS, amp=0.2, noise=0.0, seed=0):
    """Coherent-phase harmonic sum up to 5 kHz with a per-octave tilt."""
    t = np.arange(int(dur_s * fs)) / fs
    k = np.arange(1, int(5000 // f0) + 1)
    amps = 10.0 ** (tilt_db_oct * np.log2(k) / 20.0)
    x = (amps[:, None] * np.cos(2 * np.pi * f0 * k[:, None] * t[None, :])).sum(axis=0)
    x = amp * x / np.abs(x).max()
    if noise:
        x = x + noise * np.random.default_rng(seed).standard_normal(t.size)
    return AudioBuffer(x, fs, f"harm{f0}")


def resonator(x, fc, bw, fs=FS):
    r = math.exp(-math.pi * bw / fs)
    theta = 2 * math.pi * fc / fs
    return lfilter([1 - r], [1.0, -2 * r * math.cos(theta), r * r], x)


def resonant_voice(f0, resonators, dur_s=1.2, tilt_db_oct=0.0, noise_db=-30.0,
                   fs=FS, seed=1):
    rng = np.random.default_rng(seed)
    t = np.arange(int(dur_s * fs)) / fs
    k = np.arange(1, int(5000 // f0) + 1)
    amps = 10.0 ** (tilt_db_oct * np.log2(k) / 20.0)
    x = (amps[:, None] * np.cos(2 * np.pi * f0 * k[:, None] * t[None, :])).sum(axis=0)
    for fc, bw in resonators:
        x = resonator(x, fc, bw, fs)
    x = 0.2 * x / np.abs(x).max()
    x = x + np.sqrt(np.mean(x ** 2)) * 10 ** (noise_db / 20) * rng.standard_normal(t.size)
    return AudioBuffer(np.clip(x, -1, 1), fs, f"res{f0}")


def white_noise(dur_s=1.5, amp=0.1, fs=FS, seed=0):
    rng = np.random.default_rng(seed)
    return AudioBuffer(amp * rng.standard_normal(int(dur_s * fs)), fs, "noise")
