"""Mono PCM audio loading, loudness normalization and resampling.

All downstream analysis operates on float64 samples in [-1, 1] at the
pipeline rate of 16 kHz. Recordings at other rates are linearly resampled.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyAudioError,
    MalformedHeaderError,
    SilentInputError,
    UnsupportedEncodingError,
)

PIPELINE_RATE = 16_000
DEFAULT_TARGET_RMS_DB = -23.0

_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioBuffer:
    """A mono audio signal with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate <= 0:
            raise MalformedHeaderError(f"sample rate must be positive, got {self.sample_rate}")
        if samples.ndim != 1:
            raise MalformedHeaderError(f"AudioBuffer expects mono samples, got shape {samples.shape}")
        if samples.size == 0:
            raise EmptyAudioError(f"empty audio buffer ({self.source_id!r})")
        if not np.all(np.isfinite(samples)):
            raise MalformedHeaderError(f"non-finite samples in {self.source_id!r}")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))

    @property
    def rms_db(self) -> float:
        r = self.rms
        if r == 0.0:
            raise SilentInputError(f"silent buffer ({self.source_id!r})")
        return 20.0 * np.log10(r)

    def slice_seconds(self, start_s: float, end_s: float, source_id=None) -> "AudioBuffer":
        i0 = int(round(start_s * self.sample_rate))
        i1 = int(round(end_s * self.sample_rate))
        return AudioBuffer(self.samples[i0:i1].copy(), self.sample_rate,
                           source_id if source_id is not None else self.source_id)


def _parse_fmt_chunk(payload: bytes):
    if len(payload) < 16:
        raise MalformedHeaderError("fmt chunk shorter than 16 bytes")
    fmt_code, n_channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", payload[:16])
    if fmt_code == _WAVE_FORMAT_EXTENSIBLE:
        # Actual format code lives in the first two bytes of the SubFormat GUID.
        if len(payload) < 26:
            raise MalformedHeaderError("extensible fmt chunk truncated")
        fmt_code = struct.unpack("<H", payload[24:26])[0]
    return fmt_code, n_channels, sample_rate, bits


def _decode_pcm(data: bytes, fmt_code: int, bits: int) -> np.ndarray:
    if fmt_code == _WAVE_FORMAT_PCM:
        if bits == 8:
            x = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
            return (x - 128.0) / 128.0
        if bits == 16:
            return np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
        if bits == 24:
            raw = np.frombuffer(data, dtype=np.uint8)
            if raw.size % 3:
                raise MalformedHeaderError("24-bit data chunk is not a multiple of 3 bytes")
            b = raw.reshape(-1, 3).astype(np.int64)
            val = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
            val = np.where(val >= 1 << 23, val - (1 << 24), val)
            return val.astype(np.float64) / float(1 << 23)
        if bits == 32:
            return np.frombuffer(data, dtype="<i4").astype(np.float64) / float(1 << 31)
        raise UnsupportedEncodingError(f"unsupported PCM bit depth: {bits}")
    if fmt_code == _WAVE_FORMAT_IEEE_FLOAT:
        if bits == 32:
            x = np.frombuffer(data, dtype="<f4").astype(np.float64)
            return np.clip(x, -1.0, 1.0)
        if bits == 64:
            return np.clip(np.frombuffer(data, dtype="<f8").astype(np.float64), -1.0, 1.0)
        raise UnsupportedEncodingError(f"unsupported float bit depth: {bits}")
    raise UnsupportedEncodingError(f"unsupported WAVE format code: {fmt_code}")


def read_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE PCM file as a mono AudioBuffer in [-1, 1].

    Supports 8/16/24-bit integer and 32/64-bit float encodings.
    Multichannel input is downmixed by the arithmetic channel mean.
    """
    path = str(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[0:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedHeaderError(f"not a RIFF/WAVE file: {path}")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos:pos + 4]
        (size,) = struct.unpack("<I", blob[pos + 4:pos + 8])
        payload = blob[pos + 8:pos + 8 + size]
        if len(payload) < size:
            raise MalformedHeaderError(f"truncated chunk {cid!r} in {path}")
        if cid == b"fmt ":
            fmt = _parse_fmt_chunk(payload)
        elif cid == b"data":
            data = payload
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise MalformedHeaderError(f"missing fmt chunk: {path}")
    if data is None:
        raise MalformedHeaderError(f"missing data chunk: {path}")
    fmt_code, n_channels, sample_rate, bits = fmt
    if n_channels < 1:
        raise MalformedHeaderError(f"channel count {n_channels} in {path}")
    if sample_rate <= 0:
        raise MalformedHeaderError(f"sample rate {sample_rate} in {path}")
    if len(data) == 0:
        raise EmptyAudioError(f"zero-length data chunk: {path}")

    x = _decode_pcm(data, fmt_code, bits)
    if x.size == 0:
        raise EmptyAudioError(f"no samples decoded: {path}")
    if n_channels > 1:
        if x.size % n_channels:
            raise MalformedHeaderError(f"sample count not divisible by channel count in {path}")
        x = x.reshape(-1, n_channels).mean(axis=1)
    return AudioBuffer(x, int(sample_rate), source_id=path)


def write_wav(path, buffer: AudioBuffer) -> None:
    """Write a mono 16-bit PCM WAV file.

    Sample values k/32768 round-trip bit-exactly through read_wav.
    """
    x = np.clip(np.round(buffer.samples * 32768.0), -32768, 32767).astype("<i2")
    data = x.tobytes()
    sr = int(buffer.sample_rate)
    hdr = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, _WAVE_FORMAT_PCM, 1, sr, sr * 2, 2, 16)
    hdr += b"data" + struct.pack("<I", len(data))
    with open(str(path), "wb") as fh:
        fh.write(hdr + data)


def normalize_loudness(a: AudioBuffer, target_rms_db: float = DEFAULT_TARGET_RMS_DB):
    """Scale the signal so its RMS equals the target dBFS level.

    Returns the normalized buffer and the number of samples clipped
    to [-1, 1] after applying the gain.
    """
    rms = a.rms
    if rms == 0.0:
        raise SilentInputError(f"cannot normalize silent input ({a.source_id!r})")
    gain = 10.0 ** ((target_rms_db - 20.0 * np.log10(rms)) / 20.0)
    y = a.samples * gain
    clipped = int(np.sum(np.abs(y) > 1.0))
    if clipped:
        y = np.clip(y, -1.0, 1.0)
    return AudioBuffer(y, a.sample_rate, a.source_id), clipped


def resample_linear(a: AudioBuffer, target_rate: int = PIPELINE_RATE) -> AudioBuffer:
    """Linear-interpolation resampling to the pipeline rate."""
    if a.sample_rate == target_rate:
        return a
    n_out = int(round(a.samples.size * target_rate / a.sample_rate))
    if n_out < 1:
        raise EmptyAudioError(f"resampling {a.source_id!r} would produce no samples")
    t_in = np.arange(a.samples.size) / a.sample_rate
    t_out = np.arange(n_out) / target_rate
    return AudioBuffer(np.interp(t_out, t_in, a.samples), target_rate, a.source_id)
