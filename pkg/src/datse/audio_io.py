"""16-bit mono PCM WAV reading and writing.

Sample values map to [-1, 1) by division by 32768 on read. Writers quantize
with the same scale; if a signal (or either member of a noisy/clean pair)
peaks beyond +-1 it is rescaled to peak 0.99 first -- pairs share one factor
so their SNR is preserved.
"""

import wave

import numpy as np

from .dsp import Waveform
from .errors import DataError

PCM_SCALE = 32768.0
PEAK_TARGET = 0.99


def read_wav(path) -> Waveform:
    """Read a RIFF PCM 16-bit mono file; anything else is rejected."""
    try:
        with wave.open(str(path), "rb") as f:
            n_channels = f.getnchannels()
            sample_width = f.getsampwidth()
            rate = f.getframerate()
            n_frames = f.getnframes()
            raw = f.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise DataError(f"{path}: not a readable PCM WAV file ({exc})") from exc
    if n_channels != 1:
        raise DataError(f"{path}: expected mono audio, got {n_channels} channels")
    if sample_width != 2:
        raise DataError(
            f"{path}: expected 16-bit PCM, got sample width {sample_width} bytes"
        )
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    if samples.size == 0:
        raise DataError(f"{path}: file contains no samples")
    return Waveform(samples, rate)


def _quantize(samples):
    scaled = np.round(samples * PCM_SCALE)
    return np.clip(scaled, -32768, 32767).astype("<i2")


def _write_pcm(path, samples, rate):
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(rate)
        f.writeframes(_quantize(samples).tobytes())


def write_wav(path, w: Waveform):
    """Write 16-bit mono PCM, rescaling to peak 0.99 only if |sample| exceeds 1."""
    samples = w.samples
    peak = float(np.max(np.abs(samples))) if len(samples) else 0.0
    if peak > 1.0:
        samples = samples * (PEAK_TARGET / peak)
    _write_pcm(path, samples, w.sample_rate_hz)


def write_wav_pair(noisy_path, noisy: Waveform, clean_path=None, clean: Waveform = None):
    """Write a noisy/clean pair with one shared normalization factor.

    If any sample of either signal exceeds +-1, both are scaled by the same
    factor to peak 0.99 before quantization, preserving their SNR. clean may
    be omitted for target-domain examples.
    """
    peak = float(np.max(np.abs(noisy.samples)))
    if clean is not None:
        peak = max(peak, float(np.max(np.abs(clean.samples))))
    factor = PEAK_TARGET / peak if peak > 1.0 else 1.0
    _write_pcm(noisy_path, noisy.samples * factor, noisy.sample_rate_hz)
    if clean is not None:
        _write_pcm(clean_path, clean.samples * factor, clean.sample_rate_hz)
