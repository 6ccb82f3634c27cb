"""Waveform <-> log-power-spectra feature pipeline.

Analysis is a 512-point FFT over periodic-hamming windows (32 ms window,
16 ms hop at 16 kHz), keeping the 257 non-negative-frequency bins. Synthesis
is weighted overlap-add with the analysis window reused as the synthesis
window and division by the accumulated squared-window envelope, so
istft(stft(x)) reconstructs x exactly (up to float64 rounding) everywhere at
least one frame covers. Frames start at sample 0; there is no center padding.

All math here is float64. Everything is a pure function of its inputs.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .validation import as_float_array, check_positive

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_POWER_FLOOR = 1e-10
SEGMENT_FRAMES = 32

# Floor for the accumulated squared-window envelope in overlap-add synthesis.
ENVELOPE_FLOOR = 1e-8


@dataclass
class Waveform:
    """Mono PCM samples, nominal range [-1, 1], at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = as_float_array(self.samples, "samples")
        check_positive(self.sample_rate_hz, "sample_rate_hz")

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self):
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    win_len: int = 512
    hop: int = 256
    window: str = "hamming"

    def __post_init__(self):
        if not (0 < self.hop <= self.win_len <= self.fft_size):
            raise ConfigurationError(
                f"need 0 < hop <= win_len <= fft_size, got hop={self.hop}, "
                f"win_len={self.win_len}, fft_size={self.fft_size}"
            )
        if self.window != "hamming":
            raise ConfigurationError(f"unsupported window kind: {self.window!r}")

    @property
    def num_bins(self):
        return self.fft_size // 2 + 1

    def window_coefficients(self):
        # Periodic form (denominator N, not N-1): strictly positive, and the
        # squared-window overlap-add envelope is well behaved at 50% overlap.
        n = np.arange(self.win_len)
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / self.win_len)


@dataclass
class ComplexSpectrogram:
    """frames: (T, fft_size/2 + 1) complex matrix."""

    frames: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.complex128)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.config.num_bins:
            raise ValueError(
                f"expected (T, {self.config.num_bins}) frames, got {self.frames.shape}"
            )

    @property
    def num_frames(self):
        return self.frames.shape[0]


@dataclass
class LpsFeatures:
    """frames: (T, fft_size/2 + 1) log-power values."""

    frames: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.config.num_bins:
            raise ValueError(
                f"expected (T, {self.config.num_bins}) frames, got {self.frames.shape}"
            )

    @property
    def num_frames(self):
        return self.frames.shape[0]


@dataclass
class FeatureSegment:
    """A (bins, frames) slice of an utterance's LPS, zero-padded to a fixed frame count."""

    matrix: np.ndarray
    source_frame_offset: int
    pad_frames: int = 0

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError(f"segment matrix must be 2-D, got {self.matrix.shape}")


def num_frames_for(num_samples, cfg):
    """Frame count of stft() for a signal of the given length."""
    if num_samples < cfg.win_len:
        return 1
    return (num_samples - cfg.win_len) // cfg.hop + 1


def stft(w: Waveform, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    """Short-time Fourier transform, keeping bins 0..fft_size/2.

    A signal shorter than one window is zero-padded to a single frame.
    """
    x = w.samples
    if len(x) < cfg.win_len:
        x = np.concatenate([x, np.zeros(cfg.win_len - len(x))])
    t = num_frames_for(len(x), cfg)
    window = cfg.window_coefficients()
    offsets = np.arange(t) * cfg.hop
    idx = offsets[:, None] + np.arange(cfg.win_len)[None, :]
    frames = x[idx] * window[None, :]
    spec = np.fft.rfft(frames, n=cfg.fft_size, axis=1)
    return ComplexSpectrogram(spec, cfg)


def istft(s: ComplexSpectrogram, out_len: int) -> Waveform:
    """Weighted overlap-add synthesis, truncated or zero-padded to out_len samples."""
    if out_len <= 0:
        raise ValueError(f"out_len must be positive, got {out_len}")
    if s.num_frames < 1:
        raise ValueError("spectrogram must have at least one frame")
    cfg = s.config
    window = cfg.window_coefficients()
    t = s.num_frames
    full_len = (t - 1) * cfg.hop + cfg.win_len
    acc = np.zeros(full_len)
    env = np.zeros(full_len)
    frames = np.fft.irfft(s.frames, n=cfg.fft_size, axis=1)[:, : cfg.win_len]
    frames *= window[None, :]
    w_sq = window * window
    for i in range(t):
        start = i * cfg.hop
        acc[start : start + cfg.win_len] += frames[i]
        env[start : start + cfg.win_len] += w_sq
    y = acc / np.maximum(env, ENVELOPE_FLOOR)
    if out_len <= full_len:
        y = y[:out_len]
    else:
        y = np.concatenate([y, np.zeros(out_len - full_len)])
    return Waveform(y)


def to_lps(s: ComplexSpectrogram, power_floor: float = DEFAULT_POWER_FLOOR) -> LpsFeatures:
    """Log-power spectra: ln(max(|bin|^2, power_floor))."""
    check_positive(power_floor, "power_floor")
    power = np.abs(s.frames) ** 2
    return LpsFeatures(np.log(np.maximum(power, power_floor)), s.config)


def from_lps(lps: LpsFeatures, phase: ComplexSpectrogram) -> ComplexSpectrogram:
    """Combine log-power magnitudes with the phase of another spectrogram.

    Zero-magnitude phase bins contribute unit phase (angle 0).
    """
    if lps.frames.shape != phase.frames.shape:
        raise ValueError(
            f"shape mismatch: lps {lps.frames.shape} vs phase {phase.frames.shape}"
        )
    mag = np.abs(phase.frames)
    unit = np.where(mag > 0, phase.frames / np.where(mag > 0, mag, 1.0), 1.0 + 0.0j)
    return ComplexSpectrogram(np.exp(lps.frames / 2.0) * unit, phase.config)


def segment(lps: LpsFeatures, seg_len: int = SEGMENT_FRAMES) -> list:
    """Split into (bins, seg_len) segments; the last one is zero-padded."""
    check_positive(seg_len, "seg_len")
    t = lps.num_frames
    n_segs = (t + seg_len - 1) // seg_len
    segments = []
    for i in range(n_segs):
        start = i * seg_len
        chunk = lps.frames[start : start + seg_len].T
        pad = seg_len - chunk.shape[1]
        if pad > 0:
            chunk = np.concatenate([chunk, np.zeros((chunk.shape[0], pad))], axis=1)
        segments.append(FeatureSegment(chunk, source_frame_offset=start, pad_frames=pad))
    return segments


def desegment(segs, total_frames: int, cfg: StftConfig = StftConfig()) -> LpsFeatures:
    """Concatenate segments along frames and truncate to total_frames."""
    if not segs:
        raise ValueError("segs must be non-empty")
    seg_len = segs[0].matrix.shape[1]
    available = seg_len * len(segs)
    if total_frames > available:
        raise ValueError(
            f"total_frames={total_frames} exceeds available frames {available}"
        )
    if total_frames <= 0:
        raise ValueError(f"total_frames must be positive, got {total_frames}")
    stacked = np.concatenate([s.matrix for s in segs], axis=1)
    return LpsFeatures(stacked[:, :total_frames].T, cfg)
