"""Feature preparation: waveforms -> standardized LPS segment pools.

Log-power spectra are standardized per bin with mean/std gathered from the
source-domain noisy frames (stored on the model so enhancement can invert
them), then cut into fixed-length segments. Standardizing before segmenting
means zero padding lands at the per-bin mean rather than at raw log-power 0.
"""

from dataclasses import dataclass

import numpy as np

from .dsp import (
    DEFAULT_POWER_FLOOR,
    SEGMENT_FRAMES,
    StftConfig,
    Waveform,
    stft,
    to_lps,
)

STD_FLOOR = 1e-3


def waveform_lps(w: Waveform, cfg: StftConfig, power_floor: float = DEFAULT_POWER_FLOOR):
    """Raw (T, bins) log-power matrix of a waveform."""
    return to_lps(stft(w, cfg), power_floor).frames


def compute_feature_stats(waveforms, cfg: StftConfig, power_floor: float = DEFAULT_POWER_FLOOR):
    """Per-bin mean/std of LPS frames pooled over the given waveforms."""
    total = np.zeros(cfg.num_bins)
    total_sq = np.zeros(cfg.num_bins)
    count = 0
    for w in waveforms:
        frames = waveform_lps(w, cfg, power_floor)
        total += frames.sum(axis=0)
        total_sq += np.square(frames).sum(axis=0)
        count += frames.shape[0]
    if count == 0:
        raise ValueError("no frames to compute feature statistics from")
    mean = total / count
    var = np.maximum(total_sq / count - mean**2, 0.0)
    std = np.maximum(np.sqrt(var), STD_FLOOR)
    return mean.astype(np.float32), std.astype(np.float32)


def split_frames(frames, seg_len: int = SEGMENT_FRAMES):
    """(T, F) -> (n_segs, seg_len, F), zero-padding the tail segment."""
    t = frames.shape[0]
    n_segs = (t + seg_len - 1) // seg_len
    padded = np.zeros((n_segs * seg_len, frames.shape[1]), dtype=frames.dtype)
    padded[:t] = frames
    return padded.reshape(n_segs, seg_len, frames.shape[1])


@dataclass
class SegmentPool:
    """Flat pool of standardized feature segments ready for batching.

    clean rows are zero where has_target is False and are never read there.
    """

    noisy: np.ndarray  # (n, seg_len, F) float32
    clean: np.ndarray  # (n, seg_len, F) float32
    has_target: np.ndarray  # (n,) bool
    labels: np.ndarray  # (n,) int32, 1..C

    def __len__(self):
        return self.noisy.shape[0]

    @property
    def n_source(self):
        return int(self.has_target.sum())


def build_segment_pool(
    examples,
    mean,
    std,
    cfg: StftConfig,
    power_floor: float = DEFAULT_POWER_FLOOR,
    seg_len: int = SEGMENT_FRAMES,
    require_clean: bool = False,
) -> SegmentPool:
    """Cut every example into standardized segments; rows keep their example's
    noise-class label and, when available, aligned clean targets."""
    noisy_rows, clean_rows, has_tgt, labels = [], [], [], []
    for ex in examples:
        noisy = (waveform_lps(ex.noisy, cfg, power_floor) - mean) / std
        segs = split_frames(noisy.astype(np.float32), seg_len)
        if ex.clean is not None:
            clean = (waveform_lps(ex.clean, cfg, power_floor) - mean) / std
            clean_segs = split_frames(clean.astype(np.float32), seg_len)
        elif require_clean:
            raise ValueError(f"{ex.utterance_id}: clean reference required but absent")
        else:
            clean_segs = np.zeros_like(segs)
        noisy_rows.append(segs)
        clean_rows.append(clean_segs)
        has_tgt.extend([ex.clean is not None] * segs.shape[0])
        labels.extend([ex.noise_class] * segs.shape[0])
    if not noisy_rows:
        raise ValueError("no examples to build a segment pool from")
    return SegmentPool(
        noisy=np.concatenate(noisy_rows, axis=0),
        clean=np.concatenate(clean_rows, axis=0),
        has_target=np.asarray(has_tgt, dtype=bool),
        labels=np.asarray(labels, dtype=np.int32),
    )
