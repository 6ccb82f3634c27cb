"""Objective evaluation: segmental SNR, short-time intelligibility (STOI),
gap-coverage arithmetic, external score ingestion, and spectrogram export.

SSNR uses the conventional definition (32 ms frames, 16 ms hop, per-frame SNR
clamped to [-10, +35] dB, near-silent reference frames skipped). STOI follows
the published short-time one-third-octave correlation algorithm at 10 kHz;
16 kHz input is decimated with a 64-tap windowed-sinc polyphase filter.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import upfirdn

from .dsp import DEFAULT_POWER_FLOOR, StftConfig, Waveform, stft, to_lps
from .errors import DataError, DegenerateInputError
from .validation import check_equal_length

SSNR_FRAME_S = 0.032
SSNR_HOP_S = 0.016
SSNR_MIN_DB = -10.0
SSNR_MAX_DB = 35.0
SSNR_SILENCE_POWER = 1e-8

STOI_FS = 10000
STOI_FRAME = 256
STOI_FFT = 512
STOI_NUM_BANDS = 15
STOI_MIN_FREQ = 150.0
STOI_SEG_FRAMES = 30  # 384 ms at 10 kHz with 50% overlap
STOI_BETA_DB = -15.0
STOI_DYN_RANGE_DB = 40.0
_EPS = np.finfo(np.float64).eps


def ssnr(reference: Waveform, test: Waveform) -> float:
    """Mean clamped per-frame SNR in dB; silent reference frames are skipped."""
    check_equal_length(reference.samples, test.samples)
    fs = reference.sample_rate_hz
    ref, tst = reference.samples, test.samples
    win = max(1, int(round(SSNR_FRAME_S * fs)))
    hop = max(1, int(round(SSNR_HOP_S * fs)))
    if len(ref) < win:
        starts = [0]
        win = len(ref)
    else:
        starts = range(0, len(ref) - win + 1, hop)
    values = []
    for s in starts:
        r = ref[s : s + win]
        if float(np.mean(r * r)) < SSNR_SILENCE_POWER:
            continue
        err = r - tst[s : s + win]
        with np.errstate(divide="ignore"):
            snr = 10.0 * np.log10(np.sum(r * r) / np.sum(err * err))
        values.append(np.clip(snr, SSNR_MIN_DB, SSNR_MAX_DB))
    if not values:
        raise DegenerateInputError("all reference frames are silent")
    return float(np.mean(values))


def _decimation_filter(up, down, taps=64, cutoff_hz=5000.0, fs_in=16000):
    """Hamming-windowed sinc lowpass for the polyphase 16 kHz -> 10 kHz path."""
    fs_mid = fs_in * up
    fc = cutoff_hz / fs_mid  # cycles per intermediate sample
    n = np.arange(taps)
    center = (taps - 1) / 2.0
    h = 2.0 * fc * np.sinc(2.0 * fc * (n - center))
    h *= np.hamming(taps)
    h /= h.sum()
    return h * up  # restore amplitude lost to zero-stuffing


def resample_to_stoi_rate(w: Waveform) -> np.ndarray:
    if w.sample_rate_hz == STOI_FS:
        return w.samples.copy()
    if w.sample_rate_hz != 16000:
        raise ValueError(
            f"stoi expects 16 kHz or 10 kHz input, got {w.sample_rate_hz} Hz"
        )
    return upfirdn(_decimation_filter(5, 8), w.samples, up=5, down=8)


def _frame(x, frame_len, hop):
    n = 1 + max(0, (len(x) - frame_len) // hop)
    idx = np.arange(n)[:, None] * hop + np.arange(frame_len)[None, :]
    return x[idx]


def _remove_silent_frames(x, y, frame_len, hop, dyn_range_db):
    """Drop frames whose reference energy is more than dyn_range below the
    loudest frame; overlap-add the survivors back into aligned signals."""
    window = np.hanning(frame_len + 2)[1:-1]
    xf = _frame(x, frame_len, hop) * window
    yf = _frame(y, frame_len, hop) * window
    energies = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + _EPS)
    mask = energies > energies.max() - dyn_range_db
    xf, yf = xf[mask], yf[mask]
    n_kept = xf.shape[0]
    out_len = (n_kept - 1) * hop + frame_len if n_kept else 0
    x_out = np.zeros(out_len)
    y_out = np.zeros(out_len)
    for i in range(n_kept):
        x_out[i * hop : i * hop + frame_len] += xf[i]
        y_out[i * hop : i * hop + frame_len] += yf[i]
    return x_out, y_out


def _third_octave_matrix(fs, nfft, num_bands, min_freq):
    f = np.linspace(0, fs / 2, nfft // 2 + 1)
    k = np.arange(num_bands)
    cf = min_freq * 2.0 ** (k / 3.0)
    lo = cf * 2.0 ** (-1.0 / 6.0)
    hi = cf * 2.0 ** (1.0 / 6.0)
    obm = np.zeros((num_bands, len(f)))
    for i in range(num_bands):
        bl = int(np.argmin(np.square(f - lo[i])))
        br = int(np.argmin(np.square(f - hi[i])))
        obm[i, bl:br] = 1.0
    return obm


def _band_envelopes(x, frame_len, hop, nfft, obm):
    window = np.hanning(frame_len + 2)[1:-1]
    frames = _frame(x, frame_len, hop) * window
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    return np.sqrt(obm @ (np.abs(spec.T) ** 2))  # (bands, frames)


def stoi(reference: Waveform, test: Waveform) -> float:
    """Short-time objective intelligibility in roughly [-1, 1]."""
    check_equal_length(reference.samples, test.samples)
    x = resample_to_stoi_rate(reference)
    y = resample_to_stoi_rate(test)
    hop = STOI_FRAME // 2
    x, y = _remove_silent_frames(x, y, STOI_FRAME, hop, STOI_DYN_RANGE_DB)
    if len(x) < (STOI_SEG_FRAMES - 1) * hop + STOI_FRAME:
        raise ValueError(
            "input too short: need at least 384 ms of speech-active signal"
        )
    obm = _third_octave_matrix(STOI_FS, STOI_FFT, STOI_NUM_BANDS, STOI_MIN_FREQ)
    xb = _band_envelopes(x, STOI_FRAME, hop, STOI_FFT, obm)
    yb = _band_envelopes(y, STOI_FRAME, hop, STOI_FFT, obm)
    n_frames = xb.shape[1]
    clip_gain = 10.0 ** (-STOI_BETA_DB / 20.0)
    scores = []
    for m in range(STOI_SEG_FRAMES, n_frames + 1):
        xs = xb[:, m - STOI_SEG_FRAMES : m]
        ys = yb[:, m - STOI_SEG_FRAMES : m]
        alpha = np.linalg.norm(xs, axis=1, keepdims=True) / (
            np.linalg.norm(ys, axis=1, keepdims=True) + _EPS
        )
        ys_clipped = np.minimum(ys * alpha, xs * (1.0 + clip_gain))
        xc = xs - xs.mean(axis=1, keepdims=True)
        yc = ys_clipped - ys_clipped.mean(axis=1, keepdims=True)
        xc /= np.linalg.norm(xc, axis=1, keepdims=True) + _EPS
        yc /= np.linalg.norm(yc, axis=1, keepdims=True) + _EPS
        scores.append(np.sum(xc * yc, axis=1))
    return float(np.mean(np.concatenate(scores)))


def gap_coverage(baseline: float, adapted: float, oracle: float) -> float:
    """Percent of the baseline-to-oracle gap recovered by the adapted model."""
    if oracle == baseline:
        raise DegenerateInputError("oracle equals baseline: gap is zero")
    return 100.0 * (adapted - baseline) / (oracle - baseline)


@dataclass
class MetricReport:
    """Per-utterance metric rows plus (noise_class, snr_db) aggregate means."""

    rows: list
    config: dict = field(default_factory=dict)

    def aggregates(self):
        groups = {}
        for row in self.rows:
            groups.setdefault((row["noise_class"], row["snr_db"]), []).append(row)
        table = []
        for (cls, snr), members in sorted(groups.items()):
            entry = {"noise_class": cls, "snr_db": snr, "count": len(members)}
            numeric = set()
            for m in members:
                numeric.update(
                    k for k, v in m.items()
                    if k not in ("utterance_id", "noise_class", "snr_db")
                    and isinstance(v, (int, float))
                )
            for key in sorted(numeric):
                vals = [m[key] for m in members if key in m]
                entry[f"mean_{key}"] = float(np.mean(vals))
            table.append(entry)
        return table

    def _columns(self):
        cols = ["utterance_id", "noise_class", "snr_db"]
        extra = sorted({k for row in self.rows for k in row} - set(cols))
        return cols + extra

    def write_csv(self, path):
        cols = self._columns()
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=cols)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)

    def write_json(self, path):
        payload = {
            "config": self.config,
            "rows": self.rows,
            "aggregates": self.aggregates(),
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)

    def merge_external_scores(self, scores):
        """Attach externally computed metric columns (e.g. PESQ) by utterance id."""
        per_utt = {}
        for (utt, metric), value in scores.items():
            per_utt.setdefault(utt, {})[metric] = value
        for row in self.rows:
            row.update(per_utt.get(row["utterance_id"], {}))
        if any(metric == "pesq" for (_, metric) in scores):
            self.config.setdefault("pesq", "external")


def ingest_external_scores(path):
    """Read utterance_id,metric,value CSV into {(utterance_id, metric): value}."""
    scores = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return scores
        if [h.strip() for h in header] != ["utterance_id", "metric", "value"]:
            raise DataError(f"{path}:1: expected header utterance_id,metric,value")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            utt, metric, raw = (field.strip() for field in row)
            try:
                value = float(raw)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad value {raw!r}") from exc
            key = (utt, metric)
            if key in scores:
                warnings.warn(f"{path}:{lineno}: duplicate {key}, keeping last", stacklevel=2)
            scores[key] = value
    return scores


def export_spectrogram_matrix(w: Waveform, path, cfg: StftConfig = StftConfig(),
                              power_floor: float = DEFAULT_POWER_FLOOR):
    """Write the (frames x bins) LPS matrix as CSV with 6 significant digits."""
    lps = to_lps(stft(w, cfg), power_floor)
    with open(path, "w") as f:
        for row in lps.frames:
            f.write(",".join(f"{v:.6g}" for v in row) + "\n")
    return Path(path)
