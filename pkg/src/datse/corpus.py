"""Synthetic corpus: speech-like utterances, noise beds, and exact-SNR mixing.

Source-domain examples pair a noisy signal with its clean reference and a
stationary noise-class label; target-domain examples are noisy-only under a
non-stationary class. A held-out test split (noisy + clean under the target
class) supports evaluation. Everything is deterministic given the corpus
seed: per-example generators are seeded through numpy SeedSequence spawns
keyed on (seed, split, utterance, class, snr).

The speech generator is a stand-in for licensed corpora: a pulse train with
drifting fundamental through slowly-moving formant resonators, gated by a
syllable-rate envelope with silent gaps. Real WAV directories can be used
instead via the manifest format.
"""

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import butter, lfilter

from .audio_io import read_wav, write_wav_pair
from .dsp import DEFAULT_SAMPLE_RATE, Waveform
from .errors import ConfigurationError, DataError, DegenerateInputError
from .validation import check_nonzero_power

SPEECH_PEAK = 0.5
NOISE_PEAK = 0.5


@dataclass(frozen=True)
class NoiseClass:
    id: int
    name: str
    stationary: bool


def default_noise_classes():
    """Five stationary classes plus one non-stationary adaptation target."""
    return [
        NoiseClass(1, "white", True),
        NoiseClass(2, "pink", True),
        NoiseClass(3, "brown", True),
        NoiseClass(4, "rumble", True),
        NoiseClass(5, "hiss", True),
        NoiseClass(6, "cry", False),
    ]


@dataclass
class CorpusExample:
    noisy: Waveform
    clean: "Waveform | None"
    noise_class: int
    snr_db: float
    utterance_id: str
    split: str = "source"

    def __post_init__(self):
        if self.clean is not None and len(self.clean) != len(self.noisy):
            raise ValueError(
                f"{self.utterance_id}: clean length {len(self.clean)} != "
                f"noisy length {len(self.noisy)}"
            )


@dataclass
class Corpus:
    source: list
    target: list
    classes: list
    seed: int
    test: list = field(default_factory=list)

    def __post_init__(self):
        known = {c.id for c in self.classes}
        ids = sorted(c.id for c in self.classes)
        if ids != list(range(1, len(ids) + 1)):
            raise ConfigurationError(f"class ids must be contiguous from 1, got {ids}")
        for ex in list(self.source) + list(self.target) + list(self.test):
            if ex.noise_class not in known:
                raise ConfigurationError(
                    f"{ex.utterance_id}: unknown noise class {ex.noise_class}"
                )
        for ex in self.source:
            if ex.clean is None:
                raise ValueError(f"source example {ex.utterance_id} lacks a clean reference")
        if self.target and len(self.target) >= len(self.source):
            warnings.warn(
                f"target size M={len(self.target)} >= source size N={len(self.source)}; "
                "the adaptation setting assumes M << N",
                stacklevel=2,
            )

    @property
    def n_source(self):
        return len(self.source)

    @property
    def m_target(self):
        return len(self.target)


@dataclass
class CorpusSpec:
    """Counts, SNR grids, and class roster driving build_corpus()."""

    seed: int = 0
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    source_utterances: int = 40
    target_utterances: int = 20
    test_utterances: int = 8
    source_snrs_db: tuple = (-5.0, 0.0, 5.0)
    adaptation_snr_db: float = 0.0
    test_snrs_db: tuple = (0.0,)
    classes: list = field(default_factory=default_noise_classes)
    duration_range_s: tuple = (1.0, 1.6)
    keep_target_clean: bool = False

    def validate(self):
        if not self.classes:
            raise ConfigurationError("class roster is empty")
        if not self.source_snrs_db:
            raise ConfigurationError("source SNR grid is empty")
        if not any(not c.stationary for c in self.classes):
            raise ConfigurationError("roster needs at least one non-stationary target class")
        lo, hi = self.duration_range_s
        if not (0.5 <= lo <= hi <= 30.0):
            raise ConfigurationError(f"duration range {self.duration_range_s} outside [0.5, 30]")
        return self

    def stationary_classes(self):
        return [c for c in self.classes if c.stationary]

    def target_class(self):
        return [c for c in self.classes if not c.stationary][0]


def _rng_for(seed, *key):
    """Deterministic per-example generator; key parts are small ints."""
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(k) for k in key]))


def _peak_normalize(x, peak):
    top = np.max(np.abs(x))
    if top > 0:
        x = x * (peak / top)
    return x


def synth_speech_like(duration_s: float, seed: int, sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Deterministic pseudo-speech: excitation pulses -> formant resonators -> envelope."""
    if not (0.5 <= duration_s <= 30.0):
        raise ValueError(f"duration_s must be in [0.5, 30], got {duration_s}")
    rng = np.random.default_rng(seed)
    fs = sample_rate_hz
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs

    # Drifting fundamental, clamped to 90-220 Hz.
    f0_base = rng.uniform(110.0, 180.0)
    f0_depth = rng.uniform(15.0, 35.0)
    f0_rate = rng.uniform(0.2, 0.6)
    f0 = np.clip(f0_base + f0_depth * np.sin(2 * np.pi * f0_rate * t + rng.uniform(0, 2 * np.pi)), 90.0, 220.0)

    # Impulse train from the accumulated phase, plus a little aspiration noise.
    phase = np.cumsum(f0) / fs
    excitation = np.zeros(n)
    pulse_idx = np.nonzero(np.diff(np.floor(phase)) > 0)[0] + 1
    excitation[pulse_idx] = 1.0 + 0.1 * rng.standard_normal(pulse_idx.size)
    excitation += 0.02 * rng.standard_normal(n)

    # Two to three formant resonators with slowly drifting centers, applied
    # blockwise (20 ms) with filter-state carryover.
    n_formants = int(rng.integers(2, 4))
    ranges = [(350.0, 800.0), (1000.0, 2000.0), (2300.0, 3200.0)][:n_formants]
    bandwidths = [90.0, 120.0, 160.0][:n_formants]
    n_way = max(2, int(duration_s * 2))  # waypoint every ~0.5 s
    block = int(0.02 * fs)
    n_blocks = (n + block - 1) // block
    centers = []
    for lo, hi in ranges:
        way = rng.uniform(lo, hi, size=n_way + 1)
        centers.append(np.interp(np.linspace(0, n_way, n_blocks), np.arange(n_way + 1), way))

    voiced = excitation
    for k in range(n_formants):
        r = np.exp(-np.pi * bandwidths[k] / fs)
        out = np.empty(n)
        zi = np.zeros(2)
        for b in range(n_blocks):
            theta = 2 * np.pi * centers[k][b] / fs
            a = np.array([1.0, -2.0 * r * np.cos(theta), r * r])
            gain = 1.0 - r  # keep blockwise output roughly level
            sl = slice(b * block, min((b + 1) * block, n))
            out[sl], zi = lfilter([gain], a, voiced[sl], zi=zi)
        voiced = out

    # Syllable-rate envelope (~4 Hz) with a few hard silent gaps.
    syl_rate = rng.uniform(3.5, 4.5)
    env = 0.5 * (1.0 + np.sin(2 * np.pi * syl_rate * t + rng.uniform(0, 2 * np.pi)))
    env = env**1.5
    n_gaps = int(rng.integers(1, max(2, int(duration_s * 1.5))))
    for _ in range(n_gaps):
        start = rng.uniform(0.0, max(duration_s - 0.15, 0.01))
        width = rng.uniform(0.06, 0.2)
        env[(t >= start) & (t < start + width)] = 0.0
    # 10 ms smoothing so gap edges do not click
    smooth = int(0.01 * fs)
    env = np.convolve(env, np.ones(smooth) / smooth, mode="same")

    samples = _peak_normalize(voiced * env, SPEECH_PEAK)
    return Waveform(samples, fs)


def _voss_mccartney(rng, n, rows=11):
    """Pink noise as a sum of hold-and-sample rows updated at octave-spaced rates.

    11 rows keep the -3 dB/octave shape through the 100-4000 Hz band while the
    slowest row still updates every 64 ms, keeping frame-level RMS steady.
    """
    total = np.zeros(n)
    for k in range(rows):
        step = 1 << k
        m = (n + step - 1) // step
        total += np.repeat(rng.standard_normal(m), step)[:n]
    total += rng.standard_normal(n)
    return total


def _bandpass_white(rng, n, fs, lo_hz, hi_hz):
    b, a = butter(4, [lo_hz / (fs / 2), hi_hz / (fs / 2)], btype="band")
    return lfilter(b, a, rng.standard_normal(n))


def _cry_bursts(rng, n, fs):
    """Tonal bursts with vibrato and irregular on/off gating."""
    t = np.arange(n) / fs
    f0 = rng.uniform(380.0, 520.0)
    vibrato = 1.0 + 0.04 * np.sin(2 * np.pi * rng.uniform(4.0, 7.0) * t)
    tone = np.zeros(n)
    for h, w in ((1, 1.0), (2, 0.5), (3, 0.25)):
        tone += w * np.sin(2 * np.pi * h * f0 * np.cumsum(vibrato) / fs + rng.uniform(0, 2 * np.pi))
    gate = np.zeros(n)
    pos = 0
    while pos < n:
        on = int(rng.uniform(0.25, 0.7) * fs)
        off = int(rng.uniform(0.3, 0.8) * fs)
        gate[pos : pos + on] = 1.0
        pos += on + off
    ramp = int(0.02 * fs)
    gate = np.convolve(gate, np.ones(ramp) / ramp, mode="same")
    return tone * gate + 0.002 * rng.standard_normal(n)


def _babble(rng, n, fs):
    """Two overlapping pseudo-speech streams; gaps keep the frame RMS bursty."""
    duration = max(0.5, n / fs)
    streams = []
    for _ in range(2):
        seed = int(rng.integers(0, 2**31 - 1))
        w = synth_speech_like(min(duration, 30.0), seed, fs)
        streams.append(w.samples[:n])
    out = np.zeros(n)
    for s in streams:
        out[: len(s)] += s
    return out


def synth_noise(kind: NoiseClass, duration_s: float, seed: int, sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Synthesize a noise bed of the given class; deterministic per seed."""
    rng = np.random.default_rng(seed)
    fs = sample_rate_hz
    n = int(round(duration_s * fs))
    if n <= 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")
    name = kind.name
    if name == "white":
        x = rng.standard_normal(n)
    elif name == "pink":
        x = _voss_mccartney(rng, n)
    elif name == "brown":
        # leaky integration of white noise; the high-pass removes the sub-60 Hz
        # drift that would otherwise make frame-level RMS wander
        x = lfilter([1.0], [1.0, -0.999], rng.standard_normal(n))
        bh, ah = butter(2, 60.0 / (fs / 2), btype="high")
        x = lfilter(bh, ah, x)
    elif name == "rumble":
        x = _bandpass_white(rng, n, fs, 60.0, 400.0)
    elif name == "hiss":
        x = _bandpass_white(rng, n, fs, 1200.0, 5000.0)
    elif name == "cry":
        x = _cry_bursts(rng, n, fs)
    elif name == "babble":
        x = _babble(rng, n, fs)
    else:
        raise ValueError(f"unknown noise kind: {name!r}")
    return Waveform(_peak_normalize(x, NOISE_PEAK), fs)


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float, seed: int):
    """Add a seeded random noise slice scaled for an exact full-utterance SNR.

    Returns (noisy, noise_offset). No clipping is applied; the WAV pair
    writer normalizes jointly when samples exceed +-1.
    """
    if len(noise) < len(clean):
        raise ValueError(f"noise ({len(noise)}) shorter than clean ({len(clean)})")
    clean_power = check_nonzero_power(clean.samples, "clean")
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(0, len(noise) - len(clean) + 1))
    chunk = noise.samples[offset : offset + len(clean)]
    noise_power = float(np.mean(np.square(chunk)))
    if noise_power <= 0.0:
        raise DegenerateInputError("noise slice has zero power")
    gain = np.sqrt(clean_power) / (np.sqrt(noise_power) * 10.0 ** (snr_db / 20.0))
    noisy = Waveform(clean.samples + gain * chunk, clean.sample_rate_hz)
    return noisy, offset


def measure_snr_db(clean: Waveform, noisy: Waveform) -> float:
    """Full-utterance SNR of noisy = clean + residual, in dB."""
    residual = noisy.samples - clean.samples
    p_clean = float(np.mean(np.square(clean.samples)))
    p_noise = float(np.mean(np.square(residual)))
    if p_noise <= 0.0:
        raise DegenerateInputError("residual has zero power")
    return 10.0 * np.log10(p_clean / p_noise)


# split codes used in per-example seed derivation
_SPLIT_SOURCE, _SPLIT_TARGET, _SPLIT_TEST = 0, 1, 2


def _make_clean(spec, split_code, index):
    rng = _rng_for(spec.seed, split_code, index, 0, 0)
    duration = rng.uniform(*spec.duration_range_s)
    speech_seed = int(rng.integers(0, 2**31 - 1))
    return synth_speech_like(duration, speech_seed, spec.sample_rate_hz)


def _mix_example(spec, clean, noise_class, snr_db, split_code, index, snr_code):
    rng = _rng_for(spec.seed, split_code, index, noise_class.id, snr_code)
    noise_seed = int(rng.integers(0, 2**31 - 1))
    mix_seed = int(rng.integers(0, 2**31 - 1))
    noise = synth_noise(noise_class, clean.duration_s + 1.0, noise_seed, spec.sample_rate_hz)
    noisy, _ = mix_at_snr(clean, noise, snr_db, mix_seed)
    return noisy


def build_corpus(spec: CorpusSpec) -> Corpus:
    """Every (source utterance x stationary class x SNR), plus target and test splits."""
    spec.validate()
    target_cls = spec.target_class()

    source = []
    for u in range(spec.source_utterances):
        clean = _make_clean(spec, _SPLIT_SOURCE, u)
        for cls in spec.stationary_classes():
            for si, snr in enumerate(spec.source_snrs_db):
                noisy = _mix_example(spec, clean, cls, snr, _SPLIT_SOURCE, u, si + 1)
                source.append(
                    CorpusExample(noisy, clean, cls.id, float(snr), f"src-{u:04d}", "source")
                )

    target = []
    for u in range(spec.target_utterances):
        clean = _make_clean(spec, _SPLIT_TARGET, u)
        noisy = _mix_example(spec, clean, target_cls, spec.adaptation_snr_db, _SPLIT_TARGET, u, 1)
        target.append(
            CorpusExample(
                noisy,
                clean if spec.keep_target_clean else None,
                target_cls.id,
                float(spec.adaptation_snr_db),
                f"tgt-{u:04d}",
                "target",
            )
        )

    test = []
    for u in range(spec.test_utterances):
        clean = _make_clean(spec, _SPLIT_TEST, u)
        for si, snr in enumerate(spec.test_snrs_db):
            noisy = _mix_example(spec, clean, target_cls, snr, _SPLIT_TEST, u, si + 1)
            test.append(
                CorpusExample(noisy, clean, target_cls.id, float(snr), f"tst-{u:04d}", "test")
            )

    return Corpus(source=source, target=target, classes=list(spec.classes), seed=spec.seed, test=test)


def write_corpus(corpus: Corpus, out_dir) -> Path:
    """Write WAVs plus a JSON-lines manifest; returns the manifest path.

    Manifest rows: {utterance_id, split, noisy_path, clean_path|null,
    noise_class, snr_db}, paths relative to the manifest directory.
    """
    out_dir = Path(out_dir)
    (out_dir / "wavs").mkdir(parents=True, exist_ok=True)
    rows = []
    for ex in list(corpus.source) + list(corpus.target) + list(corpus.test):
        stem = f"{ex.utterance_id}__c{ex.noise_class}__snr{ex.snr_db:+.1f}"
        noisy_rel = f"wavs/{stem}.noisy.wav"
        clean_rel = f"wavs/{stem}.clean.wav" if ex.clean is not None else None
        write_wav_pair(
            out_dir / noisy_rel,
            ex.noisy,
            out_dir / clean_rel if clean_rel else None,
            ex.clean,
        )
        rows.append(
            {
                "utterance_id": ex.utterance_id,
                "split": ex.split,
                "noisy_path": noisy_rel,
                "clean_path": clean_rel,
                "noise_class": ex.noise_class,
                "snr_db": ex.snr_db,
            }
        )
    manifest_path = out_dir / "manifest.jsonl"
    with open(manifest_path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")
    meta = {
        "seed": corpus.seed,
        "classes": [
            {"id": c.id, "name": c.name, "stationary": c.stationary} for c in corpus.classes
        ],
    }
    with open(out_dir / "classes.json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    return manifest_path


def load_corpus(manifest_path) -> Corpus:
    """Read a manifest plus its WAVs back into memory."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    classes_file = base / "classes.json"
    if not classes_file.exists():
        raise DataError(f"missing {classes_file} next to manifest")
    with open(classes_file) as f:
        meta = json.load(f)
    classes = [NoiseClass(c["id"], c["name"], c["stationary"]) for c in meta["classes"]]
    splits = {"source": [], "target": [], "test": []}
    with open(manifest_path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                split = row["split"]
                noisy = read_wav(base / row["noisy_path"])
                clean = read_wav(base / row["clean_path"]) if row["clean_path"] else None
                ex = CorpusExample(
                    noisy, clean, int(row["noise_class"]), float(row["snr_db"]),
                    row["utterance_id"], split,
                )
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise DataError(f"{manifest_path}:{lineno}: bad manifest row ({exc})") from exc
            if split not in splits:
                raise DataError(f"{manifest_path}:{lineno}: unknown split {split!r}")
            splits[split].append(ex)
    return Corpus(
        source=splits["source"],
        target=splits["target"],
        classes=classes,
        seed=int(meta["seed"]),
        test=splits["test"],
    )
