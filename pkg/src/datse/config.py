"""Declarative run configuration: INI sections with strict key checking.

Unknown sections or keys are rejected outright; every run persists its fully
resolved configuration as JSON next to the outputs, so a run directory is
self-describing and reproducible.
"""

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusSpec, NoiseClass
from .dsp import DEFAULT_POWER_FLOOR, StftConfig
from .dat import TrainConfig
from .errors import ConfigurationError
from .trainer import MODES

# kind name -> stationary flag
KNOWN_NOISE_KINDS = {
    "white": True,
    "pink": True,
    "brown": True,
    "rumble": True,
    "hiss": True,
    "cry": False,
    "babble": False,
}

DEFAULT_CLASS_NAMES = ("white", "pink", "brown", "rumble", "hiss", "cry")


def _classes_from_names(names):
    roster = []
    for i, name in enumerate(names, start=1):
        if name not in KNOWN_NOISE_KINDS:
            raise ConfigurationError(
                f"unknown noise kind {name!r}; known: {sorted(KNOWN_NOISE_KINDS)}"
            )
        roster.append(NoiseClass(i, name, KNOWN_NOISE_KINDS[name]))
    return roster


@dataclass
class RunConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    power_floor: float = DEFAULT_POWER_FLOOR
    corpus: CorpusSpec = field(default_factory=lambda: CorpusSpec(classes=_classes_from_names(DEFAULT_CLASS_NAMES)))
    train: TrainConfig = field(default_factory=TrainConfig)
    mode: str = "dat"
    hidden_size: int = 32
    disc_hidden: int = 64
    eval_metrics: tuple = ("ssnr", "stoi")

    def num_classes(self):
        return len(self.corpus.classes)

    def resolved_dict(self):
        return {
            "dsp": {
                "fft_size": self.stft.fft_size,
                "win_len": self.stft.win_len,
                "hop": self.stft.hop,
                "window": self.stft.window,
                "power_floor": self.power_floor,
            },
            "corpus": {
                "seed": self.corpus.seed,
                "sample_rate_hz": self.corpus.sample_rate_hz,
                "source_utterances": self.corpus.source_utterances,
                "target_utterances": self.corpus.target_utterances,
                "test_utterances": self.corpus.test_utterances,
                "source_snrs_db": list(self.corpus.source_snrs_db),
                "adaptation_snr_db": self.corpus.adaptation_snr_db,
                "test_snrs_db": list(self.corpus.test_snrs_db),
                "duration_range_s": list(self.corpus.duration_range_s),
                "classes": [c.name for c in self.corpus.classes],
                "keep_target_clean": self.corpus.keep_target_clean,
            },
            "model": {
                "hidden_size": self.hidden_size,
                "disc_hidden": self.disc_hidden,
                "num_classes": self.num_classes(),
            },
            "train": {
                "mode": self.mode,
                "scheme": self.train.scheme,
                "lambda": self.train.lambda_,
                "lr_se": self.train.lr_se,
                "lr_disc": self.train.lr_disc,
                "batch_size": self.train.batch_size,
                "epochs": self.train.epochs,
                "seed": self.train.seed,
                "clip_norm": self.train.clip_norm,
                "checkpoint_every_epochs": self.train.checkpoint_every_epochs,
            },
            "eval": {"metrics": list(self.eval_metrics)},
        }

    def write_resolved(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "resolved_config.json"
        with open(path, "w") as f:
            json.dump(self.resolved_dict(), f, indent=2, sort_keys=True)
        return path


def _coerce(section, key, raw, kind):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind == "names":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        return raw.strip()
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {key}: {exc}") from exc


_SCHEMA = {
    "dsp": {
        "fft_size": "int", "win_len": "int", "hop": "int", "power_floor": "float",
    },
    "corpus": {
        "seed": "int", "sample_rate_hz": "int",
        "source_utterances": "int", "target_utterances": "int", "test_utterances": "int",
        "source_snrs_db": "floats", "adaptation_snr_db": "float", "test_snrs_db": "floats",
        "duration_min_s": "float", "duration_max_s": "float",
        "classes": "names", "keep_target_clean": "bool",
    },
    "model": {"hidden_size": "int", "disc_hidden": "int"},
    "train": {
        "mode": "str", "scheme": "str", "lambda": "float",
        "lr_se": "float", "lr_disc": "float", "batch_size": "int",
        "epochs": "int", "seed": "int", "clip_norm": "float",
        "checkpoint_every_epochs": "int",
    },
    "eval": {"metrics": "names"},
}


def load_config(path=None, seed_override=None) -> RunConfig:
    """Parse an INI config (all sections optional) into a RunConfig.

    seed_override, when given, replaces both the corpus and training seeds
    (the CLI wires the DATSE_SEED environment variable through here).
    """
    values = {section: {} for section in _SCHEMA}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"cannot read config file {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigurationError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
                values[section][key] = _coerce(section, key, raw, _SCHEMA[section][key])

    dsp = values["dsp"]
    stft = StftConfig(
        fft_size=dsp.get("fft_size", 512),
        win_len=dsp.get("win_len", dsp.get("fft_size", 512)),
        hop=dsp.get("hop", 256),
    )
    power_floor = dsp.get("power_floor", DEFAULT_POWER_FLOOR)
    if power_floor <= 0:
        raise ConfigurationError(f"power_floor must be positive, got {power_floor}")

    c = values["corpus"]
    class_names = c.get("classes", DEFAULT_CLASS_NAMES)
    duration = (c.get("duration_min_s", 1.0), c.get("duration_max_s", 1.6))
    corpus_spec = CorpusSpec(
        seed=c.get("seed", 0),
        sample_rate_hz=c.get("sample_rate_hz", 16000),
        source_utterances=c.get("source_utterances", 40),
        target_utterances=c.get("target_utterances", 20),
        test_utterances=c.get("test_utterances", 8),
        source_snrs_db=c.get("source_snrs_db", (-5.0, 0.0, 5.0)),
        adaptation_snr_db=c.get("adaptation_snr_db", 0.0),
        test_snrs_db=c.get("test_snrs_db", (0.0,)),
        classes=_classes_from_names(class_names),
        duration_range_s=duration,
        keep_target_clean=c.get("keep_target_clean", False),
    ).validate()

    t = values["train"]
    mode = t.get("mode", "dat")
    if mode not in MODES:
        raise ConfigurationError(f"train mode must be one of {MODES}, got {mode!r}")
    train = TrainConfig(
        lambda_=t.get("lambda", 0.05),
        lr_se=t.get("lr_se", 1e-4),
        lr_disc=t.get("lr_disc", 5e-4),
        batch_size=t.get("batch_size", 16),
        scheme=t.get("scheme", "alternating"),
        epochs=t.get("epochs", 10),
        seed=t.get("seed", 0),
        num_classes=len(corpus_spec.classes),
        clip_norm=t.get("clip_norm"),
        checkpoint_every_epochs=t.get("checkpoint_every_epochs", 0),
    ).validate()

    m = values["model"]
    metrics = values["eval"].get("metrics", ("ssnr", "stoi"))
    for metric in metrics:
        if metric not in ("ssnr", "stoi"):
            raise ConfigurationError(f"unknown eval metric {metric!r}")

    cfg = RunConfig(
        stft=stft,
        power_floor=power_floor,
        corpus=corpus_spec,
        train=train,
        mode=mode,
        hidden_size=m.get("hidden_size", 32),
        disc_hidden=m.get("disc_hidden", 64),
        eval_metrics=metrics,
    )
    if seed_override is not None:
        cfg.corpus.seed = int(seed_override)
        cfg.train.seed = int(seed_override)
    return cfg
