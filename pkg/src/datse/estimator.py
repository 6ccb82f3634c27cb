"""sklearn-style front door: fit a noise-adaptive enhancer on a corpus, then
transform noisy waveforms into enhanced ones.

The estimator wraps the functional pipeline (feature stats -> segment pools
-> adversarial or supervised training -> per-utterance enhancement) behind
fit/transform with get_params/set_params, so it composes with sklearn
tooling. Training mode picks the corpus splits:

- "baseline": source rows only, plain MAE
- "dat":      source + noisy-only target rows, adversarial adaptation
- "oracle":   source + target rows with clean references, plain MAE
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import Corpus
from .dat import TrainConfig, enhance
from .dsp import SEGMENT_FRAMES, StftConfig, Waveform
from .errors import ConfigurationError
from .features import build_segment_pool, compute_feature_stats
from .nn import ModelSize, init_model
from .trainer import Trainer


class NoiseAdaptiveEnhancer(BaseEstimator, TransformerMixin):
    """Encoder-decoder speech enhancer with optional adversarial noise adaptation."""

    def __init__(self, hidden_size=32, disc_hidden=64, num_classes=6, mode="dat",
                 scheme="alternating", adaptation_weight=0.05, lr_se=1e-4,
                 lr_disc=5e-4, batch_size=16, epochs=10, seed=0, clip_norm=None,
                 fft_size=512, win_len=512, hop=256, power_floor=1e-10,
                 segment_frames=SEGMENT_FRAMES):
        self.hidden_size = hidden_size
        self.disc_hidden = disc_hidden
        self.num_classes = num_classes
        self.mode = mode
        self.scheme = scheme
        self.adaptation_weight = adaptation_weight
        self.lr_se = lr_se
        self.lr_disc = lr_disc
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.clip_norm = clip_norm
        self.fft_size = fft_size
        self.win_len = win_len
        self.hop = hop
        self.power_floor = power_floor
        self.segment_frames = segment_frames

    def _stft_config(self):
        return StftConfig(fft_size=self.fft_size, win_len=self.win_len, hop=self.hop)

    def _train_config(self):
        return TrainConfig(
            lambda_=self.adaptation_weight,
            lr_se=self.lr_se,
            lr_disc=self.lr_disc,
            batch_size=self.batch_size,
            scheme=self.scheme,
            epochs=self.epochs,
            seed=self.seed,
            num_classes=self.num_classes,
            clip_norm=self.clip_norm,
        ).validate()

    def _resolve_examples(self, X):
        if isinstance(X, Corpus):
            return list(X.source), list(X.target)
        source = [ex for ex in X if ex.split == "source"]
        target = [ex for ex in X if ex.split == "target"]
        if not source:
            raise ValueError("fit needs at least one source-domain example")
        return source, target

    def fit(self, X, y=None):
        """Train on a Corpus (or list of CorpusExample). y is ignored."""
        cfg = self._train_config()
        stft_cfg = self._stft_config()
        source, target = self._resolve_examples(X)
        if self.mode not in ("baseline", "dat", "oracle"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.mode == "oracle":
            missing = [ex.utterance_id for ex in target if ex.clean is None]
            if missing:
                raise ConfigurationError(
                    f"oracle mode needs clean references for target rows, missing for {missing[:3]}"
                )

        mean, std = compute_feature_stats(
            (ex.noisy for ex in source), stft_cfg, self.power_floor
        )
        size = ModelSize(
            feature_dim=stft_cfg.num_bins,
            enc_hidden=self.hidden_size,
            dec_hidden=self.hidden_size,
            disc_hidden=self.disc_hidden,
            num_classes=self.num_classes,
        )
        model = init_model(size, self.seed)
        model.feature_mean = mean
        model.feature_std = std

        examples = source if self.mode == "baseline" else source + target
        pool = build_segment_pool(
            examples, mean, std, stft_cfg, self.power_floor, self.segment_frames,
            require_clean=self.mode == "oracle",
        )
        trainer = Trainer(model, cfg, mode=self.mode)
        self.history_ = trainer.fit(pool)
        self.model_ = model
        self.n_steps_ = trainer.step
        return self

    def transform(self, X):
        """Enhance a Waveform or an iterable of Waveforms."""
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted; call fit first")
        cfg = self._stft_config()
        if isinstance(X, Waveform):
            return enhance(self.model_, X, cfg, self.power_floor, self.segment_frames)
        return [enhance(self.model_, w, cfg, self.power_floor, self.segment_frames) for w in X]
