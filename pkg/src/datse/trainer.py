"""Training loop over segment pools: epoch shuffling, metrics logging,
periodic checkpoints, and abort-with-diagnostics on non-finite losses.

Modes select the step function and nothing else -- the caller decides which
corpus splits feed the pool:

- baseline: plain supervised MAE (feed source rows only)
- oracle:   plain supervised MAE (feed source + target rows, targets present)
- dat:      adversarial adaptation per the configured scheme
"""

import json
from pathlib import Path

import numpy as np

from .dat import (
    Batch,
    TrainConfig,
    disc_gradients,
    make_batches,
    train_step_alternating,
    train_step_grl,
    train_step_supervised,
)
from .errors import ConfigurationError, NumericsError
from .nn import AdamState, ModelParams, adam_step, save_checkpoint

MODES = ("baseline", "dat", "oracle")


class Trainer:
    def __init__(self, model: ModelParams, cfg: TrainConfig, mode: str = "dat",
                 log_path=None, checkpoint_dir=None):
        cfg.validate()
        if mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
        self.model = model
        self.cfg = cfg
        self.mode = mode
        self.log_path = Path(log_path) if log_path else None
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.adam_se = AdamState(model.se_params())
        self.adam_disc = AdamState(model.disc_params())
        self.step = 0
        self.history = []

    def _run_step(self, batch: Batch):
        if self.mode in ("baseline", "oracle"):
            return train_step_supervised(self.model, batch, self.cfg, self.adam_se)
        if not batch.domain_mask.any():
            # all-target batch: nothing to regress; train the discriminator only
            grads, l_dat, acc = disc_gradients(self.model, batch)
            norm = adam_step(self.model.disc_params(), grads, self.adam_disc,
                             self.cfg.lr_disc, self.cfg.clip_norm)
            return {"l_dat": l_dat, "disc_accuracy": acc, "grad_norm_disc": norm}
        if self.cfg.scheme == "grl":
            return train_step_grl(self.model, batch, self.cfg, self.adam_se, self.adam_disc)
        return train_step_alternating(self.model, batch, self.cfg, self.adam_se, self.adam_disc)

    def _checkpoint(self, name):
        if self.checkpoint_dir is None:
            return None
        self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        path = self.checkpoint_dir / name
        save_checkpoint(self.model, path)
        return path

    def _dump_diagnostics(self, epoch, exc):
        info = {
            "mode": self.mode,
            "step": self.step,
            "epoch": epoch,
            "error": str(exc),
            "recent_metrics": self.history[-5:],
        }
        dump_path = None
        if self.checkpoint_dir is not None:
            self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
            dump_path = self.checkpoint_dir / "diagnostic.json"
            with open(dump_path, "w") as f:
                json.dump(info, f, indent=2)
            save_checkpoint(self.model, self.checkpoint_dir / "diagnostic.ckpt")
        return dump_path

    def fit(self, pool, max_steps=None):
        """Train for cfg.epochs over the pool; returns the metrics history."""
        if len(pool) == 0:
            raise ValueError("segment pool is empty")
        if pool.n_source == 0:
            raise ConfigurationError(f"{self.mode} training needs rows with clean targets")
        log_file = open(self.log_path, "w") if self.log_path else None
        try:
            for epoch in range(self.cfg.epochs):
                for batch in make_batches(pool, self.cfg.batch_size, self.cfg.seed, epoch):
                    try:
                        metrics = self._run_step(batch)
                    except NumericsError as exc:
                        dump = self._dump_diagnostics(epoch, exc)
                        raise NumericsError(str(exc), dump_path=dump) from exc
                    self.step += 1
                    row = {"step": self.step, "epoch": epoch, **metrics}
                    self.history.append(row)
                    if log_file is not None:
                        log_file.write(json.dumps(row, sort_keys=True) + "\n")
                    if max_steps is not None and self.step >= max_steps:
                        self._checkpoint("final.ckpt")
                        return self.history
                every = self.cfg.checkpoint_every_epochs
                if every and (epoch + 1) % every == 0 and epoch + 1 < self.cfg.epochs:
                    self._checkpoint(f"epoch{epoch + 1:04d}.ckpt")
            self._checkpoint("final.ckpt")
            return self.history
        finally:
            if log_file is not None:
                log_file.close()

    def mean_recent(self, key, n=50):
        vals = [row[key] for row in self.history[-n:] if key in row]
        return float(np.mean(vals)) if vals else float("nan")
