"""Adversarial noise-adaptation machinery.

The enhancement objective is mean absolute error on source-domain rows; the
adversarial objective is categorical cross-entropy of the noise-type
discriminator over source and target rows together. Two realizations are
provided and compute identical encoder gradients at identical parameters:

- alternating: phase 1 updates the discriminator on its cross-entropy;
  phase 2 re-runs the forward pass and moves the encoder along
  grad(L_regress) - lambda * grad(L_dat) while the decoder follows
  grad(L_regress).
- grl: one combined pass where a gradient reversal layer between encoder and
  discriminator multiplies the upstream gradient by -lambda, and all three
  parameter sets update simultaneously.
"""

import time
from dataclasses import dataclass

import numpy as np

from .dsp import (
    DEFAULT_POWER_FLOOR,
    SEGMENT_FRAMES,
    LpsFeatures,
    StftConfig,
    Waveform,
    from_lps,
    istft,
    stft,
    to_lps,
)
from .errors import ConfigurationError, NumericsError
from .features import split_frames
from .nn import (
    AdamState,
    ModelParams,
    Tape,
    Tensor,
    adam_step,
    backward,
    decode,
    discriminate,
    encode,
    zero_grad,
)

LOG_FLOOR = 1e-12
SCHEMES = ("alternating", "grl")


@dataclass
class TrainConfig:
    lambda_: float = 0.05
    lr_se: float = 1e-4
    lr_disc: float = 5e-4
    batch_size: int = 16
    scheme: str = "alternating"
    epochs: int = 10
    seed: int = 0
    num_classes: int = 6
    clip_norm: float = None
    checkpoint_every_epochs: int = 0  # 0 = checkpoint only at termination

    def validate(self):
        if self.lambda_ < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lambda_}")
        if self.lr_se <= 0 or self.lr_disc <= 0:
            raise ConfigurationError("learning rates must be positive")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.num_classes < 2:
            raise ConfigurationError(f"need >= 2 noise classes, got {self.num_classes}")
        return self


@dataclass
class Batch:
    """One training batch. targets rows are only meaningful where domain_mask
    (source flag) is True; class labels cover every row."""

    segments: np.ndarray  # (B, T, F) float32, standardized noisy LPS
    targets: np.ndarray  # (B, T, F) float32, zeros on target-domain rows
    class_labels: np.ndarray  # (B,) int, 1..C
    domain_mask: np.ndarray  # (B,) bool, True = source row

    @property
    def size(self):
        return self.segments.shape[0]

    def source_indices(self):
        return np.nonzero(self.domain_mask)[0]


def regress_loss(pred: Tensor, target, tape: Tape = None) -> Tensor:
    """Mean over batch, frames, and bins of |pred - target|."""
    target = np.asarray(target, dtype=pred.values.dtype)
    if pred.values.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.values.shape} vs target {target.shape}")
    if pred.values.size == 0:
        raise ValueError("regress_loss needs at least one source row")
    diff = pred.values - target
    out = Tensor(np.mean(np.abs(diff), dtype=pred.values.dtype))
    if tape is None:
        return out

    def backward_fn(grad_out):
        return (np.sign(diff) * (grad_out / diff.size),)

    return tape.record([pred], out, backward_fn)


def dat_loss(probs: Tensor, labels, tape: Tape = None) -> Tensor:
    """Categorical cross-entropy over all rows: -mean_i log P(c_i | f_i),
    with the log floored at log(1e-12)."""
    c = probs.values.shape[-1]
    p = probs.values.reshape(-1, c)
    labels = np.asarray(labels)
    n = p.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if np.any(labels < 1) or np.any(labels > c):
        raise ValueError(f"class labels must be in 1..{c}")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-5):
        raise ValueError("probability rows must sum to 1")
    idx = labels - 1
    picked = p[np.arange(n), idx]
    floored = np.maximum(picked, LOG_FLOOR)
    out = Tensor(np.asarray(-np.mean(np.log(floored)), dtype=p.dtype))
    if tape is None:
        return out

    def backward_fn(grad_out):
        dp = np.zeros_like(p)
        live = picked > LOG_FLOOR
        rows = np.arange(n)[live]
        dp[rows, idx[live]] = -grad_out / (n * picked[live])
        return (dp.reshape(probs.values.shape),)

    return tape.record([probs], out, backward_fn)


def grl(f: Tensor, lam: float, tape: Tape = None) -> Tensor:
    """Identity forward; backward multiplies the upstream gradient by -lambda."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    out = Tensor(f.values)
    if tape is None:
        return out

    def backward_fn(grad_out):
        return ((-lam) * grad_out,)

    return tape.record([f], out, backward_fn)


def select_rows(x: Tensor, indices, tape: Tape = None) -> Tensor:
    """Gather rows along axis 0 (used to restrict the decoder to source rows)."""
    indices = np.asarray(indices, dtype=np.intp)
    out = Tensor(x.values[indices])
    if tape is None:
        return out

    def backward_fn(grad_out):
        dx = np.zeros_like(x.values)
        np.add.at(dx, indices, grad_out)
        return (dx,)

    return tape.record([x], out, backward_fn)


def lincomb(a: Tensor, ca: float, b: Tensor, cb: float, tape: Tape = None) -> Tensor:
    """Scalar combination ca*a + cb*b."""
    out = Tensor(ca * a.values + cb * b.values)
    if tape is None:
        return out

    def backward_fn(grad_out):
        return ca * grad_out, cb * grad_out

    return tape.record([a, b], out, backward_fn)


def _check_latent(f: Tensor):
    if not np.all(np.isfinite(f.values)):
        raise NumericsError("encoder produced NaN/Inf latent features")


def disc_gradients(model: ModelParams, batch: Batch):
    """Cross-entropy gradients for the discriminator only (encoder frozen:
    the latent features enter as constants). Returns (grads, l_dat, accuracy)."""
    f_const = Tensor(encode(model, Tensor(batch.segments)).values)
    _check_latent(f_const)
    tape = Tape()
    probs = discriminate(model, f_const, tape)
    loss = dat_loss(probs, batch.class_labels, tape)
    params = model.disc_params()
    zero_grad(params)
    backward(tape, loss, params)
    acc = float(np.mean(np.argmax(probs.values, axis=-1) == batch.class_labels - 1))
    return [p.grad for p in params], float(loss.values), acc


def se_gradients(model: ModelParams, batch: Batch, lam: float):
    """Phase-2 gradients: encoder follows grad(L_regress) - lambda*grad(L_dat),
    decoder follows grad(L_regress). Returns (grads, l_regress, l_dat)."""
    src = batch.source_indices()
    if src.size == 0:
        raise ValueError("batch contains no source rows")
    tape = Tape()
    x = Tensor(batch.segments)
    f = encode(model, x, tape)
    _check_latent(f)
    pred = decode(model, select_rows(f, src, tape), tape)
    l_regress = regress_loss(pred, batch.targets[src], tape)
    if lam == 0.0:
        loss, l_dat_value = l_regress, None
    else:
        probs = discriminate(model, f, tape)
        l_dat = dat_loss(probs, batch.class_labels, tape)
        loss = lincomb(l_regress, 1.0, l_dat, -lam, tape)
        l_dat_value = float(l_dat.values)
    params = model.se_params()
    zero_grad(params)
    zero_grad(model.disc_params())
    backward(tape, loss, params)
    return [p.grad for p in params], float(l_regress.values), l_dat_value


def grl_gradients(model: ModelParams, batch: Batch, lam: float):
    """Single combined pass with the reversal layer on the discriminator branch.
    Returns (se_grads, disc_grads, l_regress, l_dat, accuracy)."""
    src = batch.source_indices()
    if src.size == 0:
        raise ValueError("batch contains no source rows")
    tape = Tape()
    x = Tensor(batch.segments)
    f = encode(model, x, tape)
    _check_latent(f)
    pred = decode(model, select_rows(f, src, tape), tape)
    l_regress = regress_loss(pred, batch.targets[src], tape)
    probs = discriminate(model, grl(f, lam, tape), tape)
    l_dat = dat_loss(probs, batch.class_labels, tape)
    loss = lincomb(l_regress, 1.0, l_dat, 1.0, tape)
    se_params, disc_params = model.se_params(), model.disc_params()
    zero_grad(se_params)
    zero_grad(disc_params)
    backward(tape, loss, se_params + disc_params)
    acc = float(np.mean(np.argmax(probs.values, axis=-1) == batch.class_labels - 1))
    return (
        [p.grad for p in se_params],
        [p.grad for p in disc_params],
        float(l_regress.values),
        float(l_dat.values),
        acc,
    )


def _abort_on_nan(metrics):
    bad = [k for k, v in metrics.items() if isinstance(v, float) and not np.isfinite(v)]
    if bad:
        raise NumericsError(f"non-finite training metrics: {bad}")


def train_step_alternating(model: ModelParams, batch: Batch, cfg: TrainConfig,
                           adam_se: AdamState, adam_disc: AdamState):
    """Discriminator update on L_dat, then a fresh pass updating encoder/decoder."""
    start = time.perf_counter()
    disc_grads, l_dat_1, acc = disc_gradients(model, batch)
    norm_disc = adam_step(model.disc_params(), disc_grads, adam_disc, cfg.lr_disc, cfg.clip_norm)
    se_grads, l_regress, l_dat_2 = se_gradients(model, batch, cfg.lambda_)
    norm_se = adam_step(model.se_params(), se_grads, adam_se, cfg.lr_se, cfg.clip_norm)
    metrics = {
        "l_regress": l_regress,
        "l_dat": l_dat_2 if l_dat_2 is not None else l_dat_1,
        "disc_accuracy": acc,
        "grad_norm_enc": norm_se,
        "grad_norm_disc": norm_disc,
        "wall_ms": 1000.0 * (time.perf_counter() - start),
    }
    _abort_on_nan(metrics)
    return metrics


def train_step_grl(model: ModelParams, batch: Batch, cfg: TrainConfig,
                   adam_se: AdamState, adam_disc: AdamState):
    """One combined pass; simultaneous update of all three parameter sets."""
    start = time.perf_counter()
    se_grads, disc_grads, l_regress, l_dat, acc = grl_gradients(model, batch, cfg.lambda_)
    norm_se = adam_step(model.se_params(), se_grads, adam_se, cfg.lr_se, cfg.clip_norm)
    norm_disc = adam_step(model.disc_params(), disc_grads, adam_disc, cfg.lr_disc, cfg.clip_norm)
    metrics = {
        "l_regress": l_regress,
        "l_dat": l_dat,
        "disc_accuracy": acc,
        "grad_norm_enc": norm_se,
        "grad_norm_disc": norm_disc,
        "wall_ms": 1000.0 * (time.perf_counter() - start),
    }
    _abort_on_nan(metrics)
    return metrics


def train_step_supervised(model: ModelParams, batch: Batch, cfg: TrainConfig,
                          adam_se: AdamState):
    """Plain MAE step on rows that carry targets; the discriminator is untouched."""
    start = time.perf_counter()
    se_grads, l_regress, _ = se_gradients(model, batch, 0.0)
    norm_se = adam_step(model.se_params(), se_grads, adam_se, cfg.lr_se, cfg.clip_norm)
    metrics = {
        "l_regress": l_regress,
        "grad_norm_enc": norm_se,
        "wall_ms": 1000.0 * (time.perf_counter() - start),
    }
    _abort_on_nan(metrics)
    return metrics


def make_batches(pool, batch_size: int, seed: int, epoch: int):
    """Shuffle the unified source+target segment pool and yield batches.

    The permutation is deterministic per (seed, epoch); every row appears
    exactly once per epoch.
    """
    if len(pool) == 0:
        raise ValueError("segment pool is empty")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch), 0x5E9]))
    order = rng.permutation(len(pool))
    for start in range(0, len(order), batch_size):
        rows = order[start : start + batch_size]
        yield Batch(
            segments=pool.noisy[rows],
            targets=pool.clean[rows],
            class_labels=pool.labels[rows],
            domain_mask=pool.has_target[rows],
        )


def enhance(model: ModelParams, noisy: Waveform,
            cfg: StftConfig = StftConfig(),
            power_floor: float = DEFAULT_POWER_FLOOR,
            seg_len: int = SEGMENT_FRAMES) -> Waveform:
    """Denoise one waveform: analyze, standardize, run encoder-decoder per
    segment, then resynthesize with the noisy signal's phases."""
    if len(noisy) < cfg.win_len:
        raise ValueError(
            f"audio shorter than one analysis frame ({len(noisy)} < {cfg.win_len} samples)"
        )
    spec = stft(noisy, cfg)
    lps = to_lps(spec, power_floor)
    mean = model.feature_mean.astype(np.float64)
    std = model.feature_std.astype(np.float64)
    standardized = (lps.frames - mean) / std
    batch_in = split_frames(standardized.astype(np.float32), seg_len)
    pred = decode(model, encode(model, Tensor(batch_in))).values
    stacked = pred.reshape(-1, cfg.num_bins)[: lps.num_frames].astype(np.float64)
    enhanced_lps = LpsFeatures(stacked * std + mean, cfg)
    return istft(from_lps(enhanced_lps, spec), out_len=len(noisy))
