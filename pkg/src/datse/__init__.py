"""Noise-adaptive speech enhancement via domain-adversarial training.

A BLSTM encoder-decoder regresses clean log-power spectra from noisy ones; a
noise-type discriminator adversarially pushes the encoder toward
noise-invariant features, adapting the enhancer to noise classes it has no
clean references for. Includes the DSP front end, a synthetic corpus
generator, a from-scratch differentiable network engine, objective metrics
(segmental SNR, STOI), and a CLI for the full synth/train/enhance/eval loop.
"""

from .dsp import (
    ComplexSpectrogram,
    FeatureSegment,
    LpsFeatures,
    StftConfig,
    Waveform,
    desegment,
    from_lps,
    istft,
    segment,
    stft,
    to_lps,
)
from .audio_io import read_wav, write_wav, write_wav_pair
from .corpus import (
    Corpus,
    CorpusExample,
    CorpusSpec,
    NoiseClass,
    build_corpus,
    default_noise_classes,
    load_corpus,
    measure_snr_db,
    mix_at_snr,
    synth_noise,
    synth_speech_like,
    write_corpus,
)
from .dat import (
    Batch,
    TrainConfig,
    dat_loss,
    enhance,
    grl,
    make_batches,
    regress_loss,
    train_step_alternating,
    train_step_grl,
    train_step_supervised,
)
from .estimator import NoiseAdaptiveEnhancer
from .evalmetrics import (
    MetricReport,
    export_spectrogram_matrix,
    gap_coverage,
    ingest_external_scores,
    ssnr,
    stoi,
)
from .trainer import Trainer

__version__ = "0.1.0"

__all__ = [
    "Waveform", "StftConfig", "ComplexSpectrogram", "LpsFeatures", "FeatureSegment",
    "stft", "istft", "to_lps", "from_lps", "segment", "desegment",
    "read_wav", "write_wav", "write_wav_pair",
    "NoiseClass", "CorpusExample", "Corpus", "CorpusSpec",
    "default_noise_classes", "synth_speech_like", "synth_noise",
    "mix_at_snr", "measure_snr_db", "build_corpus", "write_corpus", "load_corpus",
    "TrainConfig", "Batch", "regress_loss", "dat_loss", "grl",
    "train_step_alternating", "train_step_grl", "train_step_supervised",
    "make_batches", "enhance", "Trainer",
    "NoiseAdaptiveEnhancer",
    "ssnr", "stoi", "gap_coverage", "ingest_external_scores",
    "export_spectrogram_matrix", "MetricReport",
    "__version__",
]
