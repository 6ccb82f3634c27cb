"""Desk-scale adaptation experiment driver (development aid, not shipped API).

Builds the acceptance-sized corpus once, then trains baseline / dat / oracle
models for one or more seeds and reports held-out target-noise SSNR/STOI.
"""

import argparse
import time

import numpy as np

from datse.corpus import CorpusSpec, Corpus, CorpusExample, build_corpus
from datse.dat import TrainConfig, enhance
from datse.dsp import StftConfig
from datse.evalmetrics import ssnr, stoi
from datse.features import build_segment_pool, compute_feature_stats
from datse.nn import ModelSize, init_model
from datse.trainer import Trainer


def drop_target_clean(corpus):
    stripped = [
        CorpusExample(ex.noisy, None, ex.noise_class, ex.snr_db, ex.utterance_id, ex.split)
        for ex in corpus.target
    ]
    return Corpus(corpus.source, stripped, corpus.classes, corpus.seed, corpus.test)


def run_mode(corpus, mode, seed, hidden, disc_hidden, cfg_kwargs, stft_cfg):
    t0 = time.perf_counter()
    mean, std = compute_feature_stats((ex.noisy for ex in corpus.source), stft_cfg)
    size = ModelSize(feature_dim=stft_cfg.num_bins, enc_hidden=hidden, dec_hidden=hidden,
                     disc_hidden=disc_hidden, num_classes=len(corpus.classes))
    model = init_model(size, seed)
    model.feature_mean, model.feature_std = mean, std
    examples = corpus.source if mode == "baseline" else corpus.source + corpus.target
    pool = build_segment_pool(examples, mean, std, stft_cfg, require_clean=(mode == "oracle"))
    cfg = TrainConfig(seed=seed, num_classes=size.num_classes, **cfg_kwargs)
    trainer = Trainer(model, cfg, mode=mode)
    trainer.fit(pool)
    scores = []
    for ex in corpus.test:
        out = enhance(model, ex.noisy, stft_cfg)
        scores.append((ssnr(ex.clean, out), stoi(ex.clean, out)))
    arr = np.array(scores)
    dt = time.perf_counter() - t0
    extras = {
        "l_regress": trainer.mean_recent("l_regress"),
        "disc_acc": trainer.mean_recent("disc_accuracy"),
    }
    return arr[:, 0].mean(), arr[:, 1].mean(), extras, dt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--utts", type=int, default=40)
    ap.add_argument("--targets", type=int, default=20)
    ap.add_argument("--tests", type=int, default=10)
    ap.add_argument("--epochs", type=int, default=12)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--disc-hidden", type=int, default=64)
    ap.add_argument("--lr-se", type=float, default=1e-3)
    ap.add_argument("--lr-disc", type=float, default=2e-3)
    ap.add_argument("--lam", type=float, default=0.05)
    ap.add_argument("--dur", type=float, nargs=2, default=[0.9, 1.2])
    ap.add_argument("--modes", nargs="+", default=["baseline", "dat", "oracle"])
    ap.add_argument("--corpus-seed", type=int, default=100)
    args = ap.parse_args()

    stft_cfg = StftConfig()
    spec = CorpusSpec(
        seed=args.corpus_seed,
        source_utterances=args.utts,
        target_utterances=args.targets,
        test_utterances=args.tests,
        source_snrs_db=(-5.0, 0.0, 5.0),
        test_snrs_db=(-3.0, 0.0),
        duration_range_s=tuple(args.dur),
        keep_target_clean=True,
    )
    t0 = time.perf_counter()
    oracle_corpus = build_corpus(spec)
    dat_corpus = drop_target_clean(oracle_corpus)
    print(f"corpus: N={oracle_corpus.n_source} M={oracle_corpus.m_target} "
          f"test={len(oracle_corpus.test)} built in {time.perf_counter()-t0:.1f}s")

    # noisy (unprocessed) reference scores
    noisy_scores = np.array([
        (ssnr(ex.clean, ex.noisy), stoi(ex.clean, ex.noisy)) for ex in oracle_corpus.test
    ])
    print(f"unprocessed: ssnr={noisy_scores[:,0].mean():+.3f} stoi={noisy_scores[:,1].mean():.4f}")

    cfg_kwargs = dict(lambda_=args.lam, lr_se=args.lr_se, lr_disc=args.lr_disc,
                      epochs=args.epochs)
    results = {m: [] for m in args.modes}
    for seed in args.seeds:
        for mode in args.modes:
            corpus = oracle_corpus if mode == "oracle" else dat_corpus
            s, st, extras, dt = run_mode(corpus, mode, seed, args.hidden, args.disc_hidden,
                                         cfg_kwargs, stft_cfg)
            results[mode].append((s, st))
            print(f"seed {seed} {mode:9s}: ssnr={s:+.3f} stoi={st:.4f} "
                  f"l_regress={extras['l_regress']:.4f} disc_acc={extras['disc_acc']:.2f} ({dt:.0f}s)")
    print("== means over seeds ==")
    for mode in args.modes:
        arr = np.array(results[mode])
        print(f"{mode:9s}: ssnr={arr[:,0].mean():+.3f} stoi={arr[:,1].mean():.4f}")


if __name__ == "__main__":
    main()
