"""Command-line entry point: synth / train / enhance / eval.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric abort
(NaN during training), 5 I/O error. DATSE_SEED overrides the config seed;
an explicit --seed flag overrides both. Relative paths resolve against
--workdir (default: current directory).
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .audio_io import read_wav, write_wav
from .config import RunConfig, load_config
from .corpus import build_corpus, load_corpus, write_corpus
from .dat import enhance
from .dsp import StftConfig
from .errors import (
    ConfigurationError,
    DataError,
    DatseError,
    NumericsError,
)
from .evalmetrics import (
    MetricReport,
    gap_coverage,
    ingest_external_scores,
    ssnr,
    stoi,
)
from .features import build_segment_pool, compute_feature_stats
from .nn import ModelSize, init_model, load_checkpoint, save_checkpoint
from .trainer import Trainer


def _resolve(workdir, path):
    p = Path(path)
    return p if p.is_absolute() else Path(workdir) / p


def _effective_seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("DATSE_SEED")
    return int(env) if env else None


def _load_run_config(args) -> RunConfig:
    path = _resolve(args.workdir, args.config) if args.config else None
    return load_config(path, seed_override=_effective_seed(args))


def cmd_synth(args):
    cfg = _load_run_config(args)
    out_dir = _resolve(args.workdir, args.out)
    corpus = build_corpus(cfg.corpus)
    manifest = write_corpus(corpus, out_dir)
    cfg.write_resolved(out_dir)
    roster = ", ".join(f"{c.id}:{c.name}({'s' if c.stationary else 'ns'})" for c in corpus.classes)
    print(f"N={corpus.n_source} source, M={corpus.m_target} target, "
          f"{len(corpus.test)} test examples")
    print(f"classes: {roster}")
    print(f"manifest: {manifest}")
    return 0


def cmd_train(args):
    cfg = _load_run_config(args)
    if args.mode:
        cfg.mode = args.mode
    manifest = _resolve(args.workdir, args.manifest)
    out_dir = _resolve(args.workdir, args.out)

    corpus = load_corpus(manifest)
    if len(corpus.classes) != cfg.num_classes():
        raise ConfigurationError(
            f"manifest has {len(corpus.classes)} classes but config lists {cfg.num_classes()}"
        )
    if cfg.mode == "oracle":
        missing = [ex.utterance_id for ex in corpus.target if ex.clean is None]
        if missing:
            raise ConfigurationError(
                "oracle mode needs clean references for target rows "
                f"(build the corpus with keep_target_clean); missing for {missing[:3]}"
            )

    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.write_resolved(out_dir)

    mean, std = compute_feature_stats((ex.noisy for ex in corpus.source), cfg.stft, cfg.power_floor)
    size = ModelSize(
        feature_dim=cfg.stft.num_bins,
        enc_hidden=cfg.hidden_size,
        dec_hidden=cfg.hidden_size,
        disc_hidden=cfg.disc_hidden,
        num_classes=cfg.num_classes(),
    )
    model = init_model(size, cfg.train.seed)
    model.feature_mean = mean
    model.feature_std = std
    save_checkpoint(model, out_dir / "initial.ckpt")

    examples = corpus.source if cfg.mode == "baseline" else corpus.source + corpus.target
    pool = build_segment_pool(
        examples, mean, std, cfg.stft, cfg.power_floor, require_clean=cfg.mode == "oracle"
    )
    trainer = Trainer(
        model, cfg.train, mode=cfg.mode,
        log_path=out_dir / "metrics.jsonl", checkpoint_dir=out_dir,
    )
    trainer.fit(pool)
    summary = {
        "mode": cfg.mode,
        "steps": trainer.step,
        "final_l_regress": trainer.mean_recent("l_regress"),
    }
    if cfg.mode == "dat":
        summary["final_l_dat"] = trainer.mean_recent("l_dat")
    print(json.dumps(summary, sort_keys=True))
    print(f"checkpoint: {out_dir / 'final.ckpt'}")
    return 0


def _stft_for_model(model, config_path, workdir):
    if config_path:
        return load_config(_resolve(workdir, config_path)).stft
    fft = 2 * (model.size.feature_dim - 1)
    return StftConfig(fft_size=fft, win_len=fft, hop=fft // 2)


def cmd_enhance(args):
    model = load_checkpoint(_resolve(args.workdir, args.checkpoint))
    stft_cfg = _stft_for_model(model, args.config, args.workdir)
    in_path = _resolve(args.workdir, args.input)
    out_dir = _resolve(args.workdir, args.out)
    if in_path.is_dir():
        files = sorted(in_path.glob("*.wav"))
        if not files:
            raise DataError(f"no .wav files in {in_path}")
    elif in_path.exists():
        files = [in_path]
    else:
        raise DataError(f"input not found: {in_path}")
    out_dir.mkdir(parents=True, exist_ok=True)
    for f in files:
        wav = read_wav(f)
        write_wav(out_dir / f.name, enhance(model, wav, stft_cfg))
    print(f"enhanced {len(files)} file(s) -> {out_dir}")
    return 0


def _read_manifest_rows(manifest_path):
    rows = []
    with open(manifest_path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{manifest_path}:{lineno}: bad JSON ({exc})") from exc
    return rows


def _metric_means(report_csv):
    skip = ("utterance_id", "noise_class", "snr_db")
    sums, counts = {}, {}
    with open(report_csv, newline="") as f:
        for row in csv.DictReader(f):
            for key, raw in row.items():
                if key in skip or raw in (None, ""):
                    continue
                try:
                    value = float(raw)
                except ValueError:
                    continue
                sums[key] = sums.get(key, 0.0) + value
                counts[key] = counts.get(key, 0) + 1
    if not sums:
        raise DataError(f"{report_csv}: no numeric metric columns found")
    return {k: sums[k] / counts[k] for k in sums}


def _cmd_eval_gap(args, out_dir):
    base, adapted, oracle = (
        _metric_means(_resolve(args.workdir, p)) for p in args.gap
    )
    common = sorted(set(base) & set(adapted) & set(oracle))
    if not common:
        raise DataError("gap reports share no metric columns")
    coverage = {m: gap_coverage(base[m], adapted[m], oracle[m]) for m in common}
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "gap_coverage.json", "w") as f:
        json.dump(coverage, f, indent=2, sort_keys=True)
    for metric in common:
        print(f"gap coverage {metric}: {coverage[metric]:.1f}%")
    return 0


def cmd_eval(args):
    out_dir = _resolve(args.workdir, args.out)
    if args.gap:
        return _cmd_eval_gap(args, out_dir)
    if not args.manifest:
        raise ConfigurationError("eval needs --manifest (or --gap)")
    manifest = _resolve(args.workdir, args.manifest)
    base = manifest.parent
    rows = _read_manifest_rows(manifest)
    if args.split:
        rows = [r for r in rows if r.get("split") == args.split]
    rows = [r for r in rows if r.get("clean_path")]

    enhanced_dir = _resolve(args.workdir, args.enhanced_dir) if args.enhanced_dir else None
    missing = []
    jobs = []
    for r in rows:
        clean_path = base / r["clean_path"]
        test_path = base / r["noisy_path"]
        if enhanced_dir is not None:
            test_path = enhanced_dir / Path(r["noisy_path"]).name
        if not clean_path.exists():
            missing.append(str(clean_path))
        elif not test_path.exists():
            missing.append(str(test_path))
        else:
            jobs.append((r, clean_path, test_path))
    if missing:
        for path in missing:
            print(f"missing file: {path}", file=sys.stderr)
        raise DataError(f"{len(missing)} referenced file(s) missing")

    def score(job):
        r, clean_path, test_path = job
        clean = read_wav(clean_path)
        test = read_wav(test_path)
        row = {
            "utterance_id": r["utterance_id"],
            "noise_class": r["noise_class"],
            "snr_db": r["snr_db"],
        }
        if "ssnr" in args.metrics:
            row["ssnr_db"] = ssnr(clean, test)
        if "stoi" in args.metrics:
            row["stoi"] = stoi(clean, test)
        return row

    workers = max(1, args.threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            report_rows = list(pool.map(score, jobs))
    else:
        report_rows = [score(j) for j in jobs]

    report = MetricReport(rows=report_rows, config={"metrics": list(args.metrics)})
    if args.external_scores:
        report.merge_external_scores(
            ingest_external_scores(_resolve(args.workdir, args.external_scores))
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_csv(out_dir / "report.csv")
    report.write_json(out_dir / "report.json")
    for agg in report.aggregates():
        parts = [f"class={agg['noise_class']}", f"snr={agg['snr_db']}"]
        parts += [f"{k}={v:.4f}" for k, v in agg.items() if k.startswith("mean_")]
        print("  ".join(parts))
    print(f"report: {out_dir / 'report.csv'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="datse",
        description="Noise-adaptive speech enhancement via domain-adversarial training",
    )
    parser.add_argument("--workdir", default=".", help="base for relative paths")
    parser.add_argument("--threads", type=int, default=1, help="worker cap for parallel stages")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train baseline / dat / oracle models")
    p.add_argument("--config", default=None)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("baseline", "dat", "oracle"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance a WAV file or directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="score (clean, noisy-or-enhanced) pairs")
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--enhanced-dir", dest="enhanced_dir", default=None)
    p.add_argument("--split", default=None, help="restrict to one manifest split")
    p.add_argument("--metrics", nargs="+", default=["ssnr", "stoi"], choices=["ssnr", "stoi"])
    p.add_argument("--external-scores", dest="external_scores", default=None)
    p.add_argument("--gap", nargs=3, metavar=("BASELINE", "ADAPTED", "ORACLE"), default=None)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        if exc.dump_path:
            print(f"diagnostics: {exc.dump_path}", file=sys.stderr)
        return 4
    except (DataError, DatseError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
