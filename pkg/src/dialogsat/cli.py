"""Command-line pipeline: synth, stats, featurize, train, eval, ablate, iaa.

Every subcommand with randomness takes an explicit seed and re-running with
identical flags produces byte-identical output files. Exit codes: 0 success,
1 data error, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .ablation import ablate, render_markdown_table, results_to_json
from .corpus import corpus_stats, load_corpus, save_corpus
from .errors import ConfigError, DataError
from .evaluation import iaa, render_report_table, user_rating_correlation
from .features import (
    UnactionableLexicon,
    build_popularity_table,
    default_schema,
    featurize_corpus,
    write_features_csv,
)
from .models import MODEL_KINDS, ModelSpec
from .pipeline import (
    evaluate_pipeline,
    load_pipeline,
    save_pipeline,
    train_from_corpus,
)
from .synth import GeneratorConfig, generate_corpus, write_latent_sidecar

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_CONFIG_ERROR = 2


def _parse_config_value(raw: str):
    raw = raw.strip()
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def read_config_file(path: str | Path) -> dict:
    """Parse `key = value` lines; dotted keys nest (defect_rates.partial = 0.2)."""
    config: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config file line {line_no}: expected `key = value`")
        key, _, value = line.partition("=")
        key = key.strip()
        parts = key.split(".")
        target = config
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"config file line {line_no}: {key!r} conflicts with a scalar")
        target[parts[-1]] = _parse_config_value(value)
    return config


def _load_lexicon(args) -> UnactionableLexicon:
    if getattr(args, "lexicon", None):
        return UnactionableLexicon.from_file(args.lexicon)
    return UnactionableLexicon()


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out_dir", ".") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def _build_spec(kind: str, args) -> ModelSpec:
    overrides: dict = {}
    if getattr(args, "config", None):
        overrides.update(read_config_file(args.config))
    if getattr(args, "stages", None) is not None and kind == "gbrt":
        overrides["n_stages"] = args.stages
    if getattr(args, "shrinkage", None) is not None and kind == "gbrt":
        overrides["learning_rate"] = args.shrinkage
    if getattr(args, "epsilon", None) is not None and kind == "svr":
        overrides["epsilon"] = args.epsilon
    if getattr(args, "hidden_layers", None) is not None and kind == "mlp":
        overrides["hidden_layers"] = args.hidden_layers
    allowed = set(ModelSpec(kind).build().get_params())
    overrides = {k: v for k, v in overrides.items() if k in allowed}
    return ModelSpec(kind=kind, hyperparams=overrides, seed=args.seed)


# --- Subcommands -----------------------------------------------------------------

def cmd_synth(args) -> int:
    config_kwargs: dict = {"n_dialogues": args.dialogues, "seed": args.seed}
    if args.config:
        file_config = read_config_file(args.config)
        unknown = set(file_config) - set(GeneratorConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown generator config keys: {sorted(unknown)}")
        file_config.pop("n_dialogues", None)
        file_config.pop("seed", None)
        config_kwargs.update(file_config)
    config = GeneratorConfig(**config_kwargs)
    corpus, latents = generate_corpus(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out)
    latent_path = Path(args.latent_out) if args.latent_out else out.with_name(out.stem + ".latent.jsonl")
    write_latent_sidecar(latents, latent_path)
    print(f"wrote {out} ({len(corpus)} dialogues, {corpus.n_turns} turns)")
    print(f"wrote {latent_path} (latent sidecar; test oracle only)")
    return EXIT_OK


def cmd_stats(args) -> int:
    corpus = load_corpus(args.corpus)
    stats = corpus_stats(corpus)
    lines = ["segment,bin,count,percent"]
    for segment, rating_bin, count, percent in stats.rows():
        lines.append(f"{segment},{rating_bin},{count},{percent:.6f}")
    out = Path(args.out) if args.out else _out_dir(args) / "stats.csv"
    _write_text(out, "\n".join(lines) + "\n")
    print(f"dialogues: {stats.n_dialogues}, turns: {stats.n_turns}")
    for segment, seg_stats in stats.per_segment.items():
        print(
            f"  {segment.value}: {seg_stats.n_dialogues} dialogues, "
            f"{seg_stats.n_turns} turns"
        )
    return EXIT_OK


def cmd_featurize(args) -> int:
    corpus = load_corpus(args.corpus)
    lexicon = _load_lexicon(args)
    schema = default_schema()
    # Standalone inspection: popularity statistics come from this same corpus.
    table = build_popularity_table(corpus)
    vectors = featurize_corpus(corpus, table, schema, lexicon)
    out = Path(args.out) if args.out else _out_dir(args) / "features.csv"
    write_features_csv(vectors, schema, out)
    print(f"wrote {out} ({len(vectors)} turns x {len(schema)} features)")
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    lexicon = _load_lexicon(args)
    kinds = list(MODEL_KINDS) if args.model == "all" else [args.model]
    for kind in kinds:
        if kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS} or 'all'")
    out_dir = _out_dir(args)
    for kind in kinds:
        spec = _build_spec(kind, args)
        pipeline, split = train_from_corpus(
            corpus,
            spec,
            test_fraction=args.test_fraction,
            split_seed=args.seed,
            lexicon=lexicon,
        )
        if args.out and len(kinds) == 1:
            artifact_path = Path(args.out)
            artifact_path.parent.mkdir(parents=True, exist_ok=True)
        else:
            artifact_path = out_dir / f"model_{kind}.pkl"
        save_pipeline(pipeline, artifact_path)
        log = {
            "model": kind,
            "hyperparameters": spec.resolved_hyperparams(),
            "seed": args.seed,
            "test_fraction": args.test_fraction,
            "train_dialogues": len(split.train),
            "train_turns": pipeline.train_turns,
            "test_dialogues": len(split.test),
            "holdout_dialogues": len(split.holdout),
            "schema_fingerprint": pipeline.model.schema_fingerprint,
        }
        log_path = artifact_path.with_suffix(artifact_path.suffix + ".log.json")
        _write_text(log_path, json.dumps(log, indent=2, sort_keys=True) + "\n")
        print(f"trained {kind} with {log['hyperparameters']}")
        print(f"wrote {artifact_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pipeline = load_pipeline(args.model)
    corpus = load_corpus(args.corpus)
    report = evaluate_pipeline(pipeline, corpus, n_boot=args.n_boot, seed=args.seed)
    out_dir = _out_dir(args)
    kind = pipeline.model.kind
    _write_text(out_dir / f"eval_{kind}.json", report.to_json() + "\n")
    table = render_report_table([report])
    _write_text(out_dir / f"eval_{kind}.txt", table)
    print(table, end="")
    for note in report.notes:
        print(f"note: {note}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    corpus = load_corpus(args.corpus)
    lexicon = _load_lexicon(args)
    spec = _build_spec(args.model, args)
    from .corpus import split_corpus

    split = split_corpus(corpus, args.test_fraction, args.seed)
    tags = [t.strip() for t in args.sets.split(",")] if args.sets else None
    failures = []
    results = []
    for tag in tags if tags is not None else [None]:
        try:
            results.extend(
                ablate(
                    split,
                    spec,
                    tags=[tag] if tag is not None else None,
                    lexicon=lexicon,
                    n_boot=args.n_boot,
                    seed=args.seed,
                )
            )
        except (DataError, ConfigError) as exc:
            failures.append((tag, str(exc)))
            print(f"ablation run failed for {tag!r}: {exc}", file=sys.stderr)
    out_dir = _out_dir(args)
    _write_text(out_dir / f"ablation_{args.model}.json", results_to_json(results) + "\n")
    _write_text(out_dir / f"ablation_{args.model}.md", render_markdown_table(results))
    if failures:
        return EXIT_DATA_ERROR
    return EXIT_OK


def cmd_iaa(args) -> int:
    corpus = load_corpus(args.corpus)
    report = iaa(corpus)
    payload = report.to_dict()
    print(f"mean pairwise Spearman rho: {report.mean_rho:.4f} over {report.n_turns} turns")
    for (first, second), rho in report.per_pair.items():
        print(f"  {first} vs {second}: {rho:.4f}")
    has_user_ratings = any(
        turn.user_rating is not None for _, turn in corpus.iter_turns()
    )
    if has_user_ratings:
        r, lo, hi = user_rating_correlation(corpus, n_boot=args.n_boot, seed=args.seed)
        payload["user_rating_correlation"] = {"pearson_r": r, "ci95": [lo, hi]}
        print(f"user-rating correlation: {r:.4f} [{lo:.4f}, {hi:.4f}]")
    else:
        payload["user_rating_correlation"] = None
    out = Path(args.out) if args.out else _out_dir(args) / "iaa.json"
    _write_text(out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# --- Parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialogsat",
        description="Turn-level user satisfaction estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed_required: bool, seed_default=None):
        p.add_argument(
            "--seed", type=int, required=seed_required, default=seed_default,
            help="random seed" + (" (required)" if seed_required else ""),
        )
        p.add_argument("--out-dir", default=".", help="directory for output files")
        p.add_argument("--config", help="key=value config file")

    p_synth = sub.add_parser("synth", help="generate a synthetic annotated corpus")
    p_synth.add_argument("--dialogues", type=int, required=True, help="number of dialogues")
    p_synth.add_argument("-o", "--out", required=True, help="corpus JSONL output path")
    p_synth.add_argument("--latent-out", help="latent-quality sidecar path")
    add_common(p_synth, seed_required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_stats = sub.add_parser("stats", help="per-segment rating histograms")
    p_stats.add_argument("corpus", help="corpus JSONL path")
    p_stats.add_argument("-o", "--out", help="histogram CSV output path")
    add_common(p_stats, seed_required=False, seed_default=0)
    p_stats.set_defaults(func=cmd_stats)

    p_feat = sub.add_parser("featurize", help="write the feature matrix CSV")
    p_feat.add_argument("corpus", help="corpus JSONL path")
    p_feat.add_argument("-o", "--out", help="feature CSV output path")
    p_feat.add_argument("--lexicon", help="unactionable-lexicon override file")
    add_common(p_feat, seed_required=False, seed_default=0)
    p_feat.set_defaults(func=cmd_featurize)

    p_train = sub.add_parser("train", help="split, featurize, standardize, train")
    p_train.add_argument("corpus", help="corpus JSONL path")
    p_train.add_argument(
        "--model", required=True, help=f"one of {', '.join(MODEL_KINDS)}, or 'all'"
    )
    p_train.add_argument("-o", "--out", help="model artifact path (single model only)")
    p_train.add_argument("--test-fraction", type=float, default=0.2)
    p_train.add_argument("--lexicon", help="unactionable-lexicon override file")
    p_train.add_argument("--stages", type=int, help="gbrt boosting stages")
    p_train.add_argument("--shrinkage", type=float, help="gbrt shrinkage (learning rate)")
    p_train.add_argument("--epsilon", type=float, help="svr epsilon tube half-width")
    p_train.add_argument("--hidden-layers", type=int, help="mlp hidden layer count")
    add_common(p_train, seed_required=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="per-segment metrics with bootstrap CIs")
    p_eval.add_argument("model", help="model artifact path")
    p_eval.add_argument("corpus", help="corpus JSONL path")
    p_eval.add_argument("--n-boot", type=int, default=1000)
    add_common(p_eval, seed_required=False, seed_default=0)
    p_eval.set_defaults(func=cmd_eval)

    p_ablate = sub.add_parser("ablate", help="retrain with one feature set removed")
    p_ablate.add_argument("corpus", help="corpus JSONL path")
    p_ablate.add_argument("--model", default="gbrt", help=f"one of {', '.join(MODEL_KINDS)}")
    p_ablate.add_argument("--sets", help="comma-separated feature sets (default: all five new)")
    p_ablate.add_argument("--test-fraction", type=float, default=0.2)
    p_ablate.add_argument("--n-boot", type=int, default=1000)
    p_ablate.add_argument("--lexicon", help="unactionable-lexicon override file")
    p_ablate.add_argument("--stages", type=int, help="gbrt boosting stages")
    p_ablate.add_argument("--shrinkage", type=float, help="gbrt shrinkage (learning rate)")
    p_ablate.add_argument("--epsilon", type=float, help="svr epsilon tube half-width")
    p_ablate.add_argument("--hidden-layers", type=int, help="mlp hidden layer count")
    add_common(p_ablate, seed_required=True)
    p_ablate.set_defaults(func=cmd_ablate)

    p_iaa = sub.add_parser("iaa", help="inter-annotator agreement report")
    p_iaa.add_argument("corpus", help="corpus JSONL path")
    p_iaa.add_argument("-o", "--out", help="report JSON output path")
    p_iaa.add_argument("--n-boot", type=int, default=1000)
    add_common(p_iaa, seed_required=False, seed_default=0)
    p_iaa.set_defaults(func=cmd_iaa)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
