"""Command-line entry point: ingest, extract, match, sweep, stats, plotdata."""
import argparse
import logging
import shutil
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from afr_match.dataset import (
    AugmentOp,
    FingerprintRecord,
    Level,
    MANIFEST_FILENAME,
    Manifest,
    augment,
    category_counts,
    convert_format,
    discover_categories,
    genuine_map,
    list_images,
    load_category,
    load_image,
    load_manifest,
    relabel,
    save_manifest,
    split,
)
from afr_match.dataset.socofing import AUGMENTED_SUFFIX, ManifestEntry
from afr_match.errors import (
    AfrMatchError,
    ConfigError,
    CorruptReport,
    ExtractionError,
    MissingEmbeddings,
    MissingInput,
    MixedExtractors,
    ModelLoadFailure,
    OutputExists,
    PairError,
    ShapeMismatch,
)
from afr_match.features import (
    CACHE_SUFFIX,
    EmbeddingVector,
    batch_count,
    batch_extract,
    cache_header,
    cache_load,
    cache_save,
    get_extractor,
)
from afr_match.processing.evaluation import SweepConfig, ThresholdReport, separation, sweep
from afr_match.processing.matcher import GroundTruth, best_match, match_all
from afr_match.processing.reports import (
    decisions_to_csv,
    emit_plot_data,
    emit_report,
    format_threshold,
    load_report,
)
from afr_match.processing.statistics import StatsSummary, stats_summary
from afr_match.utils.config import EXTRACTOR_CHOICES, RunConfig, load_run_config
from afr_match.utils.file_utils import save_bytes, save_json
from afr_match.utils.log import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_MISSING_INPUT = 2
EXIT_OUTPUT_EXISTS = 3
EXIT_MODEL = 4
EXIT_EXTRACTOR_MISMATCH = 5
EXIT_CONFIG = 6

EMBEDDINGS_DIR = 'embeddings'
DECISIONS_DIR = 'decisions'
INGEST_SUMMARY_FILENAME = 'ingest.json'
REPORT_BASENAME = 'report'
PLOT_DATA_FILENAME = 'plotdata.csv'
STATS_FILENAME = 'stats.json'
DETERMINISTIC_TIMESTAMP = datetime(1970, 1, 1, tzinfo=timezone.utc)

# argparse dest -> RunConfig field
CONFIG_FLAGS = {
    'dataset': 'dataset_root',
    'out': 'output_root',
    'extractor': 'extractor',
    'model_path': 'model_path',
    'embedding_output': 'embedding_output',
    'batch_size': 'batch_size',
    'thresholds': 'thresholds',
    'modes': 'modes',
    'seed': 'seed',
    'split': 'split',
    'jobs': 'jobs',
    'format': 'formats',
    'log_level': 'log_level',
}


def _rule() -> None:
    print("=" * 80)


def _fmt(value: Optional[float]) -> str:
    return 'n/a' if value is None else f"{value:.4f}"


def _guard_outputs(paths: Iterable[Path], force: bool) -> None:
    """Refuse to overwrite existing outputs unless --force was given."""
    existing = [p for p in paths if p.exists()]
    if existing and not force:
        raise OutputExists(f"Output already exists: {existing[0]} (use --force to overwrite)")


def _cache_path(out: Path, category: str) -> Path:
    return out / EMBEDDINGS_DIR / f"{category}{CACHE_SUFFIX}"


def _load_embeddings(out: Path, categories: Sequence[str]) -> Dict[str, List[EmbeddingVector]]:
    """
    Load the caches for the given categories after checking they share an extractor.

    Raises:
        MissingInput: If a cache file is absent
        MixedExtractors: If the caches come from different extractors
    """
    headers = {}
    for category in categories:
        path = _cache_path(out, category)
        if not path.exists():
            raise MissingInput(f"Embedding cache not found: {path} (run `afr-match extract` first)")
        headers[category] = cache_header(path)

    extractor_ids = {header[0] for header in headers.values()}
    if len(extractor_ids) > 1:
        detail = ', '.join(f"{c}={h[0]}" for c, h in headers.items())
        raise MixedExtractors(f"Embedding caches come from different extractors: {detail}")

    embeddings = {}
    for category in categories:
        embeddings[category] = cache_load(_cache_path(out, category))
        print(f"Loaded {len(embeddings[category])} {category} embeddings ({headers[category][0]}, dim {headers[category][1]})")
    return embeddings


def _load_ground_truth(out: Path, modes: Sequence[str]) -> Dict[str, GroundTruth]:
    """Genuine/impostor labels per mode from the ingest manifests (empty if absent)."""
    real_path = out / Level.REAL.value / MANIFEST_FILENAME
    if not real_path.exists():
        logger.warning("No Real manifest at %s; ground-truth metrics will be empty", real_path)
        return {}
    real_manifest = load_manifest(real_path)
    labels = {}
    for mode in modes:
        path = out / mode / MANIFEST_FILENAME
        if path.exists():
            labels[mode] = genuine_map(real_manifest, load_manifest(path))
    return labels


def _write_augmented(
    records: Sequence[FingerprintRecord],
    ops: Sequence[AugmentOp],
    dest: Path,
    seed: int,
    created_at: datetime
) -> int:
    """Write one augmented PNG per (record, op) plus a manifest; returns the image count."""
    entries = []
    for index, record in enumerate(records):
        # Offset the seed per record so copies differ but stay reproducible
        outputs = augment(record.pixels, ops, seed=seed + index)
        stem = Path(record.record_id).stem
        for op, image in zip(ops, outputs):
            record_id = f"{stem}.{op.tag}.png"
            save_bytes(convert_format(image), dest / record_id)
            entries.append(ManifestEntry(
                source_name=record.source_name,
                record_id=record_id,
                identity=record.identity,
                alteration=record.alteration,
            ))
    save_manifest(Manifest(entries=entries, created_at=created_at, category=dest.name), dest / MANIFEST_FILENAME)
    return len(entries)


def cmd_ingest(args: argparse.Namespace, config: RunConfig) -> int:
    """Relabel and convert the four category directories into <out>/<Level>/."""
    if config.dataset_root is None:
        raise ConfigError("ingest needs --dataset (or AFRNET_DATASET)", key='dataset_root')
    src = Path(config.dataset_root)
    if not src.is_dir():
        raise MissingInput(f"Dataset root not found: {src}")

    # All four categories must exist before anything is written
    found = discover_categories(src)
    missing = [level.value for level in Level if level not in found]
    if missing:
        raise MissingInput(f"Missing category directory under {src}: {', '.join(missing)}")

    # Parse and validate augmentations up front
    ops = [AugmentOp.parse(text) for text in args.augment.split(',')] if args.augment else []
    for op in ops:
        op.validate()

    out = Path(config.output_root)
    targets = [out / level.value for level in Level]
    if ops:
        targets += [out / f"{level.value}{AUGMENTED_SUFFIX}" for level in Level]
    _guard_outputs([t / MANIFEST_FILENAME for t in targets], args.force)

    created_at = DETERMINISTIC_TIMESTAMP if args.deterministic else datetime.now(timezone.utc)

    _rule()
    print(f"Ingesting {src} -> {out}")
    _rule()
    manifests = []
    augmented_total = 0
    for level in Level:
        category_dir = found[level]
        dest = out / level.value
        if dest.exists():
            shutil.rmtree(dest)
        listing = list_images(category_dir)
        if not listing:
            raise MissingInput(f"No BMP/PNG images in {category_dir}")

        # Relabel, then convert each source image to PNG under its new name
        manifest = relabel(listing, level, created_at)
        for entry in manifest.entries:
            save_bytes(convert_format(load_image(category_dir / entry.source_name)), dest / entry.record_id)
        save_manifest(manifest, dest / MANIFEST_FILENAME)
        manifests.append(manifest)
        print(f"  {level.value}: {len(manifest)} images")

        if ops:
            aug_dest = out / f"{level.value}{AUGMENTED_SUFFIX}"
            if aug_dest.exists():
                shutil.rmtree(aug_dest)
            records = load_category(out, level, manifest)
            count = _write_augmented(records, ops, aug_dest, config.seed, created_at)
            augmented_total += count
            print(f"  {aug_dest.name}: {count} augmented images")

    counts = category_counts(manifests)
    save_json(
        {
            'created_at': created_at.isoformat(),
            'counts': counts,
            'augment': [op.tag for op in ops],
            'seed': config.seed,
        },
        out / INGEST_SUMMARY_FILENAME,
    )

    print("\nSummary:")
    for level in Level:
        print(f"  {level.value}: {counts[level.value]}")
    print(f"  Total: {counts['total']} images")
    if ops:
        print(f"  Augmented (excluded from sweeps): {augmented_total}")
    return EXIT_OK


def cmd_extract(args: argparse.Namespace, config: RunConfig) -> int:
    """Embed every ingested category and write one cache file per category."""
    out = Path(config.output_root)
    levels = [level for level in Level if (out / level.value / MANIFEST_FILENAME).exists()]
    if Level.REAL not in levels:
        raise MissingInput(f"No Real manifest under {out} (run `afr-match ingest` first)")

    destinations = {level: _cache_path(out, level.value) for level in levels}
    _guard_outputs(destinations.values(), args.force)

    extractor = get_extractor(
        config.extractor,
        model_path=config.model_path,
        output_name=config.embedding_output,
    )

    _rule()
    print(f"Extracting embeddings with {extractor.extractor_id}")
    _rule()
    for level in levels:
        records = load_category(out, level)
        vectors = batch_extract(records, extractor, batch_size=config.batch_size, jobs=config.jobs)
        cache_save(vectors, destinations[level], extractor.extractor_id)
        dim = vectors[0].dim if vectors else 0
        batches = batch_count(len(records), config.batch_size)
        print(f"  {level.value}: {len(vectors)} vectors, dim {dim}, {batches} batches -> {destinations[level]}")
    return EXIT_OK


def _held_out_altered(
    embeddings: Dict[str, List[EmbeddingVector]],
    config: RunConfig
) -> Dict[str, List[EmbeddingVector]]:
    """With --split, keep only each mode's held-out altered prints (in cache order)."""
    if config.split is None:
        return embeddings
    selected = dict(embeddings)
    for mode in config.modes:
        altered = embeddings[mode]
        _, held_out = split(altered, config.split, config.seed)
        kept = {vector.record_ref for vector in held_out}
        selected[mode] = [vector for vector in altered if vector.record_ref in kept]
        print(
            f"{mode}: scoring {len(kept)} held-out of {len(altered)} altered prints "
            f"(split {config.split:g}, seed {config.seed})"
        )
    return selected


def cmd_match(args: argparse.Namespace, config: RunConfig) -> int:
    """Write decision dumps per (mode, threshold) and print each altered print's best match."""
    out = Path(config.output_root)
    destinations = {
        (mode, threshold): out / DECISIONS_DIR / f"{mode}_{format_threshold(threshold)}.csv"
        for mode in config.modes
        for threshold in config.thresholds
    }
    _guard_outputs(destinations.values(), args.force)

    embeddings = _held_out_altered(_load_embeddings(out, [Level.REAL.value] + config.modes), config)
    labels = _load_ground_truth(out, config.modes)
    reals = embeddings[Level.REAL.value]

    for mode in config.modes:
        print()
        _rule()
        print(f"{mode}: {len(reals)} real x {len(embeddings[mode])} altered")
        _rule()
        for threshold in config.thresholds:
            decisions = match_all(reals, embeddings[mode], threshold, labels.get(mode), jobs=config.jobs)
            dest = save_bytes(decisions_to_csv(decisions), destinations[(mode, threshold)])
            matched = sum(1 for d in decisions if d.matched)
            print(f"  threshold {threshold:g}: {matched} matched / {len(decisions) - matched} unmatched -> {dest}")
            if mode in labels:
                sep = separation(decisions)
                print(
                    f"    genuine mean {_fmt(sep.genuine_mean)}, impostor mean {_fmt(sep.impostor_mean)}, "
                    f"FAR {_fmt(sep.far)}, FRR {_fmt(sep.frr)}"
                )

        altered = embeddings[mode]
        print(f"\n  Best matches (first {min(args.top, len(altered))} of {len(altered)} altered prints):")
        for query in altered[:args.top]:
            real_ref, score = best_match(query, reals)
            verdict = ''
            if mode in labels:
                verdict = ' genuine' if labels[mode].get((real_ref, query.record_ref)) else ' impostor'
            print(f"    {query.record_ref} -> {real_ref} ({score.value:.4f}){verdict}")
    return EXIT_OK


def _report_destinations(out: Path, formats: Sequence[str]) -> Dict[str, Path]:
    return {fmt: out / f"{REPORT_BASENAME}.{fmt}" for fmt in formats}


def _print_reports(reports: Sequence[ThresholdReport]) -> None:
    print(f"\n{'Mode':<8}{'Thr':>6}{'Matched':>9}{'Unmatched':>11}{'Acc%':>8}{'AvgSim':>8}{'Std':>8}{'F1':>8}{'Time(s)':>10}")
    for r in reports:
        f1 = '' if r.f1 is None else f"{r.f1:.4f}"
        print(
            f"{r.mode:<8}{r.threshold:>6.2f}{r.matched_pairs:>9}{r.unmatched_pairs:>11}"
            f"{r.paper_accuracy_pct:>8.2f}{r.avg_similarity:>8.4f}{r.std_similarity:>8.4f}{f1:>8}{r.wall_time_s:>10.2f}"
        )


def _print_stats(summary: StatsSummary) -> None:
    print("\nCorrelations:")
    for c in summary.correlations:
        print(f"  {c.x_name} vs {c.y_name}: r = {c.r:.4f}, p = {c.p_value:.5f} ({c.interpretation}, n={c.n})")
    print("95% confidence intervals (accuracy):")
    for ci in summary.intervals:
        print(f"  {ci.mode}: mean {ci.mean:.2f}, std {ci.sample_std:.2f}, CI [{ci.lower:.2f}, {ci.upper:.2f}]")
    for skipped in summary.skipped:
        print(f"  skipped {skipped['analysis']}: {skipped['reason']}")


def cmd_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    """Run the threshold sweep and write reports, plot data and statistics."""
    out = Path(config.output_root)
    report_paths = _report_destinations(out, config.formats)
    _guard_outputs(
        list(report_paths.values()) + [out / PLOT_DATA_FILENAME, out / STATS_FILENAME],
        args.force,
    )

    # A fixture replaces matching; everything downstream is the same
    if args.fixture:
        reports = load_report(args.fixture)
        print(f"Loaded {len(reports)} report rows from fixture {args.fixture}")
    else:
        embeddings = _held_out_altered(_load_embeddings(out, [Level.REAL.value] + config.modes), config)
        sweep_config = SweepConfig(
            thresholds=config.thresholds,
            modes=config.modes,
            extractor_id=embeddings[Level.REAL.value][0].extractor_id,
            report_destinations={fmt: str(path) for fmt, path in report_paths.items()},
            jobs=config.jobs,
            deterministic=args.deterministic,
        )
        reports = sweep(sweep_config, embeddings, _load_ground_truth(out, config.modes))

    # Every output comes from the same report list
    for fmt, path in report_paths.items():
        save_bytes(emit_report(reports, fmt), path)
    save_bytes(emit_plot_data(reports), out / PLOT_DATA_FILENAME)
    summary = stats_summary(reports)
    save_json(summary.to_dict(), out / STATS_FILENAME)

    _rule()
    print("Threshold Sweep")
    _rule()
    _print_reports(reports)
    _print_stats(summary)
    print(f"\nResults saved to: {', '.join(str(p) for p in report_paths.values())}")
    return EXIT_OK


def _report_source(args: argparse.Namespace, config: RunConfig) -> Path:
    if args.fixture:
        return Path(args.fixture)
    if args.report:
        return Path(args.report)
    return Path(config.output_root) / f"{REPORT_BASENAME}.csv"


def cmd_stats(args: argparse.Namespace, config: RunConfig) -> int:
    """Correlations and confidence intervals from a report or fixture CSV."""
    dest = Path(config.output_root) / STATS_FILENAME
    _guard_outputs([dest], args.force)
    reports = load_report(_report_source(args, config))
    summary = stats_summary(reports)
    save_json(summary.to_dict(), dest)
    _print_stats(summary)
    print(f"\nResults saved to: {dest}")
    return EXIT_OK


def cmd_plotdata(args: argparse.Namespace, config: RunConfig) -> int:
    """Long-format plot series from a report or fixture CSV."""
    dest = Path(config.output_root) / PLOT_DATA_FILENAME
    _guard_outputs([dest], args.force)
    reports = load_report(_report_source(args, config))
    save_bytes(emit_plot_data(reports), dest)
    print(f"Wrote plot data for {len(reports)} report rows to {dest}")
    return EXIT_OK


COMMANDS = {
    'ingest': cmd_ingest,
    'extract': cmd_extract,
    'match': cmd_match,
    'sweep': cmd_sweep,
    'stats': cmd_stats,
    'plotdata': cmd_plotdata,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per pipeline stage."""
    # Shared flags; None means "not given" so env/config-file values can apply
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None,
                        help='KEY=VALUE config file (default: ./.env when present)')
    common.add_argument('--dataset', type=str, default=None,
                        help='SOCOFing root with Real/Easy/Medium/Hard directories')
    common.add_argument('--out', type=str, default=None, help='Output root (default: out)')
    common.add_argument('--extractor', type=str, choices=EXTRACTOR_CHOICES, default=None,
                        help='Embedding extractor (default: baseline)')
    common.add_argument('--model-path', type=str, default=None,
                        help='ONNX backbone file (default: $AFRNET_MODEL_PATH)')
    common.add_argument('--embedding-output', type=str, default=None,
                        help='Backbone output to use as the embedding (default: fc2)')
    common.add_argument('--batch-size', type=int, default=None, help='Extraction batch size (default: 32)')
    common.add_argument('--thresholds', type=str, default=None,
                        help='Comma-separated thresholds (default: 0.92,0.82,0.72)')
    common.add_argument('--modes', type=str, default=None,
                        help='Comma-separated altered modes (default: easy,medium,hard)')
    common.add_argument('--seed', type=int, default=None, help='Seed for augmentation and --split (default: 42)')
    common.add_argument('--split', type=float, default=None,
                        help='Train fraction of each altered category; match and sweep score only the held-out part')
    common.add_argument('--jobs', type=int, default=None, help='Worker threads (default: CPU count)')
    common.add_argument('--format', type=str, default=None,
                        help='Report formats: csv, json or csv,json (default: both)')
    common.add_argument('--log-level', type=str, default=None, help='Logging level (default: INFO)')
    common.add_argument('--force', action='store_true', help='Overwrite existing outputs')
    common.add_argument('--deterministic', action='store_true',
                        help='Zero timestamps and wall times so reruns are byte-identical')

    parser = argparse.ArgumentParser(
        prog='afr-match',
        description='Altered fingerprint matching: ingest, embed, match and evaluate thresholds',
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    ingest = subparsers.add_parser('ingest', parents=[common], help='Relabel and convert a dataset')
    ingest.add_argument('--augment', type=str, default=None,
                        help='Comma-separated ops, e.g. rotate:15,flip_horizontal,add_gaussian_noise:2')

    subparsers.add_parser('extract', parents=[common], help='Extract embeddings into caches')

    match = subparsers.add_parser('match', parents=[common], help='Dump decisions and best matches')
    match.add_argument('--top', type=int, default=10, help='Altered prints to show best matches for (default: 10)')

    sweep_parser = subparsers.add_parser('sweep', parents=[common], help='Threshold sweep + reports')
    sweep_parser.add_argument('--fixture', type=str, default=None,
                              help='Use a report CSV (e.g. fixtures/threshold_sweep.csv) instead of matching')

    for name, help_text in (('stats', 'Correlations and confidence intervals'),
                            ('plotdata', 'Plot-ready series')):
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        sub.add_argument('--fixture', type=str, default=None, help='Report CSV fixture to analyse')
        sub.add_argument('--report', type=str, default=None,
                         help='Report CSV/JSON to analyse (default: <out>/report.csv)')
    return parser


def exit_code_for(error: BaseException) -> int:
    """Map an error to the documented exit code."""
    if isinstance(error, (ExtractionError, PairError)):
        return exit_code_for(error.cause)
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, OutputExists):
        return EXIT_OUTPUT_EXISTS
    if isinstance(error, (FileNotFoundError, MissingEmbeddings, CorruptReport)):
        return EXIT_MISSING_INPUT
    if isinstance(error, (ModelLoadFailure, ShapeMismatch)):
        return EXIT_MODEL
    if isinstance(error, MixedExtractors):
        return EXIT_EXTRACTOR_MISMATCH
    return EXIT_FAILURE


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    overrides = {field: getattr(args, dest) for dest, field in CONFIG_FLAGS.items()}
    try:
        config = load_run_config(overrides, args.config)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    configure_logging(config.log_level)
    try:
        return COMMANDS[args.command](args, config)
    except (AfrMatchError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == '__main__':
    sys.exit(main())
