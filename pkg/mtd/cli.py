"""
cli.py
------
Command-line front end.

    prepare     simulate incomplete data and write prepared directories
    train       train one model, evaluate it, write run artifacts
    ablate      run ablation variants over several seeds
    sweep       cartesian grid over alpha / beta / gamma / mask rate
    eval        score a checkpoint on a prepared dataset
    similarity  channel cosine-similarity matrix of one sample

Results go to files; diagnostics go to stderr. Exit status is 0 on
success and 1 on any package or I/O error.
"""

import argparse
import itertools
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

from .config import ExperimentConfig, load_config
from .constants import (
    CLASSIFIER_INPUTS,
    DEFAULT_ALPHA,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BETA,
    DEFAULT_EMBED_DIM,
    DEFAULT_EPOCHS,
    DEFAULT_ETA,
    DEFAULT_GAMMA,
    DEFAULT_LABEL_MISSING_RATE,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MASK_RATE,
    DEFAULT_MOMENTUM,
    DEFAULT_TRAIN_RATIO,
    DEFAULT_VIEW_MISSING_RATE,
)
from .dataset import (
    MultiViewDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    read_split_manifest,
    save_dataset,
    simulate_incompleteness,
    split,
    split_by_indices,
    split_indices,
    with_complete_labels,
    write_split_manifest,
)
from .errors import ConfigError, MtdError
from .helpers import parse_float_list, parse_int_list
from .losses import CONTRASTIVE_REDUCTIONS
from .model import channel_similarity, load_checkpoint
from .report import (
    ablation_summary,
    export_csv,
    export_pdf,
    run_summary,
    sweep_frame,
    write_loss_csv,
    write_metrics_csv,
    write_run_json,
    write_similarity_csv,
    write_similarity_history,
)
from .trainer import ABLATION_VARIANTS, evaluate, resolve_variants, run_variant, train

logger = logging.getLogger("mtd")

DEFAULT_VARIANTS = "single_channel,no_mask,no_gc,no_re,no_ccc,full"

# flag dest -> section-qualified ExperimentConfig key
FLAG_KEYS = {
    "data_dir": "data_dir",
    "output_dir": "output_dir",
    "repeats": "repeats",
    "base_seed": "base_seed",
    "workers": "workers",
    "view_missing_rate": "incompleteness.view_missing_rate",
    "label_missing_rate": "incompleteness.label_missing_rate",
    "train_ratio": "split.train_ratio",
    "learning_rate": "train.learning_rate",
    "momentum": "train.momentum",
    "batch_size": "train.batch_size",
    "epochs": "train.epochs",
    "alpha": "train.alpha",
    "beta": "train.beta",
    "gamma": "train.gamma",
    "mask_rate": "train.mask_rate",
    "mask_inclusive": "train.mask_inclusive",
    "eta": "train.eta",
    "weight_decay": "train.weight_decay",
    "seed": "train.seed",
    "eval_every": "train.eval_every",
    "contrastive_reduction": "train.contrastive_reduction",
    "embed_dim": "model.embed_dim",
    "hidden": "model.hidden",
    "hidden_activation": "model.hidden_activation",
    "classifier_input": "model.classifier_input",
}

SYNTHETIC_FLAGS = ("n_samples", "n_views", "n_labels", "view_dims", "latent_dim", "noise", "overlap", "nuisance_dim",
                   "synthetic_seed")


# ---------------------------------------------------------
# PARSER
# ---------------------------------------------------------

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON experiment configuration; flags override it")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--output-dir", help="where artifacts are written (default: runs)")


def _source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data-dir", help="dataset directory (prepared, or complete for 'prepare')")
    parser.add_argument("--synthetic", action="store_true", help="use the synthetic generator as the source")
    parser.add_argument("--n-samples", type=int, help="synthetic: samples (default 600)")
    parser.add_argument("--n-views", type=int, help="synthetic: views (default 2)")
    parser.add_argument("--n-labels", type=int, help="synthetic: labels (default 5)")
    parser.add_argument("--view-dims", type=parse_int_list, help="synthetic: comma-separated view widths (default 64,48)")
    parser.add_argument("--latent-dim", type=int, help="synthetic: latent width (default 8)")
    parser.add_argument("--noise", type=float, help="synthetic: noise scale (default 0.6)")
    parser.add_argument("--overlap", type=float, help="synthetic: weight of the direction all prototypes share (default 0.6)")
    parser.add_argument("--nuisance-dim", type=int, help="synthetic: label-free directions per view (default 8)")
    parser.add_argument("--synthetic-seed", type=int, help="synthetic: generator seed (default 0)")


def _protocol(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--view-missing-rate", type=float,
                        help=f"fraction of instances removed per view (default {DEFAULT_VIEW_MISSING_RATE})")
    parser.add_argument("--label-missing-rate", type=float,
                        help=f"fraction of positives and of negatives hidden per label (default {DEFAULT_LABEL_MISSING_RATE})")
    parser.add_argument("--train-ratio", type=float, help=f"train share of samples (default {DEFAULT_TRAIN_RATIO})")
    parser.add_argument("--repeats", type=int, help="number of repeated constructions / seeds (default 1)")
    parser.add_argument("--base-seed", type=int, help="seed of the first repeat (default 0)")


def _training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--learning-rate", type=float, help=f"SGD learning rate (default {DEFAULT_LEARNING_RATE})")
    parser.add_argument("--momentum", type=float, help=f"SGD momentum (default {DEFAULT_MOMENTUM})")
    parser.add_argument("--batch-size", type=int, help=f"mini-batch size (default {DEFAULT_BATCH_SIZE})")
    parser.add_argument("--epochs", type=int, help=f"training epochs (default {DEFAULT_EPOCHS})")
    parser.add_argument("--alpha", type=float, help=f"graph loss weight (default {DEFAULT_ALPHA})")
    parser.add_argument("--beta", type=float, help=f"contrastive loss weight (default {DEFAULT_BETA})")
    parser.add_argument("--gamma", type=float, help=f"reconstruction loss weight (default {DEFAULT_GAMMA})")
    parser.add_argument("--mask-rate", type=float, help=f"fragment mask rate (default {DEFAULT_MASK_RATE})")
    parser.add_argument("--mask-inclusive", action="store_const", const=True,
                        help="zero round(rate*d)+1 entries per fragment")
    parser.add_argument("--eta", type=float, help=f"graph smoothing constant (default {DEFAULT_ETA})")
    parser.add_argument("--weight-decay", type=float, help="L2 weight decay (default 0)")
    parser.add_argument("--seed", type=int, help="training seed (default 0)")
    parser.add_argument("--eval-every", type=int, help="epochs between test evaluations; 0 = last epoch only")
    parser.add_argument("--contrastive-reduction", choices=CONTRASTIVE_REDUCTIONS,
                        help="reduce per-sample contrastive ratios by mean (default) or sum")
    parser.add_argument("--embed-dim", type=int, help=f"embedding width (default {DEFAULT_EMBED_DIM})")
    parser.add_argument("--hidden", type=parse_int_list, help="comma-separated hidden widths (default 512,512)")
    parser.add_argument("--hidden-activation", choices=["relu", "sigmoid"], help="hidden activation (default relu)")
    parser.add_argument("--classifier-input", choices=CLASSIFIER_INPUTS,
                        help="classifier reads the gated fusion (default) or [S, O] concatenated")
    parser.add_argument("--workers", type=int, help="parallel runs for ablate/sweep (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtd", description="Masked two-channel multi-view multi-label training.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="write incomplete dataset directories, one per repeat")
    for add in (_common, _source, _protocol):
        add(p)
    p.set_defaults(handler=cmd_prepare)

    p = sub.add_parser("train", help="train, evaluate and write run artifacts")
    for add in (_common, _source, _protocol, _training):
        add(p)
    p.add_argument("--pdf", action="store_true", help="also write report.pdf")
    p.add_argument("--similarity-row", type=int,
                   help="record the channel similarity matrix of this training row on every evaluation epoch")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("ablate", help="ablation variants over seeds, summarised as mean/std")
    for add in (_common, _source, _protocol, _training):
        add(p)
    p.add_argument("--variants", default=DEFAULT_VARIANTS,
                   help=f"comma-separated subset of {', '.join(ABLATION_VARIANTS)}")
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("sweep", help="grid over loss weights and mask rate")
    for add in (_common, _source, _protocol, _training):
        add(p)
    p.add_argument("--alpha-grid", type=parse_float_list)
    p.add_argument("--beta-grid", type=parse_float_list)
    p.add_argument("--gamma-grid", type=parse_float_list)
    p.add_argument("--mask-rate-grid", type=parse_float_list)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("eval", help="score a checkpoint on a prepared dataset")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--all-rows", action="store_true", help="score every row instead of the test split")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("similarity", help="channel similarity matrix for one sample")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--row", type=int, default=0, help="sample row (default 0)")
    p.set_defaults(handler=cmd_similarity)
    return parser


# ---------------------------------------------------------
# CONFIG RESOLUTION
# ---------------------------------------------------------

def resolve_config(args: argparse.Namespace, need_source: bool = True) -> ExperimentConfig:
    """Config file first, flags on top. A source given by flags replaces the file's source."""
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {key: getattr(args, dest, None) for dest, key in FLAG_KEYS.items()}
    cfg = cfg.with_overrides(**overrides)

    synthetic = {name: getattr(args, name, None) for name in SYNTHETIC_FLAGS}
    synthetic_flagged = getattr(args, "synthetic", False) or any(v is not None for v in synthetic.values())
    dir_flagged = getattr(args, "data_dir", None) is not None
    if synthetic_flagged and dir_flagged:
        raise ConfigError("give either --data-dir or the synthetic flags, not both")
    if dir_flagged:
        cfg.synthetic = None
    elif synthetic_flagged:
        spec = replace(cfg.synthetic) if cfg.synthetic else SyntheticSpec()
        for name, value in synthetic.items():
            if value is not None:
                setattr(spec, "seed" if name == "synthetic_seed" else name, value)
        if getattr(args, "n_views", None) is not None and getattr(args, "view_dims", None) is None:
            spec.view_dims = [spec.view_dims[v % len(spec.view_dims)] for v in range(spec.n_views)]
        cfg.synthetic = spec
        cfg.data_dir = None
    return cfg.validate(need_source=need_source)


# ---------------------------------------------------------
# DATA PER REPEAT
# ---------------------------------------------------------

def _complete_source(cfg: ExperimentConfig) -> MultiViewDataset:
    if cfg.data_dir is not None:
        return load_dataset(cfg.data_dir)
    return generate_synthetic(cfg.synthetic)


def _load_prepared(path: Path) -> Tuple[MultiViewDataset, MultiViewDataset]:
    data = load_dataset(path)
    manifest = read_split_manifest(path)
    if manifest is None:
        raise ConfigError(f"{path}: no split.json; run 'prepare' first")
    return split_by_indices(data, manifest["train"], manifest["test"])


def experiment_split(cfg: ExperimentConfig, seed: int, repeat: int = 0) -> Tuple[MultiViewDataset, MultiViewDataset]:
    """Train/test splits for one repeat: a prepared directory, or data simulated in memory."""
    if cfg.data_dir is not None:
        root = Path(cfg.data_dir)
        rep = root / f"rep_{repeat}"
        return _load_prepared(rep if rep.is_dir() else root)
    incomplete = simulate_incompleteness(_complete_source(cfg), replace(cfg.incompleteness, seed=seed))
    return split(incomplete, replace(cfg.split, seed=seed))


def _run_jobs(jobs: Sequence[Callable[[], object]], workers: int) -> List[object]:
    """Run independent jobs; results keep job order."""
    if workers <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job(), jobs))


# ---------------------------------------------------------
# COMMANDS
# ---------------------------------------------------------

def cmd_prepare(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = Path(cfg.output_dir)
    source = _complete_source(cfg)
    for repeat, seed in enumerate(cfg.seeds()):
        incomplete = simulate_incompleteness(source, replace(cfg.incompleteness, seed=seed))
        train_rows, test_rows = split_indices(incomplete.n_samples, replace(cfg.split, seed=seed))
        target = save_dataset(incomplete, out / f"rep_{repeat}")
        write_split_manifest(target, train_rows, test_rows,
                             view_missing_rate=cfg.incompleteness.view_missing_rate,
                             label_missing_rate=cfg.incompleteness.label_missing_rate,
                             train_ratio=cfg.split.train_ratio,
                             seed=seed,
                             source=cfg.data_dir or "synthetic")
        logger.info("prepared %s (seed %d)", target, seed)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_data, test_data = experiment_split(cfg, cfg.base_seed)
    model = cfg.model.build(train_data.view_dims, train_data.n_labels, cfg.train.seed)
    record = train(train_data, model, cfg.train, test_data, checkpoint_path=out / "model.mtdc",
                   similarity_row=args.similarity_row)
    record.config = {**cfg.to_dict(), "train": record.config}

    write_run_json(record, out / "run.json")
    write_loss_csv(record.epoch_losses, out / "losses.csv")
    write_metrics_csv((({"epoch": epoch}, report) for epoch, report in record.evaluations), out / "metrics.csv")
    export_csv(run_summary(record), out / "summary.csv")
    if args.similarity_row is not None:
        write_similarity_history(record, args.similarity_row, out)
    if args.pdf:
        export_pdf(record, out / "report.pdf")
    for warning in record.warnings:
        logger.warning(warning)
    logger.info("wrote run artifacts to %s", out)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    variants = resolve_variants([v.strip() for v in args.variants.split(",") if v.strip()])
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    jobs, keys = [], []
    for repeat, seed in enumerate(cfg.seeds()):
        train_data, test_data = experiment_split(cfg, seed, repeat)
        for variant in variants:
            train_cfg = replace(cfg.train, seed=seed)
            jobs.append(lambda v=variant, tr=train_data, te=test_data, tc=train_cfg:
                        run_variant(v, tr, te, tc, cfg.model))
            keys.append((variant.name, seed))
    records = _run_jobs(jobs, cfg.workers)

    results = [(name, seed, record.final_report) for (name, seed), record in zip(keys, records)]
    write_metrics_csv((({"variant": name, "seed": seed}, report) for name, seed, report in results),
                      out / "ablation_runs.csv")
    ablation_summary(results).to_csv(out / "ablation_summary.csv", index=False, float_format="%.17g")
    logger.info("ablation of %d variants x %d seeds written to %s", len(variants), cfg.repeats, out)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    grids = {name: values for name, values in (("alpha", args.alpha_grid), ("beta", args.beta_grid),
                                                ("gamma", args.gamma_grid), ("mask_rate", args.mask_rate_grid))
             if values}
    if not grids:
        raise ConfigError("sweep needs at least one of --alpha-grid, --beta-grid, --gamma-grid, --mask-rate-grid")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    full = ABLATION_VARIANTS["full"]

    jobs, keys = [], []
    for repeat, seed in enumerate(cfg.seeds()):
        train_data, test_data = experiment_split(cfg, seed, repeat)
        for point in itertools.product(*grids.values()):
            params = dict(zip(grids, point))
            train_cfg = replace(cfg.train, seed=seed, **params).validate()
            jobs.append(lambda tr=train_data, te=test_data, tc=train_cfg:
                        run_variant(full, tr, te, tc, cfg.model))
            keys.append((params, seed))
    records = _run_jobs(jobs, cfg.workers)

    frame = sweep_frame([(params, seed, record.final_report) for (params, seed), record in zip(keys, records)])
    frame.to_csv(out / "sweep.csv", index=False, float_format="%.17g")
    logger.info("sweep of %d runs written to %s", len(frame), out / "sweep.csv")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args, need_source=False)
    model = load_checkpoint(args.checkpoint)
    if args.all_rows:
        test_data = with_complete_labels(load_dataset(args.data_dir), source=str(args.data_dir))
    else:
        _, test_data = _load_prepared(Path(args.data_dir))
    report = evaluate(model, test_data)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv([({"checkpoint": str(args.checkpoint), "rows": test_data.n_samples}, report)],
                      out / "eval_metrics.csv")
    logger.info("AP=%.4f on %d rows", report.ap, test_data.n_samples)
    return 0


def cmd_similarity(args: argparse.Namespace) -> int:
    cfg = resolve_config(args, need_source=False)
    model = load_checkpoint(args.checkpoint)
    data = load_dataset(args.data_dir)
    if not 0 <= args.row < data.n_samples:
        raise ConfigError(f"--row {args.row} is outside [0, {data.n_samples})")
    matrix, names = channel_similarity(model, data.views, data.view_index, args.row)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_similarity_csv(matrix, names, out / f"similarity_row_{args.row}.csv")
    missing = [v + 1 for v in range(data.n_views) if data.view_index[args.row, v] == 0]
    if missing:
        logger.warning("row %d is missing views %s; their rows and columns are zero", args.row, missing)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (MtdError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
