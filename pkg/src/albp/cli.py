"""Command-line pipeline: preprocess -> extract -> train -> evaluate -> report.

Config is a flat key-value file with dotted keys (`albp.beta = 0.1`);
command-line flags override config values. Exit codes: 0 ok, 1 usage,
2 data problem, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import classifiers, evaluation
from .descriptors import AlbpConfig, extract
from .errors import AlbpError, DataError, UsageError
from .image_core import load_image, save_image, scan_dataset
from .preprocess import ClaheConfig, PreprocessConfig, preprocess

log = logging.getLogger("albp")

ALL_CLASSIFIERS = list(classifiers.KINDS)


@dataclass
class RunConfig:
    dataset: Path | None = None
    out: Path = Path("albp-out")
    descriptor: str = "both"  # lbp | albp | both
    beta: float = 0.10
    beta_sweep: list[float] = field(default_factory=list)
    classifier_names: list[str] = field(default_factory=lambda: list(ALL_CLASSIFIERS))
    ensemble: bool = True
    seed: int = 42
    threads: int = 1
    pre: PreprocessConfig = field(default_factory=PreprocessConfig)
    train: classifiers.TrainConfig = field(default_factory=classifiers.TrainConfig)
    split: evaluation.SplitConfig = field(default_factory=evaluation.SplitConfig)

    def snapshot(self) -> dict:
        d = asdict(self)
        d["dataset"] = str(self.dataset) if self.dataset else None
        d["out"] = str(self.out)
        return d


def parse_config_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"{path}: cannot read config ({exc})") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _build_config(args) -> RunConfig:
    kv = parse_config_file(Path(args.config)) if getattr(args, "config", None) else {}

    def get(key, cast, default):
        if key not in kv:
            return default
        try:
            if cast is bool:
                return kv[key].lower() in ("1", "true", "yes", "on")
            return cast(kv[key])
        except ValueError as exc:
            raise UsageError(f"config key {key}: bad value {kv[key]!r}") from exc

    seed = get("seed", int, 42)
    cfg = RunConfig(
        dataset=Path(kv["dataset.root"]) if "dataset.root" in kv else None,
        out=Path(get("output.dir", str, "albp-out")),
        descriptor=get("descriptor", str, "both"),
        beta=get("albp.beta", float, 0.10),
        classifier_names=[c.strip() for c in get("classifiers", str, ",".join(ALL_CLASSIFIERS)).split(",")],
        ensemble=get("ensemble", bool, True),
        seed=seed,
        threads=get("threads", int, 1),
        pre=PreprocessConfig(
            crop_threshold=get("crop.threshold", int, 10),
            target_width=get("resize.width", int, 224),
            target_height=get("resize.height", int, 224),
            clahe=ClaheConfig(
                tile_cols=get("clahe.tiles", int, 8),
                tile_rows=get("clahe.tiles", int, 8),
                clip_limit=get("clahe.clip", float, 2.0),
            ),
            enable_crop=get("crop.enabled", bool, True),
            enable_clahe=get("clahe.enabled", bool, True),
        ),
        train=classifiers.TrainConfig(
            knn_k=get("knn.k", int, 5),
            nb_variance_floor=get("nb.variance_floor", float, 1e-9),
            tree_max_depth=get("tree.max_depth", int, 20),
            tree_min_leaf=get("tree.min_leaf", int, 2),
            forest_trees=get("forest.trees", int, 100),
            forest_feature_fraction=get("forest.feature_fraction", float, None),
            svm_epochs=get("svm.epochs", int, 200),
            svm_learning_rate=get("svm.learning_rate", float, 0.01),
            svm_regularization=get("svm.regularization", float, 1e-4),
            seed=seed,
        ),
        split=evaluation.SplitConfig(
            train_fraction=get("split.fraction", float, 0.8),
            seed=seed,
            stratified=get("split.stratified", bool, True),
        ),
    )

    # command-line flags override the config file
    if getattr(args, "dataset", None):
        cfg.dataset = Path(args.dataset)
    if getattr(args, "out", None):
        cfg.out = Path(args.out)
    if getattr(args, "descriptor", None):
        cfg.descriptor = args.descriptor
    if getattr(args, "beta", None) is not None:
        cfg.beta = args.beta
    if getattr(args, "beta_sweep", None):
        try:
            cfg.beta_sweep = [float(b) for b in args.beta_sweep.split(",") if b.strip()]
        except ValueError as exc:
            raise UsageError(f"--beta-sweep: bad value {args.beta_sweep!r}") from exc
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.train = classifiers.TrainConfig(**{**asdict(cfg.train), "seed": args.seed})
        cfg.split = evaluation.SplitConfig(cfg.split.train_fraction, args.seed, cfg.split.stratified)
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads

    if cfg.descriptor not in ("lbp", "albp", "both"):
        raise UsageError(f"descriptor must be lbp, albp or both, got {cfg.descriptor!r}")
    unknown = [c for c in cfg.classifier_names if c not in ALL_CLASSIFIERS]
    if unknown:
        raise UsageError(f"unknown classifier(s) {unknown}; choose from {ALL_CLASSIFIERS}")
    if not cfg.classifier_names:
        raise UsageError("at least one classifier must be selected")
    if cfg.threads < 1:
        raise UsageError("--threads must be >= 1")
    return cfg


def _pmap(fn, items, threads):
    """Order-preserving parallel map; results independent of scheduling."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# features CSV


def write_features_csv(path: Path, rows) -> None:
    """rows: iterable of (path str, label int, 256-vector). Sorted by path."""
    rows = sorted(rows, key=lambda r: r[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for img_path, label, feats in rows:
            writer.writerow([img_path, label] + [f"{v:.9g}" for v in feats])


def load_features_csv(path: Path) -> classifiers.LabeledDataset:
    paths, labels, feats = [], [], []
    try:
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row:
                    continue
                if len(row) != 258:
                    raise DataError(f"{path}:{lineno}: expected 258 columns, got {len(row)}")
                try:
                    labels.append(int(row[1]))
                    feats.append([float(v) for v in row[2:]])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
                paths.append(row[0])
    except OSError as exc:
        raise DataError(f"{path}: cannot read features CSV ({exc})") from exc
    if not paths:
        raise DataError(f"{path}: empty features CSV")
    n_classes = max(labels) + 1
    names = [f"class{i}" for i in range(n_classes)]
    for p, lbl in zip(paths, labels):
        parent = Path(p).parent.name
        if parent:
            names[lbl] = parent
    return classifiers.LabeledDataset(np.array(feats), np.array(labels), tuple(names))


# ---------------------------------------------------------------------------
# subcommands


def cmd_preprocess(cfg: RunConfig) -> Path:
    if cfg.dataset is None:
        raise UsageError("no dataset directory given (--dataset or dataset.root)")
    manifest = scan_dataset(cfg.dataset)
    out_root = cfg.out / "preprocessed"
    for name in manifest.class_names:
        (out_root / name).mkdir(parents=True, exist_ok=True)

    def job(entry):
        path, label = entry
        img = preprocess(load_image(path), cfg.pre)
        dest = out_root / manifest.class_names[label] / (path.stem + ".png")
        save_image(img, dest)

    _pmap(job, list(manifest.entries), cfg.threads)
    log.info("preprocessed %d images into %s", len(manifest), out_root)
    return out_root


def cmd_extract(cfg: RunConfig, image_root: Path, descriptor: str, beta: float, csv_path: Path) -> Path:
    manifest = scan_dataset(image_root)
    albp_cfg = AlbpConfig(beta)

    def job(entry):
        path, label = entry
        try:
            feats = extract(load_image(path), descriptor, albp_cfg)
        except (AlbpError, ValueError) as exc:
            log.warning("skipping %s: %s", path, exc)
            return None
        return str(path), label, feats

    rows = [r for r in _pmap(job, list(manifest.entries), cfg.threads) if r is not None]
    skipped = len(manifest) - len(rows)
    if skipped:
        log.warning("%d image(s) skipped during extraction", skipped)
    if not rows:
        raise DataError(f"{image_root}: no image produced features")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_features_csv(csv_path, rows)
    log.info("wrote %d feature rows to %s", len(rows), csv_path)
    return csv_path


def _train_models(cfg: RunConfig, train_set: classifiers.LabeledDataset, out_dir: Path, tag: str) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    model_paths: dict[str, Path] = {}
    members = []

    def train_one(kind):
        return classifiers.fit(kind, train_set, cfg.train)

    fitted = _pmap(train_one, cfg.classifier_names, cfg.threads)
    for kind, model in zip(cfg.classifier_names, fitted):
        path = out_dir / f"model_{tag}_{kind}.bin"
        classifiers.save_model(model, path)
        model_paths[kind] = path
        members.append(model)
    if cfg.ensemble:
        ensemble = classifiers.SoftVoteModel(members)
        path = out_dir / f"model_{tag}_soft_vote.bin"
        classifiers.save_model(ensemble, path)
        model_paths["soft_vote"] = path
        (out_dir / f"ensemble_{tag}.json").write_text(json.dumps(
            {"members": [f"model_{tag}_{k}.bin" for k in cfg.classifier_names]}, indent=2))
    (out_dir / f"train_log_{tag}.json").write_text(json.dumps(
        {"seed": cfg.train.seed, "hyperparameters": asdict(cfg.train),
         "classifiers": cfg.classifier_names, "ensemble": cfg.ensemble}, indent=2))
    return model_paths


def cmd_train(cfg: RunConfig, csv_path: Path, tag: str = "train") -> dict[str, Path]:
    dataset = load_features_csv(csv_path)
    return _train_models(cfg, dataset, cfg.out / "models", tag)


def cmd_evaluate(cfg: RunConfig, model_paths: dict[str, Path], csv_path: Path,
                 descriptor_tag: str, report_dir: Path) -> list[dict]:
    test_set = load_features_csv(csv_path)
    report_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for kind, model_path in model_paths.items():
        model = classifiers.load_model(model_path)
        if model.n_classes != test_set.n_classes:
            raise DataError(
                f"{model_path}: model trained on {model.n_classes} classes, "
                f"features CSV has {test_set.n_classes}")
        report = evaluation.evaluate(model, test_set, descriptor=descriptor_tag, classifier=kind)
        (report_dir / f"report_{descriptor_tag}_{kind}.json").write_text(
            evaluation.report_to_json(report))
        reports.append(report)
    return reports


def cmd_run(cfg: RunConfig) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    pre_root = cmd_preprocess(cfg)
    timings["preprocess"] = time.perf_counter() - t0

    # descriptor tags and their (method, beta)
    jobs: list[tuple[str, str, float]] = []
    if cfg.descriptor in ("lbp", "both"):
        jobs.append(("lbp", "lbp", 0.0))
    if cfg.descriptor in ("albp", "both"):
        betas = cfg.beta_sweep or [cfg.beta]
        for b in betas:
            tag = "albp" if len(betas) == 1 else f"albp_beta{b:g}"
            jobs.append((tag, "albp", b))

    t0 = time.perf_counter()
    csv_paths = {tag: cmd_extract(cfg, pre_root, method, beta, cfg.out / f"features_{tag}.csv")
                 for tag, method, beta in jobs}
    timings["extract"] = time.perf_counter() - t0

    all_reports: list[dict] = []
    timings["split"] = timings["train"] = timings["evaluate"] = 0.0
    for tag, _, _ in jobs:
        full = load_features_csv(csv_paths[tag])
        t0 = time.perf_counter()
        train_set, test_set = evaluation.split(full, cfg.split)
        timings["split"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        model_paths = _train_models(cfg, train_set, cfg.out / "models", tag)
        timings["train"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        report_dir = cfg.out / "reports"
        report_dir.mkdir(parents=True, exist_ok=True)
        for kind, model_path in model_paths.items():
            model = classifiers.load_model(model_path)
            report = evaluation.evaluate(model, test_set, descriptor=tag, classifier=kind)
            (report_dir / f"report_{tag}_{kind}.json").write_text(evaluation.report_to_json(report))
            all_reports.append(report)
        timings["evaluate"] += time.perf_counter() - t0

    table = evaluation.render_table(all_reports)
    (cfg.out / "report_table.txt").write_text(table)
    sys.stdout.write(table)

    manifest = {
        "stages": ["preprocess", "extract", "split", "train", "evaluate"],
        "timings_seconds": timings,
        "seed": cfg.seed,
        "config": cfg.snapshot(),
    }
    (cfg.out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return cfg.out


# ---------------------------------------------------------------------------
# entry point


def _add_common(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--dataset", help="directory-per-class image root")
    p.add_argument("--out", help="output directory")
    p.add_argument("--descriptor", choices=["lbp", "albp", "both"])
    p.add_argument("--beta", type=float, help="adaptive band half-width")
    p.add_argument("--beta-sweep", dest="beta_sweep", help="comma-separated beta values")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="albp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("preprocess", "crop/resize/CLAHE a dataset into a mirrored tree"),
        ("extract", "compute descriptor histograms into a features CSV"),
        ("train", "fit classifiers from a features CSV"),
        ("evaluate", "score trained models against a features CSV"),
        ("run", "full pipeline: preprocess, extract, split, train, evaluate"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "train":
            p.add_argument("--features", required=True, help="features CSV to train on")
        if name == "evaluate":
            p.add_argument("--features", required=True, help="features CSV to score")
            p.add_argument("--models", required=True, help="directory of model_*.bin files")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        cfg = _build_config(args)
        if args.command == "preprocess":
            cmd_preprocess(cfg)
        elif args.command == "extract":
            if cfg.dataset is None:
                raise UsageError("extract needs --dataset")
            method = "albp" if cfg.descriptor in ("albp", "both") else "lbp"
            cfg.out.mkdir(parents=True, exist_ok=True)
            cmd_extract(cfg, cfg.dataset, method, cfg.beta, cfg.out / f"features_{method}.csv")
        elif args.command == "train":
            cmd_train(cfg, Path(args.features))
        elif args.command == "evaluate":
            models_dir = Path(args.models)
            model_paths = {p.stem.split("_", 2)[2]: p for p in sorted(models_dir.glob("model_*.bin"))}
            if not model_paths:
                raise DataError(f"{models_dir}: no model_*.bin files found")
            tag = cfg.descriptor if cfg.descriptor != "both" else "albp"
            reports = cmd_evaluate(cfg, model_paths, Path(args.features), tag, cfg.out / "reports")
            sys.stdout.write(evaluation.render_table(reports))
        elif args.command == "run":
            if cfg.dataset is None:
                raise UsageError("run needs --dataset or dataset.root in the config")
            cmd_run(cfg)
        return 0
    except UsageError as exc:
        log.error("%s", exc)
        return 1
    except (DataError, AlbpError) as exc:
        log.error("%s", exc)
        return 2
    except Exception:  # pragma: no cover - internal faults
        log.exception("internal error")
        return 3


if __name__ == "__main__":
    sys.exit(main())
