"""Command-line pipeline driver.

Subcommands:
  build-lt  construct a long-tailed dataset and write its manifest
  analyze   analytic + measured label-occurrence reports per sampler combo
  train     run the soft-label trainer from a config file
  report    aggregate completed runs per strategy

Every command is a pure function of its resolved configuration and seed;
outputs embed a hash of that configuration so runs are auditable.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import longtail
from .longtail import ClassCounts, DatasetManifest, ImbalanceProfile, LabeledDataset
from .mixer import MixConfig, make_batch
from .occurrence import (
    COMBO_NAMES,
    OccurrenceReport,
    analytic_occurrence,
    default_head_set,
    empirical_occurrence,
    format_float,
    parse_combo,
    write_occurrence_csv,
)
from .seeds import child_seed
from .trainer import Strategy, TrainConfig, default_groups, evaluate, train, write_history_csv

PROFILE_ALIASES = {"exp": "exponential", "pareto": "pareto", "step": "step"}
DEFAULT_ALPHA = 1.0  # the usual choice at this scale; 0.2 is common for very large image corpora
DONE_MARKER = "DONE"


def config_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class SynthSpec:
    """Gaussian-mixture source: a balanced base carved into train/test splits."""

    classes: int
    dim: int
    separation: float
    base_per_class: int
    test_per_class: int

    def to_dict(self) -> dict:
        return {"kind": "synth", **dataclasses.asdict(self)}


@dataclass(frozen=True)
class Cifar10Spec:
    """Binary-batch source: train files are subsampled, the test file is used as-is."""

    train_paths: tuple[str, ...]
    test_path: str | None = None

    def to_dict(self) -> dict:
        return {"kind": "cifar10", "train_paths": list(self.train_paths), "test_path": self.test_path}


def _dataset_spec_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "synth":
        return SynthSpec(
            classes=int(d["classes"]),
            dim=int(d["dim"]),
            separation=float(d["separation"]),
            base_per_class=int(d["base_per_class"]),
            test_per_class=int(d["test_per_class"]),
        )
    if kind == "cifar10":
        return Cifar10Spec(train_paths=tuple(d["train_paths"]), test_path=d.get("test_path"))
    raise ValueError(f"unknown dataset kind {kind!r}")


@dataclass(frozen=True)
class TrainSettings:
    """TrainConfig fields minus the seed (which lives at the experiment level)."""

    epochs: int
    batches_per_epoch: int
    batch_size: int
    lr: float
    lr_decay_epochs: tuple[int, ...] = ()
    lr_decay_factor: float = 0.1
    alpha: float = DEFAULT_ALPHA
    strategy: str = "mixup"
    defer_epoch: int | None = None
    arch: str = "linear"
    hidden: int = 32
    momentum: float = 0.0
    weight_decay: float = 0.0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lr_decay_epochs"] = list(self.lr_decay_epochs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainSettings":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train settings: {sorted(unknown)}")
        d = dict(d)
        if "lr_decay_epochs" in d:
            d["lr_decay_epochs"] = tuple(d["lr_decay_epochs"])
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: SynthSpec | Cifar10Spec
    profile: ImbalanceProfile
    train: TrainSettings
    seed: int = 0
    out_dir: str | None = None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.to_dict(),
            "profile": self.profile.to_dict(),
            "train": self.train.to_dict(),
            "seed": self.seed,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            dataset=_dataset_spec_from_dict(d["dataset"]),
            profile=ImbalanceProfile.from_dict(d["profile"]),
            train=TrainSettings.from_dict(d["train"]),
            seed=int(d.get("seed", 0)),
            out_dir=d.get("out_dir"),
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=self.seed, **dataclasses.asdict(self.train))

    def family_dict(self) -> dict:
        """Config with run-identity fields removed, for cross-run compatibility checks."""
        d = self.to_dict()
        d.pop("seed")
        d.pop("out_dir")
        d["train"].pop("strategy")
        d["train"].pop("defer_epoch")
        return d


def load_config(path: str | Path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text()))


def resolve_datasets(cfg: ExperimentConfig) -> tuple[LabeledDataset, LabeledDataset, DatasetManifest]:
    """Materialize (train, test, manifest) for an experiment config."""
    dataset_seed = child_seed(cfg.seed, "dataset")
    if isinstance(cfg.dataset, SynthSpec):
        spec = cfg.dataset
        base_counts = ClassCounts((spec.base_per_class,) * spec.classes)
        base = longtail.synth_gaussian_mixture(spec.classes, base_counts, spec.dim, spec.separation, dataset_seed)
        counts = cfg.profile.class_counts(spec.classes)
        train_ds, test_ds, manifest = longtail.longtail_split(
            base,
            counts,
            spec.test_per_class,
            dataset_seed,
            source=f"synth:classes={spec.classes},dim={spec.dim},separation={spec.separation}",
            profile=cfg.profile,
        )
        return train_ds, test_ds, manifest
    spec = cfg.dataset
    bases = [longtail.load_cifar10_binary(p) for p in spec.train_paths]
    features = np.concatenate([b.features for b in bases])
    labels = np.concatenate([b.labels for b in bases])
    base = LabeledDataset(features, labels, longtail.CIFAR10_CLASSES)
    counts = cfg.profile.class_counts(base.num_classes)
    train_ds, manifest = longtail.subsample_longtail(
        base, counts, dataset_seed, source=";".join(spec.train_paths), profile=cfg.profile
    )
    if spec.test_path is None:
        raise ValueError("cifar10 training config needs test_path")
    test_ds = longtail.load_cifar10_binary(spec.test_path)
    return train_ds, test_ds, manifest


def _profile_from_args(args, n_max: int) -> ImbalanceProfile:
    kind = PROFILE_ALIASES.get(args.profile, args.profile)
    return ImbalanceProfile(kind=kind, rho=args.rho, n_max=n_max)


def cmd_build_lt(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.base:
        for p in args.base:
            if not Path(p).exists():
                raise FileNotFoundError(f"base dataset file not found: {p}")
        bases = [longtail.load_cifar10_binary(p) for p in args.base]
        features = np.concatenate([b.features for b in bases])
        labels = np.concatenate([b.labels for b in bases])
        base = LabeledDataset(features, labels, longtail.CIFAR10_CLASSES)
        source = ";".join(str(p) for p in args.base)
    elif args.synth_classes:
        per_class = args.synth_per_class
        base_counts = ClassCounts((per_class,) * args.synth_classes)
        base = longtail.synth_gaussian_mixture(
            args.synth_classes, base_counts, args.synth_dim, args.synth_separation, child_seed(args.seed, "dataset")
        )
        source = f"synth:classes={args.synth_classes},dim={args.synth_dim},separation={args.synth_separation}"
    else:
        raise ValueError("provide --base file(s) or a --synth-classes spec")

    present = base.class_sizes()
    if np.any(present == 0):
        raise ValueError("base dataset is missing examples for some class")
    n_max = args.n_max if args.n_max else int(present.min())
    profile = _profile_from_args(args, n_max)
    counts = profile.class_counts(base.num_classes)
    _, manifest = longtail.subsample_longtail(base, counts, args.seed, source=source, profile=profile)
    manifest.save(out / "manifest.json")

    resolved = {
        "command": "build-lt",
        "source": source,
        "profile": profile.to_dict(),
        "seed": args.seed,
        "counts": list(counts),
    }
    _write_json(out / "build_info.json", {"config_sha256": config_hash(resolved), **resolved})
    print(f"class counts: {list(counts)}")
    print(f"imbalance ratio: {format_float(longtail.imbalance_ratio(counts))}")
    print(f"manifest: {out / 'manifest.json'}")
    return 0


def _labels_only_dataset(counts: ClassCounts) -> LabeledDataset:
    # Occurrence statistics depend only on labels and mixing ratios, so a
    # placeholder feature column stands in for the real data.
    labels = np.repeat(np.arange(len(counts)), list(counts))
    return LabeledDataset(np.zeros((labels.shape[0], 1)), labels, len(counts))


def cmd_analyze(args: argparse.Namespace) -> int:
    manifest = DatasetManifest.load(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    counts = ClassCounts(manifest.counts)
    dataset = _labels_only_dataset(counts)
    index = dataset.class_index()
    head = default_head_set(counts)
    combo_names = list(COMBO_NAMES) if args.combo == "all" else [args.combo]

    summary_rows = []
    for name in combo_names:
        combo = parse_combo(name, args.alpha)
        analytic = analytic_occurrence(combo, index)
        empirical: OccurrenceReport | None = None
        if args.samples > 0:
            batch = make_batch(
                dataset,
                index,
                args.samples,
                MixConfig(args.alpha),
                combo.kinds,
                child_seed(args.seed, "analyze", name),
            )
            empirical = empirical_occurrence([batch], len(counts), head_set=head)
        stem = f"occurrence_{name.replace('-', '_')}"
        write_occurrence_csv(out / f"{stem}.csv", list(counts), analytic, empirical)
        _write_json(
            out / f"{stem}.json",
            {
                "combo": name,
                "counts": list(counts),
                "analytic": analytic.to_dict(),
                "empirical": empirical.to_dict() if empirical else None,
            },
        )
        summary_rows.append((name, analytic, empirical))

    resolved = {
        "command": "analyze",
        # identify the manifest by content so outputs are relocatable
        "manifest_sha256": hashlib.sha256(Path(args.manifest).read_bytes()).hexdigest(),
        "combos": combo_names,
        "samples": args.samples,
        "alpha": args.alpha,
        "seed": args.seed,
    }
    digest = config_hash(resolved)
    with (out / "occurrence_summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["combo", "samples", "balance_ratio_analytic", "balance_ratio_empirical", "head_incidence", "config_sha256"]
        )
        for name, analytic, empirical in summary_rows:
            writer.writerow(
                [
                    name,
                    args.samples,
                    format_float(analytic.balance_ratio),
                    format_float(empirical.balance_ratio) if empirical and empirical.balance_ratio else "",
                    format_float(empirical.head_incidence) if empirical else "",
                    digest,
                ]
            )
    _write_json(out / "analyze_info.json", {"config_sha256": digest, **resolved})
    for name, analytic, empirical in summary_rows:
        measured = f" measured={format_float(empirical.balance_ratio)}" if empirical and empirical.balance_ratio else ""
        print(f"{name}: analytic max/min={format_float(analytic.balance_ratio)}{measured}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    overrides: dict = {}
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.strategy is not None:
        overrides["strategy"] = args.strategy
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if overrides:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, **overrides))
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=str(args.out))
    if cfg.out_dir is None:
        raise ValueError("no output directory: set out_dir in the config or pass --out")

    train_cfg = cfg.train_config()  # validates, including the deferred switch epoch
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = cfg.to_dict()
    # hash identifies the experiment, not where its outputs land
    digest = config_hash({k: v for k, v in resolved.items() if k != "out_dir"})
    _write_json(out / "config.json", resolved)

    train_ds, test_ds, manifest = resolve_datasets(cfg)
    manifest.save(out / "manifest.json")
    params, history = train(train_ds, test_ds, train_cfg)
    write_history_csv(out / "history.csv", history)
    report = evaluate(params, test_ds, default_groups(train_ds.class_index().counts))
    _write_json(out / "eval.json", {"config_sha256": digest, **report.to_dict()})
    (out / DONE_MARKER).write_text(digest + "\n")
    print(f"strategy={train_cfg.strategy.value} balanced_acc={format_float(report.balanced_accuracy)}")
    print(f"run dir: {out}")
    return 0


def _finished_runs(run_dirs: list[str]) -> list[tuple[Path, dict, dict]]:
    runs = []
    for d in run_dirs:
        path = Path(d)
        marker = path / DONE_MARKER
        if not marker.exists():
            continue
        config = json.loads((path / "config.json").read_text())
        evaluation = json.loads((path / "eval.json").read_text())
        runs.append((path, config, evaluation))
    return runs


def cmd_report(args: argparse.Namespace) -> int:
    runs = _finished_runs(args.runs)
    if not runs:
        raise ValueError("no completed runs found (missing DONE markers?)")
    families = {config_hash(ExperimentConfig.from_dict(cfg).family_dict()) for _, cfg, _ in runs}
    if len(families) > 1:
        raise ValueError(f"runs mix {len(families)} incompatible configurations; aggregate one family at a time")
    family = families.pop()

    by_strategy: dict[str, list[dict]] = {}
    for _, cfg, evaluation in runs:
        by_strategy.setdefault(cfg["train"]["strategy"], []).append(evaluation)

    def stats(values: list[float | None]) -> tuple[str, str]:
        present = [v for v in values if v is not None]
        if not present:
            return "", ""
        arr = np.asarray(present)
        return format_float(float(arr.mean())), format_float(float(arr.std()))

    header = [
        "strategy",
        "runs",
        "balanced_mean",
        "balanced_std",
        "head_mean",
        "head_std",
        "medium_mean",
        "medium_std",
        "tail_mean",
        "tail_std",
        "family_sha256",
    ]
    rows = []
    for strategy in sorted(by_strategy):
        evals = by_strategy[strategy]
        balanced = stats([e["balanced_accuracy"] for e in evals])
        groups = [stats([e["group_accuracy"][g] for e in evals]) for g in ("head", "medium", "tail")]
        rows.append([strategy, len(evals), *balanced, *groups[0], *groups[1], *groups[2], family])

    def emit(write_row) -> None:
        write_row(header)
        for row in rows:
            write_row(row)

    if args.out:
        with Path(args.out).open("w", newline="") as fh:
            writer = csv.writer(fh)
            emit(writer.writerow)
    emit(lambda row: print(",".join(str(c) for c in row)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lobmix", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-lt", help="construct a long-tailed dataset and write its manifest")
    p.add_argument("--base", nargs="+", help="CIFAR-10 binary batch file(s) to subsample")
    p.add_argument("--synth-classes", type=int, help="generate a balanced Gaussian-mixture base with this many classes")
    p.add_argument("--synth-dim", type=int, default=10)
    p.add_argument("--synth-separation", type=float, default=3.0)
    p.add_argument("--synth-per-class", type=int, default=1000)
    p.add_argument("--profile", choices=sorted(PROFILE_ALIASES), default="exp")
    p.add_argument("--rho", type=float, default=10.0, help="imbalance ratio: largest over smallest class")
    p.add_argument("--n-max", type=int, default=None, help="largest class size (default: smallest base class)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_lt)

    p = sub.add_parser("analyze", help="label-occurrence reports per sampler combo")
    p.add_argument("--manifest", required=True)
    p.add_argument("--combo", choices=[*COMBO_NAMES, "all"], default="all")
    p.add_argument("--samples", type=int, default=100_000, help="mixed examples per combo; 0 = analytic only")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="train from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=None)
    p.add_argument(
        "--alpha", type=float, default=None,
        help="Beta shape override (config default 1.0; 0.2 is the usual choice for very large image corpora)",
    )
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="aggregate completed runs per strategy")
    p.add_argument("runs", nargs="+", help="run directories written by `lobmix train`")
    p.add_argument("--out", default=None, help="aggregate CSV path (also printed)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
