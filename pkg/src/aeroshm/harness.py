"""Experiment orchestration: train, evaluate, ablate, retrain, attribute.

Every command produces a Report that embeds the full experiment
configuration and the input fingerprints, so re-running with identical
config and seeds reproduces the numbers bit-exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .attribution import (
    AttributionMap,
    AttributionStats,
    channel_sum,
    export_map_csv,
    export_stats_csv,
    integrated_gradients,
    population_stats,
    top_channels,
)
from .baselines import BaselineKind, reduce_dataset
from .data import Campaign, Sample, SensorLayout, labels_array, stack_values
from .errors import ConfigError, DataError
from .models import build_architecture
from .net import FitSettings, LayerStack, fit, save_checkpoint
from .preprocessing import (
    MeanVectorStats,
    SplitAssignment,
    assign_splits,
    build_samples,
    mean_vector,
)

N_CLASSES = 6


@dataclass
class ExperimentConfig:
    """Every knob of one experiment; serialized into reports and
    checkpoints."""

    arch: str = "fcn-cnn"
    aoa_deg: float = 0.0
    split_index: int = 1
    seed: int = 0
    window_steps: int = 150
    window_count: int = 89
    zscore_scope: str = "joint"
    val_fraction: float = 0.25
    batch_size: int = 32
    max_epochs: int = 150
    lr: float = 1e-3
    weight_decay: float = 1e-5
    label_smoothing: float = 0.05
    plateau_factor: float = 0.5
    plateau_patience: int = 10
    min_lr: float = 1e-5
    early_stop_patience: int = 12
    baseline: str = "apb"
    ig_steps: int = 200
    ig_target: str = "logit"
    ig_chunk: int = 64
    ig_max_samples: int | None = None
    log_every: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def from_file(cls, path: Path, overrides: dict | None = None) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"missing config file {path}")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        d.update(overrides or {})
        return cls.from_dict(d)

    def fit_settings(self) -> FitSettings:
        return FitSettings(
            batch_size=self.batch_size, max_epochs=self.max_epochs,
            lr=self.lr, weight_decay=self.weight_decay,
            label_smoothing=self.label_smoothing,
            plateau_factor=self.plateau_factor,
            plateau_patience=self.plateau_patience, min_lr=self.min_lr,
            early_stop_patience=self.early_stop_patience,
            seed=self.seed, log_every=self.log_every,
        )


@dataclass
class Report:
    kind: str
    balanced_accuracy: float | None
    per_class_recall: list[float] | None
    confusion: list[list[int]] | None
    n_samples: int
    config: dict
    wall_clock_s: float
    hashes: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        path.with_suffix(".txt").write_text(self.text_summary())

    def text_summary(self) -> str:
        lines = [f"report: {self.kind}", f"samples: {self.n_samples}",
                 f"wall clock: {self.wall_clock_s:.1f} s"]
        if self.balanced_accuracy is not None:
            lines.append(f"balanced accuracy: {self.balanced_accuracy:.4f}")
        if self.per_class_recall is not None:
            recalls = "  ".join(f"{r:.3f}" for r in self.per_class_recall)
            lines.append(f"per-class recall: {recalls}")
        if self.confusion is not None:
            lines.append("confusion matrix (rows = true class):")
            for row in self.confusion:
                lines.append("  " + " ".join(f"{v:5d}" for v in row))
        for key, value in sorted(self.hashes.items()):
            lines.append(f"{key}: {value}")
        for key, value in sorted(self.extras.items()):
            if isinstance(value, (int, float, str, bool)) or value is None:
                lines.append(f"{key}: {value}")
        return "\n".join(lines) + "\n"


def render_report_text(path: Path) -> str:
    """Human-readable summary of a saved JSON report."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing report file {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed report {path}: {exc}") from exc
    report = Report(
        kind=d.get("kind", "?"), balanced_accuracy=d.get("balanced_accuracy"),
        per_class_recall=d.get("per_class_recall"), confusion=d.get("confusion"),
        n_samples=d.get("n_samples", 0), config=d.get("config", {}),
        wall_clock_s=d.get("wall_clock_s", 0.0), hashes=d.get("hashes", {}),
        extras=d.get("extras", {}),
    )
    return report.text_summary()


def balanced_scores(y_true: np.ndarray, y_pred: np.ndarray,
                    n_classes: int = N_CLASSES):
    """Balanced accuracy (mean per-class recall) and the confusion matrix."""
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[t, p] += 1
    class_counts = confusion.sum(axis=1)
    present = class_counts > 0
    recalls = np.zeros(n_classes)
    recalls[present] = confusion[np.arange(n_classes), np.arange(n_classes)][present] \
        / class_counts[present]
    balanced = float(recalls[present].mean())
    return balanced, recalls, confusion


@dataclass
class PreparedData:
    """Windowed, normalized samples with a split and per-architecture
    model inputs."""

    samples: list[Sample]
    split: SplitAssignment
    inputs: np.ndarray  # model-ready inputs, aligned with samples
    labels: np.ndarray
    mean_stats: MeanVectorStats | None
    layout: SensorLayout

    def slice(self, name: str):
        idx = {"train": self.split.train, "validation": self.split.validation,
               "test": self.split.test,
               "all": list(range(len(self.samples)))}.get(name)
        if idx is None:
            raise ConfigError(f"unknown slice {name!r}")
        if not idx:
            raise DataError(f"slice {name!r} is empty")
        return self.inputs[idx], self.labels[idx], idx


def model_inputs(samples: list[Sample], arch: str,
                 mean_stats: MeanVectorStats | None) -> np.ndarray:
    if arch == "fcn-cnn":
        return stack_values(samples)
    if arch == "mean-mlp":
        if mean_stats is None:
            raise ConfigError("mean-mlp inputs need fitted mean-vector statistics")
        return np.stack([mean_vector(s, mean_stats) for s in samples])
    raise ConfigError(f"unknown architecture {arch!r}")


def prepare_data(campaign: Campaign, config: ExperimentConfig,
                 baseline_reduce: str | None = None) -> PreparedData:
    """Window + normalize a campaign, assign splits, and build model
    inputs. baseline_reduce optionally replaces every sample by its
    baseline before input construction (retraining protocols)."""
    subset = campaign.subset_aoa(config.aoa_deg)
    samples = build_samples(subset, config.window_steps, config.window_count,
                            zscore_scope=config.zscore_scope)
    split = assign_splits(samples, config.split_index, seed=config.seed,
                          val_fraction=config.val_fraction)
    if baseline_reduce is not None:
        samples = reduce_dataset(samples, baseline_reduce)
    mean_stats = None
    if config.arch == "mean-mlp":
        mean_stats = MeanVectorStats.fit([samples[i] for i in split.train])
    inputs = model_inputs(samples, config.arch, mean_stats)
    return PreparedData(samples=samples, split=split, inputs=inputs,
                        labels=labels_array(samples), mean_stats=mean_stats,
                        layout=campaign.layout)


@dataclass
class TrainOutcome:
    stack: LayerStack
    report: Report
    data: PreparedData
    checkpoint_metadata: dict


def _input_shape_for(config: ExperimentConfig, data: PreparedData):
    if config.arch == "fcn-cnn":
        return (data.inputs.shape[1], data.inputs.shape[2])
    return (data.inputs.shape[1],)


def train_classifier(config: ExperimentConfig, campaign: Campaign,
                     baseline_reduce: str | None = None,
                     checkpoint_path: Path | None = None) -> TrainOutcome:
    """Train the configured architecture on a campaign and evaluate the
    held-out test slice. Saves a checkpoint when a path is given."""
    t0 = time.perf_counter()
    data = prepare_data(campaign, config, baseline_reduce=baseline_reduce)
    train_x, train_y, _ = data.slice("train")
    val_x, val_y, _ = data.slice("validation")
    stack = build_architecture(config.arch, _input_shape_for(config, data),
                               n_classes=N_CLASSES, seed=config.seed)
    result = fit(stack, train_x, train_y, val_x, val_y, config.fit_settings())

    test_x, test_y, _ = data.slice("test")
    balanced, recalls, confusion = balanced_scores(test_y, stack.predict(test_x))
    metadata = {
        "config": config.to_dict(),
        "dataset_fingerprint": campaign.fingerprint(),
        "baseline_reduce": baseline_reduce,
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
        "epochs_run": result.epochs_run,
        "mean_stats": None if data.mean_stats is None else {
            "mean": data.mean_stats.mean.tolist(),
            "std": data.mean_stats.std.tolist(),
        },
    }
    hashes = {"dataset": metadata["dataset_fingerprint"]}
    if checkpoint_path is not None:
        hashes["checkpoint"] = save_checkpoint(stack, checkpoint_path, metadata)
    report = Report(
        kind="train" if baseline_reduce is None else f"retrain-{baseline_reduce}",
        balanced_accuracy=balanced,
        per_class_recall=recalls.tolist(),
        confusion=confusion.tolist(),
        n_samples=len(test_y),
        config=config.to_dict(),
        wall_clock_s=time.perf_counter() - t0,
        hashes=hashes,
        extras={
            "slice": "test",
            "best_epoch": result.best_epoch,
            "best_val_loss": result.best_val_loss,
            "epochs_run": result.epochs_run,
            "stopped_early": result.stopped_early,
            "val_accuracy": result.history[result.best_epoch]["val_accuracy"]
            if result.history else None,
            "history": result.history,
        },
    )
    return TrainOutcome(stack=stack, report=report, data=data,
                        checkpoint_metadata=metadata)


def evaluate(stack: LayerStack, inputs: np.ndarray, labels: np.ndarray,
             config: ExperimentConfig | dict | None = None,
             slice_name: str = "test", hashes: dict | None = None) -> Report:
    """Deterministic infer-mode evaluation of a trained stack."""
    t0 = time.perf_counter()
    if len(labels) == 0:
        raise DataError("cannot evaluate an empty slice")
    balanced, recalls, confusion = balanced_scores(labels, stack.predict(inputs))
    cfg = config.to_dict() if isinstance(config, ExperimentConfig) else (config or {})
    return Report(
        kind="evaluate", balanced_accuracy=balanced,
        per_class_recall=recalls.tolist(), confusion=confusion.tolist(),
        n_samples=len(labels), config=cfg,
        wall_clock_s=time.perf_counter() - t0,
        hashes=hashes or {}, extras={"slice": slice_name},
    )


def ablate_on_baselines(stack: LayerStack, data: PreparedData,
                        config: ExperimentConfig,
                        kinds=("apb", "tvb", "mvb"),
                        slice_name: str = "test") -> dict[str, Report]:
    """Evaluate an unmodified trained stack on baseline-reduced inputs."""
    _, _, idx = data.slice(slice_name)
    reports = {}
    for kind in kinds:
        kind = BaselineKind.parse(kind).value
        reduced = reduce_dataset([data.samples[i] for i in idx], kind)
        inputs = model_inputs(reduced, config.arch, data.mean_stats)
        report = evaluate(stack, inputs, labels_array(reduced), config,
                          slice_name=slice_name)
        report.kind = f"ablate-{kind}"
        report.extras["baseline"] = kind
        reports[kind] = report
    return reports


RETRAIN_ARCH = {"tvb": "fcn-cnn", "mvb": "mean-mlp"}


def retrain_on_baseline(config: ExperimentConfig, campaign: Campaign,
                        kind: str, checkpoint_path: Path | None = None) -> TrainOutcome:
    """Retrain from scratch on baseline-reduced data: the CNN on
    temporal-variation samples, the MLP on mean-value vectors."""
    kind = BaselineKind.parse(kind).value
    if kind == "apb":
        raise ConfigError(
            "cannot retrain on the ambient baseline: every reduced sample is "
            "all zeros, so training a classifier on them is not possible")
    cfg = ExperimentConfig.from_dict({**config.to_dict(), "arch": RETRAIN_ARCH[kind],
                                      "baseline": kind})
    return train_classifier(cfg, campaign, baseline_reduce=kind,
                            checkpoint_path=checkpoint_path)


@dataclass
class AttributionOutcome:
    maps: list[AttributionMap]
    vectors: np.ndarray  # (n_attributed, channels) channel sums
    stats: AttributionStats
    top3: list[list[int]]
    report: Report


def attribute_campaign(stack: LayerStack, data: PreparedData,
                       config: ExperimentConfig, slice_name: str = "validation",
                       export_dir: Path | None = None) -> AttributionOutcome:
    """Integrated-gradients maps for correctly classified samples of a
    slice, channel sums, and population statistics.

    ig_max_samples caps the attributed population with a seeded draw (the
    cap is recorded in the report).
    """
    if config.arch != "fcn-cnn":
        raise ConfigError("attribution runs on the (channels, time) CNN input")
    t0 = time.perf_counter()
    inputs, labels, idx = data.slice(slice_name)
    preds = stack.predict(inputs)
    correct = np.flatnonzero(preds == labels)
    if correct.size == 0:
        raise DataError(f"no correctly classified samples in slice {slice_name!r}")
    chosen = correct
    if config.ig_max_samples is not None and correct.size > config.ig_max_samples:
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, 977)))
        chosen = np.sort(rng.choice(correct, size=config.ig_max_samples, replace=False))

    kind = BaselineKind.parse(config.baseline)
    maps: list[AttributionMap] = []
    vectors = np.empty((chosen.size, inputs.shape[1]))
    top3 = []
    sample_ids = []
    for row, j in enumerate(chosen):
        sample = data.samples[idx[j]]
        amap = integrated_gradients(
            stack, inputs[j], kind, steps=config.ig_steps,
            target_class=int(preds[j]), target=config.ig_target,
            chunk_size=config.ig_chunk, sample_id=sample.provenance())
        maps.append(amap)
        vectors[row] = channel_sum(amap)
        top3.append(top_channels(vectors[row], k=3))
        sample_ids.append(sample.provenance())

    stats = population_stats(vectors, sample_ids=sample_ids)
    gaps = np.array([m.completeness_gap for m in maps])
    overall_top = top_channels(np.abs(stats.mean), k=5)
    report = Report(
        kind=f"attribute-{kind.value}", balanced_accuracy=None,
        per_class_recall=None, confusion=None,
        n_samples=int(chosen.size), config=config.to_dict(),
        wall_clock_s=time.perf_counter() - t0,
        extras={
            "slice": slice_name,
            "baseline": kind.value,
            "steps": config.ig_steps,
            "target": config.ig_target,
            "n_slice_samples": int(len(labels)),
            "n_correct": int(correct.size),
            "n_attributed": int(chosen.size),
            "mean_completeness_gap": float(gaps.mean()),
            "max_completeness_gap": float(gaps.max()),
            "top_channels_by_mean_abs": overall_top,
        },
    )
    if export_dir is not None:
        export_dir = Path(export_dir)
        export_dir.mkdir(parents=True, exist_ok=True)
        export_stats_csv(stats, export_dir / f"channel_stats_{kind.value}.csv",
                         layout=data.layout)
        for amap in maps[:min(len(maps), 8)]:  # a few example maps
            ts, run, win = amap.sample_id
            export_map_csv(
                amap, export_dir / f"map_{kind.value}_ts{ts}_r{run}_w{win}.csv",
                layout=data.layout)
        report.save(export_dir / f"attribution_{kind.value}.json")
    return AttributionOutcome(maps=maps, vectors=vectors, stats=stats,
                              top3=top3, report=report)
