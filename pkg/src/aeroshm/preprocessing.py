"""Raw recordings to model-ready samples: trim, window, normalize, mean
vectors, and the non-random train/validation/test splits.

Pipeline: the first 40 s and last 10 s of every run are discarded, 89
overlapping 1.5 s windows are cut from the remainder at a uniform stride,
and each window is z-scored. Splits hold one of the three runs per
boundary condition (test series x damage class) out for testing; a 25%
validation slice is carved out of the training pool, stratified by class
and boundary condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Campaign, RawRun, Sample
from .errors import ConfigError, DataError

TRIM_HEAD_S = 40.0
TRIM_TAIL_S = 10.0
WINDOW_STEPS = 150
WINDOW_COUNT = 89
# which run index each split holds out for testing
HELD_OUT_RUN = {1: 3, 2: 1, 3: 2}


def trim_run(run: RawRun) -> RawRun:
    """Drop the first 40 s and last 10 s of a run."""
    head = int(round(TRIM_HEAD_S * run.sample_rate))
    tail = int(round(TRIM_TAIL_S * run.sample_rate))
    if run.n_steps <= head + tail:
        raise DataError(
            f"run {run.key()} too short to trim: {run.duration_s:.1f} s "
            f"<= {TRIM_HEAD_S + TRIM_TAIL_S:.0f} s"
        )
    trimmed = RawRun(
        values=run.values[:, head:run.n_steps - tail],
        test_series=run.test_series,
        damage_class=run.damage_class,
        run_index=run.run_index,
        aoa_deg=run.aoa_deg,
        excitation_hz=run.excitation_hz,
        wind_speed=run.wind_speed,
        sample_rate=run.sample_rate,
        seed=run.seed,
    )
    return trimmed


def window_run(run: RawRun, window_steps: int = WINDOW_STEPS,
               window_count: int = WINDOW_COUNT) -> list[Sample]:
    """Cut uniformly strided windows from a trimmed run.

    Stride is floor((N - W) / (count - 1)); leftover steps at the tail are
    discarded. Windows are ordered by start time and all carry the run's
    damage class as label.
    """
    n = run.n_steps
    if window_steps < 1 or window_count < 1:
        raise ConfigError("window_steps and window_count must be positive")
    if n < window_steps:
        raise DataError(
            f"run {run.key()} has {n} steps, shorter than one {window_steps}-step window")
    if window_count == 1:
        starts = [0]
    else:
        if n - window_steps < window_count - 1:
            raise DataError(
                f"run {run.key()}: {n} steps cannot host {window_count} distinct "
                f"{window_steps}-step windows")
        stride = (n - window_steps) // (window_count - 1)
        starts = [i * stride for i in range(window_count)]
    return [
        Sample(
            values=run.values[:, s:s + window_steps].copy(),
            label=run.damage_class,
            test_series=run.test_series,
            run_index=run.run_index,
            window_index=w,
        )
        for w, s in enumerate(starts)
    ]


def zscore(values: np.ndarray, scope: str = "joint") -> np.ndarray:
    """Z-score a (channels, steps) array.

    scope "joint" uses a single mean/std over all elements, preserving the
    relative magnitudes between channels; "per-channel" normalizes each
    channel independently. Zero-variance input maps to all zeros.
    """
    if scope == "joint":
        mean = values.mean()
        std = values.std()
        if std == 0.0:
            return np.zeros_like(values)
        return (values - mean) / std
    if scope == "per-channel":
        mean = values.mean(axis=1, keepdims=True)
        std = values.std(axis=1, keepdims=True)
        out = np.zeros_like(values)
        ok = std[:, 0] > 0.0
        out[ok] = (values[ok] - mean[ok]) / std[ok]
        return out
    raise ConfigError(f"unknown z-score scope {scope!r}")


def zscore_sample(sample: Sample, scope: str = "joint") -> Sample:
    return Sample(
        values=zscore(sample.values, scope=scope),
        label=sample.label,
        test_series=sample.test_series,
        run_index=sample.run_index,
        window_index=sample.window_index,
    )


@dataclass
class MeanVectorStats:
    """Training-set mean/std of the per-channel mean vectors."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, samples: list[Sample]) -> "MeanVectorStats":
        if not samples:
            raise DataError("cannot fit mean-vector statistics on an empty set")
        vectors = np.stack([s.values.mean(axis=1) for s in samples])
        std = vectors.std(axis=0)
        std[std == 0.0] = 1.0
        return cls(mean=vectors.mean(axis=0), std=std)


def mean_vector(sample: Sample, stats: MeanVectorStats) -> np.ndarray:
    """Per-channel temporal mean, z-scored against training-set statistics."""
    if stats is None:
        raise ConfigError("mean_vector requires fitted training statistics")
    return (sample.values.mean(axis=1) - stats.mean) / stats.std


@dataclass
class SplitAssignment:
    """Index lists into a sample list, plus how they were derived."""

    split_index: int
    seed: int
    train: list[int]
    validation: list[int]
    test: list[int]
    held_out_run: int

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.validation), len(self.test))


def build_samples(campaign: Campaign, window_steps: int = WINDOW_STEPS,
                  window_count: int = WINDOW_COUNT,
                  zscore_scope: str = "joint") -> list[Sample]:
    """Trim, window, and normalize every run of a campaign."""
    samples: list[Sample] = []
    for run in sorted(campaign.runs, key=lambda r: r.key()):
        for sample in window_run(trim_run(run), window_steps, window_count):
            samples.append(zscore_sample(sample, scope=zscore_scope))
    return samples


def assign_splits(samples: list[Sample], split_index: int, seed: int = 0,
                  val_fraction: float = 0.25) -> SplitAssignment:
    """Per boundary condition, hold one run index out for testing and carve
    a stratified validation slice from the remaining two.

    The rotation convention is fixed: split 1 holds out run 3, split 2 run
    1, split 3 run 2. Validation indices are drawn per (class, test-series)
    cell with a seeded RNG; quotas are distributed largest-remainder so
    every class contributes equally on the full balanced grid.
    """
    if split_index not in HELD_OUT_RUN:
        raise ConfigError(f"split_index must be 1, 2 or 3, got {split_index}")
    if not samples:
        raise DataError("empty sample list")
    if not 0.0 <= val_fraction < 1.0:
        raise ConfigError(f"val_fraction must be in [0, 1), got {val_fraction}")

    cells: dict[tuple[int, int], set[int]] = {}
    for s in samples:
        cells.setdefault((s.test_series, s.label), set()).add(s.run_index)
    for key, runs in sorted(cells.items()):
        if runs != {1, 2, 3}:
            raise DataError(
                f"boundary condition ts={key[0]} class={key[1]} has runs "
                f"{sorted(runs)}, need exactly (1, 2, 3)")

    held_out = HELD_OUT_RUN[split_index]
    test_idx = [i for i, s in enumerate(samples) if s.run_index == held_out]
    pool_by_cell: dict[tuple[int, int], list[int]] = {}
    for i, s in enumerate(samples):
        if s.run_index != held_out:
            pool_by_cell.setdefault((s.label, s.test_series), []).append(i)

    pool_total = sum(len(v) for v in pool_by_cell.values())
    val_total = round(val_fraction * pool_total)
    classes = sorted({label for label, _ in pool_by_cell})
    class_sizes = {c: sum(len(v) for (label, ts), v in pool_by_cell.items() if label == c)
                   for c in classes}

    class_quota = _largest_remainder(
        [class_sizes[c] for c in classes], val_total)
    rng = np.random.default_rng(np.random.SeedSequence((seed, split_index)))

    val_idx: list[int] = []
    for c, quota in zip(classes, class_quota):
        cell_keys = sorted(k for k in pool_by_cell if k[0] == c)
        cell_quota = _largest_remainder(
            [len(pool_by_cell[k]) for k in cell_keys], quota)
        for key, q in zip(cell_keys, cell_quota):
            members = sorted(pool_by_cell[key])
            chosen = rng.choice(len(members), size=q, replace=False)
            val_idx.extend(members[j] for j in chosen)

    val_set = set(val_idx)
    train_idx = [i for i, s in enumerate(samples)
                 if s.run_index != held_out and i not in val_set]
    return SplitAssignment(
        split_index=split_index, seed=seed,
        train=sorted(train_idx), validation=sorted(val_idx), test=sorted(test_idx),
        held_out_run=held_out,
    )


def _largest_remainder(sizes: list[int], total: int) -> list[int]:
    """Split `total` proportionally to `sizes` with integer parts summing
    exactly to total; ties go to earlier entries."""
    pool = sum(sizes)
    if pool == 0:
        return [0] * len(sizes)
    exact = [total * s / pool for s in sizes]
    base = [int(np.floor(e)) for e in exact]
    leftover = total - sum(base)
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base
