"""Data model and on-disk layout for pressure-measurement campaigns.

A campaign is a collection of runs. Each run holds 37 working sensor
channels sampled at 100 Hz plus the boundary-condition metadata (test
series, damage class, run index, angle of attack, excitation frequency,
wind speed).

Disk layout (see docs/formats.md for the byte-exact definition):

    <dataset>/
      manifest.json
      layout.json
      generator_config.json        # present for surrogate campaigns
      runs/ts<T>_d<D>_r<R>/
        meta.json
        signals.bin                # float64 little-endian, channel-major
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

SAMPLE_RATE_HZ = 100.0
N_PHYSICAL_SENSORS = 40
DEFAULT_DEAD_SENSORS = (5, 21, 33)
N_DAMAGE_CLASSES = 6


@dataclass(frozen=True)
class SensorLayout:
    """Mapping between contiguous channel indices and physical sensor ids.

    Physical ids run 0..39 around the airfoil: ids 0..19 along the suction
    side from trailing edge to leading edge, ids 20..39 back along the
    pressure side. Dead sensors are dropped, leaving 37 working channels
    indexed contiguously in physical-id order.
    """

    dead_sensors: tuple[int, ...] = DEFAULT_DEAD_SENSORS

    @property
    def working_ids(self) -> tuple[int, ...]:
        return tuple(i for i in range(N_PHYSICAL_SENSORS) if i not in self.dead_sensors)

    @property
    def n_channels(self) -> int:
        return len(self.working_ids)

    def channel_of_id(self, sensor_id: int) -> int:
        try:
            return self.working_ids.index(sensor_id)
        except ValueError:
            raise DataError(f"sensor id {sensor_id} is not a working sensor") from None

    def id_of_channel(self, channel: int) -> int:
        return self.working_ids[channel]

    def chord_position(self, sensor_id: int) -> tuple[float, str]:
        """Chordwise coordinate x/c in [0, 1] and surface side of a sensor.

        0 is the leading edge, 1 the trailing edge.
        """
        if not 0 <= sensor_id < N_PHYSICAL_SENSORS:
            raise DataError(f"sensor id {sensor_id} outside 0..{N_PHYSICAL_SENSORS - 1}")
        if sensor_id < 20:
            return 1.0 - sensor_id / 19.0, "suction"
        return (sensor_id - 20) / 19.0, "pressure"

    def to_dict(self) -> dict:
        return {
            "n_physical_sensors": N_PHYSICAL_SENSORS,
            "dead_sensors": list(self.dead_sensors),
            "working_ids": list(self.working_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensorLayout":
        return cls(dead_sensors=tuple(d.get("dead_sensors", DEFAULT_DEAD_SENSORS)))


@dataclass
class RawRun:
    """One continuous recording: 37 channels x (duration * 100 Hz) values."""

    values: np.ndarray  # (n_channels, n_steps) float64, pressure-coefficient units
    test_series: int  # 1..8
    damage_class: int  # 0..5
    run_index: int  # 1..3
    aoa_deg: float
    excitation_hz: float
    wind_speed: float
    sample_rate: float = SAMPLE_RATE_HZ
    seed: int | None = None

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_steps / self.sample_rate

    def key(self) -> tuple[int, int, int]:
        return (self.test_series, self.damage_class, self.run_index)

    def meta_dict(self) -> dict:
        return {
            "test_series": self.test_series,
            "damage_class": self.damage_class,
            "run_index": self.run_index,
            "aoa_deg": self.aoa_deg,
            "excitation_hz": self.excitation_hz,
            "wind_speed": self.wind_speed,
            "sample_rate": self.sample_rate,
            "n_channels": self.n_channels,
            "n_steps": self.n_steps,
            "seed": self.seed,
        }


@dataclass
class Sample:
    """One windowed sample: values (n_channels, window_steps) plus provenance."""

    values: np.ndarray
    label: int
    test_series: int
    run_index: int
    window_index: int

    def provenance(self) -> tuple[int, int, int]:
        return (self.test_series, self.run_index, self.window_index)


@dataclass
class Campaign:
    """A set of runs sharing one sensor layout."""

    runs: list[RawRun]
    layout: SensorLayout = field(default_factory=SensorLayout)
    generator_config: dict | None = None

    def __len__(self) -> int:
        return len(self.runs)

    def run(self, test_series: int, damage_class: int, run_index: int) -> RawRun:
        for r in self.runs:
            if r.key() == (test_series, damage_class, run_index):
                return r
        raise DataError(
            f"no run with test_series={test_series} damage_class={damage_class} "
            f"run_index={run_index}"
        )

    def subset_aoa(self, aoa_deg: float) -> "Campaign":
        runs = [r for r in self.runs if r.aoa_deg == aoa_deg]
        if not runs:
            raise DataError(f"campaign has no runs at AoA {aoa_deg} deg")
        return Campaign(runs=runs, layout=self.layout, generator_config=self.generator_config)

    def fingerprint(self) -> str:
        """Deterministic sha256 over run metadata and signal bytes."""
        h = hashlib.sha256()
        for r in sorted(self.runs, key=lambda r: r.key()):
            h.update(json.dumps(r.meta_dict(), sort_keys=True).encode())
            h.update(np.ascontiguousarray(r.values, dtype="<f8").tobytes())
        return h.hexdigest()


def _run_dirname(run: RawRun) -> str:
    return f"ts{run.test_series}_d{run.damage_class}_r{run.run_index}"


def save_run(run: RawRun, run_dir: Path) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "meta.json").write_text(json.dumps(run.meta_dict(), indent=2, sort_keys=True))
    data = np.ascontiguousarray(run.values, dtype="<f8")
    (run_dir / "signals.bin").write_bytes(data.tobytes())


def load_run(run_dir: Path) -> RawRun:
    run_dir = Path(run_dir)
    meta_path = run_dir / "meta.json"
    bin_path = run_dir / "signals.bin"
    if not meta_path.exists():
        raise DataError(f"missing metadata file {meta_path}")
    if not bin_path.exists():
        raise DataError(f"missing signal file {bin_path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed metadata in {meta_path}: {exc}") from exc
    required = ("test_series", "damage_class", "run_index", "aoa_deg",
                "excitation_hz", "wind_speed", "sample_rate", "n_channels", "n_steps")
    missing = [k for k in required if k not in meta]
    if missing:
        raise DataError(f"{meta_path} missing keys: {', '.join(missing)}")
    raw = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    n_channels, n_steps = int(meta["n_channels"]), int(meta["n_steps"])
    if raw.size != n_channels * n_steps:
        raise DataError(
            f"{bin_path} holds {raw.size} values, expected "
            f"{n_channels}x{n_steps}={n_channels * n_steps}"
        )
    values = raw.reshape(n_channels, n_steps).copy()
    _check_finite(values, str(bin_path))
    return RawRun(
        values=values,
        test_series=int(meta["test_series"]),
        damage_class=int(meta["damage_class"]),
        run_index=int(meta["run_index"]),
        aoa_deg=float(meta["aoa_deg"]),
        excitation_hz=float(meta["excitation_hz"]),
        wind_speed=float(meta["wind_speed"]),
        sample_rate=float(meta["sample_rate"]),
        seed=meta.get("seed"),
    )


def save_campaign(campaign: Campaign, dataset_dir: Path) -> None:
    dataset_dir = Path(dataset_dir)
    dataset_dir.mkdir(parents=True, exist_ok=True)
    run_entries = []
    for run in sorted(campaign.runs, key=lambda r: r.key()):
        rel = Path("runs") / _run_dirname(run)
        save_run(run, dataset_dir / rel)
        entry = dict(run.meta_dict())
        entry["dir"] = str(rel)
        run_entries.append(entry)
    manifest = {
        "format_version": 1,
        "n_runs": len(run_entries),
        "runs": run_entries,
    }
    (dataset_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    (dataset_dir / "layout.json").write_text(
        json.dumps(campaign.layout.to_dict(), indent=2, sort_keys=True))
    if campaign.generator_config is not None:
        (dataset_dir / "generator_config.json").write_text(
            json.dumps(campaign.generator_config, indent=2, sort_keys=True))


def load_campaign(dataset_dir: Path) -> Campaign:
    dataset_dir = Path(dataset_dir)
    manifest_path = dataset_dir / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"{dataset_dir} is not a dataset directory (no manifest.json)")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest {manifest_path}: {exc}") from exc
    layout_path = dataset_dir / "layout.json"
    layout = SensorLayout()
    if layout_path.exists():
        layout = SensorLayout.from_dict(json.loads(layout_path.read_text()))
    gen_path = dataset_dir / "generator_config.json"
    generator_config = json.loads(gen_path.read_text()) if gen_path.exists() else None
    runs = [load_run(dataset_dir / entry["dir"]) for entry in manifest["runs"]]
    for run in runs:
        if run.n_channels != layout.n_channels:
            raise DataError(
                f"run {run.key()} has {run.n_channels} channels, "
                f"layout declares {layout.n_channels}"
            )
    return Campaign(runs=runs, layout=layout, generator_config=generator_config)


def _check_finite(values: np.ndarray, source: str) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        ch, step = np.argwhere(bad)[0]
        raise DataError(
            f"{source}: non-finite value at channel {int(ch)}, time step {int(step)}"
        )


def ingest_csv_run(csv_path: Path, meta_path: Path,
                   layout: SensorLayout | None = None) -> RawRun:
    """Read one run from a CSV table plus a JSON metadata sidecar.

    The CSV must have a header row of physical sensor ids and one row per
    time step. Columns for dead sensors are dropped; all working sensors
    must be present.
    """
    layout = layout or SensorLayout()
    csv_path, meta_path = Path(csv_path), Path(meta_path)
    if not csv_path.exists():
        raise DataError(f"missing CSV file {csv_path}")
    if not meta_path.exists():
        raise DataError(f"missing metadata sidecar {meta_path}")
    with open(csv_path) as fh:
        header = fh.readline().strip()
        if not header:
            raise DataError(f"{csv_path} is empty")
        try:
            sensor_ids = [int(c) for c in header.split(",")]
        except ValueError:
            raise DataError(
                f"{csv_path}: header must hold integer sensor ids, got {header!r}"
            ) from None
        try:
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataError(f"{csv_path}: malformed numeric data: {exc}") from exc
    if table.shape[1] != len(sensor_ids):
        raise DataError(
            f"{csv_path}: {table.shape[1]} columns but {len(sensor_ids)} header ids")
    present = set(sensor_ids)
    missing = [i for i in layout.working_ids if i not in present]
    if missing:
        raise DataError(
            f"{csv_path}: missing working sensor id(s) {', '.join(map(str, missing))}")
    columns = [sensor_ids.index(i) for i in layout.working_ids]
    values = np.ascontiguousarray(table[:, columns].T, dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        ch, step = np.argwhere(bad)[0]
        raise DataError(
            f"{csv_path}: non-finite value at sensor id "
            f"{layout.id_of_channel(int(ch))}, row {int(step) + 2}"
        )
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed metadata in {meta_path}: {exc}") from exc
    required = ("test_series", "damage_class", "run_index", "aoa_deg",
                "excitation_hz", "wind_speed")
    missing_keys = [k for k in required if k not in meta]
    if missing_keys:
        raise DataError(f"{meta_path} missing keys: {', '.join(missing_keys)}")
    return RawRun(
        values=values,
        test_series=int(meta["test_series"]),
        damage_class=int(meta["damage_class"]),
        run_index=int(meta["run_index"]),
        aoa_deg=float(meta["aoa_deg"]),
        excitation_hz=float(meta["excitation_hz"]),
        wind_speed=float(meta["wind_speed"]),
        sample_rate=float(meta.get("sample_rate", SAMPLE_RATE_HZ)),
        seed=meta.get("seed"),
    )


def export_csv_run(run: RawRun, csv_path: Path, meta_path: Path,
                   layout: SensorLayout | None = None) -> None:
    """Write a run as CSV + metadata sidecar (inverse of ingest_csv_run)."""
    layout = layout or SensorLayout()
    header = ",".join(str(i) for i in layout.working_ids)
    np.savetxt(csv_path, run.values.T, delimiter=",", header=header, comments="",
               fmt="%.17g")
    Path(meta_path).write_text(json.dumps(run.meta_dict(), indent=2, sort_keys=True))


def stack_values(samples: list[Sample]) -> np.ndarray:
    """Stack sample values into one (n_samples, n_channels, window) array."""
    if not samples:
        raise DataError("empty sample list")
    return np.stack([s.values for s in samples])


def labels_array(samples: list[Sample]) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=np.int64)
