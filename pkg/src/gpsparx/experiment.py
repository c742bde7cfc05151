"""Experiment pipeline: simulate -> train -> evaluate, with on-disk artefacts.

Output directory layout::

    datasets/train_<k>.csv (+ .json)   one per training angle
    datasets/test.csv (+ .json)
    models/model_<k>.json              one GpSparxModel per training angle
    models/sectors.json
    models/manifest.json               written only when every angle trained
    report/records.csv
    report/polar.csv
    report/summary.json
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import evaluation, sparx
from .errors import FitError, GpSparxError, InputError
from .geometry import FarmLayout, WakeGeometryParams, grid_layout, normalize_angle
from .gp import FitOptions
from .simulator import FarmDataset, FreeStreamProcess, SimulationConfig, simulate
from .switching import SectorTable, build_sectors

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one switching experiment.

    ``simulation`` holds the shared simulator settings; its free-stream
    process and step count are overridden per dataset (constant direction
    with ``train_steps`` steps at each training angle, a linear sweep with
    ``test_steps`` steps for testing).
    """

    layout: FarmLayout
    geometry: WakeGeometryParams = field(default_factory=WakeGeometryParams)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    training_angles: tuple[float, ...] = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
    train_steps: int = 500
    test_steps: int = 1440
    mode: str = "osa"
    n_bins: int = 360
    band_half_width: float = math.radians(10.0)
    fit: FitOptions = sparx.DEFAULT_FIT_OPTIONS
    seed: int = 0
    layout_path: str | None = None

    def __post_init__(self):
        angles = tuple(float(a) for a in self.training_angles)
        if not angles:
            raise InputError("training_angles must not be empty")
        if len(set(angles)) != len(angles):
            raise InputError(f"training_angles must be distinct, got {angles}")
        if any(not (0.0 <= a < 2 * math.pi) for a in angles):
            raise InputError(f"training angles must lie in [0, 2*pi), got {angles}")
        if self.mode not in ("osa", "cascade"):
            raise InputError(f"mode must be 'osa' or 'cascade', got {self.mode!r}")
        if self.train_steps < 2 or self.test_steps < 1:
            raise InputError("train_steps must be >= 2 and test_steps >= 1")
        if self.n_bins < 4:
            raise InputError("n_bins must be >= 4")
        object.__setattr__(self, "training_angles", angles)

    # seeds of the individual datasets / fits are derived from the master seed
    def _child_seed(self, *key: int) -> int:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=key)
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def train_config(self, k: int) -> SimulationConfig:
        fs = replace(self.simulation.free_stream, kind="constant", phi0=self.training_angles[k])
        return replace(self.simulation, free_stream=fs, n_steps=self.train_steps,
                       rng_seed=self._child_seed(0, k))

    def test_config(self) -> SimulationConfig:
        fs = replace(self.simulation.free_stream, kind="sweep", phi0=0.0, cycles=1.0)
        return replace(self.simulation, free_stream=fs, n_steps=self.test_steps, rng_seed=self._child_seed(1))

    def fit_options(self, k: int) -> FitOptions:
        return replace(self.fit, seed=self._child_seed(2, k))

    def to_dict(self) -> dict:
        return {
            "layout": self.layout_path if self.layout_path is not None else self.layout.to_dict(),
            "geometry": self.geometry.to_dict(),
            "simulation": self.simulation.to_dict(),
            "training_angles": list(self.training_angles),
            "train_steps": self.train_steps,
            "test_steps": self.test_steps,
            "mode": self.mode,
            "n_bins": self.n_bins,
            "band_half_width": self.band_half_width,
            "fit": self.fit.to_dict(),
            "seed": self.seed,
        }

    def hash(self) -> str:
        payload = self.to_dict()
        payload["layout"] = self.layout.to_dict()
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None, degrees: bool = False) -> "ExperimentConfig":
        data = dict(data)
        layout_spec = data.pop("layout", None)
        layout_path = None
        if layout_spec is None:
            layout = grid_layout()
        elif isinstance(layout_spec, str):
            path = Path(layout_spec)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            layout = FarmLayout.load(path)
            layout_path = layout_spec
        else:
            layout = FarmLayout.from_dict(layout_spec)
        try:
            kwargs = {}
            if "geometry" in data:
                kwargs["geometry"] = WakeGeometryParams.from_dict(data.pop("geometry"))
            if "simulation" in data:
                kwargs["simulation"] = SimulationConfig.from_dict(data.pop("simulation"))
            if "fit" in data:
                kwargs["fit"] = FitOptions.from_dict(data.pop("fit"))
            if "training_angles" in data:
                angles = [float(a) for a in data.pop("training_angles")]
                if degrees:
                    angles = [math.radians(a) for a in angles]
                kwargs["training_angles"] = tuple(normalize_angle(a) for a in angles)
            if "band_half_width" in data:
                hw = float(data.pop("band_half_width"))
                kwargs["band_half_width"] = math.radians(hw) if degrees else hw
            return cls(layout=layout, layout_path=layout_path, **kwargs, **data)
        except TypeError as exc:
            raise InputError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def load(cls, path, degrees: bool = False) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent, degrees=degrees)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_simulate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Write one training dataset per angle plus the test sweep."""
    ddir = Path(out) / "datasets"
    ddir.mkdir(parents=True, exist_ok=True)
    written = []
    for k, angle in enumerate(cfg.training_angles):
        sim = cfg.train_config(k)
        ds = simulate(cfg.layout, cfg.geometry, sim)
        path = ddir / f"train_{k}.csv"
        ds.save(path, {"role": "train", "index": k, "training_angle": angle, "seed": sim.rng_seed,
                       "geometry": cfg.geometry.to_dict(), "simulation": sim.to_dict()})
        written.append(path)
    sim = cfg.test_config()
    ds = simulate(cfg.layout, cfg.geometry, sim)
    path = ddir / "test.csv"
    ds.save(path, {"role": "test", "seed": sim.rng_seed, "geometry": cfg.geometry.to_dict(),
                   "simulation": sim.to_dict()})
    written.append(path)
    return written


def run_train(cfg: ExperimentConfig, out: Path) -> Path:
    """Fit one model per training angle; the manifest is written only if all succeed."""
    out = Path(out)
    mdir = out / "models"
    mdir.mkdir(parents=True, exist_ok=True)
    manifest_path = mdir / "manifest.json"
    if manifest_path.exists():
        manifest_path.unlink()

    entries, failures = [], []
    for k, angle in enumerate(cfg.training_angles):
        dpath = out / "datasets" / f"train_{k}.csv"
        ds = FarmDataset.load(dpath, cfg.layout)
        try:
            model = sparx.train_pattern(ds, cfg.layout, cfg.geometry, angle, opts=cfg.fit_options(k))
        except GpSparxError as exc:
            if isinstance(exc, InputError):
                raise
            log.error("training angle %d (%.6g rad) failed: %s", k, angle, exc)
            failures.append(f"angle {k} ({angle:.6g} rad): {exc}")
            continue
        mpath = mdir / f"model_{k}.json"
        model.save(mpath)
        entries.append({"index": k, "training_angle": angle, "file": mpath.name, "sha256": _sha256(mpath),
                        "dataset_sha256": _sha256(dpath)})
    if failures:
        raise FitError("training failed for " + "; ".join(failures))

    table = build_sectors(cfg.training_angles)
    spath = mdir / "sectors.json"
    spath.write_text(_dump(table.to_dict()))
    manifest = {
        "format_version": MANIFEST_VERSION,
        "config_hash": cfg.hash(),
        "models": entries,
        "sectors": {"file": spath.name, "sha256": _sha256(spath)},
    }
    manifest_path.write_text(_dump(manifest))
    return manifest_path


def load_models(out: Path) -> tuple[list[sparx.GpSparxModel], SectorTable, dict]:
    mdir = Path(out) / "models"
    manifest_path = mdir / "manifest.json"
    if not manifest_path.is_file():
        raise InputError(f"model manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    models = []
    for entry in sorted(manifest["models"], key=lambda e: e["index"]):
        path = mdir / entry["file"]
        if _sha256(path) != entry["sha256"]:
            raise InputError(f"model file {path} does not match its manifest hash")
        models.append(sparx.GpSparxModel.load(path))
    table = SectorTable.from_dict(json.loads((mdir / manifest["sectors"]["file"]).read_text()))
    return models, table, manifest


def run_evaluate(cfg: ExperimentConfig, out: Path, predictor=None) -> dict:
    """Evaluate the test sweep and write records, polar map and summary."""
    out = Path(out)
    models, table, manifest = load_models(out)
    test = FarmDataset.load(out / "datasets" / "test.csv", cfg.layout)
    records = evaluation.evaluate_sweep(models, table, test, cfg.mode, predictor=predictor)
    polar = evaluation.bin_polar(records, cfg.n_bins)
    summary = evaluation.summarize(records, table, cfg.mode, cfg.band_half_width)
    summary["config_hash"] = manifest["config_hash"]
    summary["sector_table"] = table.to_dict()["sectors"]
    summary["n_bins"] = cfg.n_bins
    summary["empty_bins"] = int(polar.empty.sum())

    rdir = out / "report"
    rdir.mkdir(parents=True, exist_ok=True)
    (rdir / "records.csv").write_text(records.to_csv())
    (rdir / "polar.csv").write_text(polar.to_csv())
    (rdir / "summary.json").write_text(_dump(summary))
    return summary


def run_all(cfg: ExperimentConfig, out: Path) -> dict:
    run_simulate(cfg, out)
    run_train(cfg, out)
    return run_evaluate(cfg, out)


def format_summary(summary: dict) -> str:
    """Plain-text rendering of ``summary.json``."""
    lines = [f"mode: {summary['mode']}   records: {summary['n_records']}",
             f"global NMSE: {summary['nmse']:.4g}   MSE: {summary['mse']:.4g} (m/s)^2"]
    bc = summary["band_comparison"]
    hw = math.degrees(bc["half_width_rad"])
    lines.append(f"MSE within +/-{hw:g} deg of training angles: {_num(bc['training_band_mse'])}")
    lines.append(f"MSE within +/-{hw:g} deg of sector boundaries: {_num(bc['boundary_band_mse'])}")
    lines.append(f"boundary / training ratio: {_num(bc['ratio'])}")
    lines.append("sectors:")
    for s in summary["sectors"]:
        lines.append(f"  model {s['model_index']}: angle {math.degrees(s['training_angle']):7.2f} deg  "
                     f"[{math.degrees(s['lower']):7.2f}, {math.degrees(s['upper']):7.2f})  "
                     f"n={s['n_records']:6d}  NMSE={_num(s['nmse'])}")
    return "\n".join(lines)


def _num(v) -> str:
    return "n/a" if v is None else f"{v:.4g}"
