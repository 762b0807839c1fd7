"""Five-phase pipeline: ingest, k-selection, yearly clustering, features,
model training, and evaluation, with JSON/CSV report emission.

Fitted state (k choice, cluster centers, spatial reference, vocabularies,
standardization, model weights) is derived from the training partition
only. Both k-selection reports (elbow and gap) are always emitted, whatever
method picks the final k. All artifacts are hashed into manifest.json;
evaluation.json and model.json are byte-identical across reruns with the
same config and seed.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .clustering import (
    DEFAULT_B,
    DEFAULT_KMAX,
    DEFAULT_MAX_ITER,
    DEFAULT_N_INIT,
    DEFAULT_TOL,
    elbow_select,
    gap_statistic,
    stack_yearly_centers,
    write_json_report,
)
from .errors import ConfigurationError, DataError, ParameterError
from .evaluation import evaluate_predictions, smoothing_search
from .features import (
    AddressVocabulary,
    FeatureSchema,
    SpatialReference,
    Standardization,
    build_feature_matrix,
    feature_meta_dict,
)
from .ingest import (
    BoundingBox,
    CsvSchema,
    chronological_split,
    clean_records,
    parse_csv,
    split_by_year,
)
from .kernels import backend
from .labels import CLASS_COUNT
from .models import MODEL_KINDS, feature_importance, save_model, train_model
from .seeding import derive_seed

K_METHODS = ("gap_max", "gap_onesd", "elbow", "fixed")


OUTPUT_DIR_ENV = "CRIMEPRED_OUTPUT_DIR"


@dataclass
class PipelineConfig:
    """Everything a `run` needs; loadable from JSON with flag overrides.

    When output_dir is omitted, artifacts go to a run-stamped subdirectory
    of $CRIMEPRED_OUTPUT_DIR."""

    input_path: Optional[str] = None
    output_dir: Optional[str] = None
    columns: CsvSchema = field(default_factory=CsvSchema)
    bounding_box: BoundingBox = field(default_factory=BoundingBox)
    split_ratio: float = 0.8
    split_year: Optional[int] = None
    k_method: str = "gap_max"
    fixed_k: Optional[int] = None
    kmax: int = DEFAULT_KMAX
    gap_b: int = DEFAULT_B
    n_init: int = DEFAULT_N_INIT
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    on_undersized_year: str = "error"
    model_kind: str = "random_forest"
    model_params: dict = field(default_factory=dict)
    feature_names: Optional[list[str]] = None
    class_count: int = CLASS_COUNT
    smoothing_grid: Optional[list[float]] = None
    per_center_distances: bool = False
    seed: int = 0
    write_features: bool = False

    def schema(self) -> FeatureSchema:
        if self.feature_names is None:
            return FeatureSchema.default()
        return FeatureSchema(tuple(self.feature_names))

    def validate(self):
        if self.input_path is None:
            raise ConfigurationError("no input_path configured")
        if not Path(self.input_path).exists():
            raise DataError(f"input file does not exist: {self.input_path}")
        if self.split_year is None and not 0.0 < self.split_ratio < 1.0:
            raise ParameterError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if self.k_method not in K_METHODS:
            raise ConfigurationError(
                f"k_method must be one of {K_METHODS}, got {self.k_method!r}"
            )
        if self.k_method == "fixed":
            if self.fixed_k is None or self.fixed_k < 1:
                raise ConfigurationError("k_method 'fixed' requires fixed_k >= 1")
        elif self.fixed_k is not None:
            raise ConfigurationError(
                f"fixed_k is only valid with k_method 'fixed', not {self.k_method!r}"
            )
        if self.kmax < 3:
            raise ConfigurationError(f"kmax must be >= 3, got {self.kmax}")
        if self.gap_b < 1:
            raise ConfigurationError(f"gap_b must be >= 1, got {self.gap_b}")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigurationError(
                f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}"
            )
        if self.class_count < 1:
            raise ConfigurationError(f"class_count must be >= 1, got {self.class_count}")
        self.schema()  # raises SchemaError on bad names

    def to_json_dict(self) -> dict:
        data = asdict(self)
        data["columns"] = asdict(self.columns)
        data["bounding_box"] = asdict(self.bounding_box)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        try:
            if "columns" in data and isinstance(data["columns"], dict):
                data["columns"] = CsvSchema(**data["columns"])
            if "bounding_box" in data and isinstance(data["bounding_box"], dict):
                data["bounding_box"] = BoundingBox(**data["bounding_box"])
        except TypeError as exc:
            raise ConfigurationError(f"invalid config: {exc}") from exc
        unknown = set(data) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(f"invalid config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                return cls.from_dict(json.load(handle))
        except FileNotFoundError:
            raise DataError(f"config file does not exist: {path}")
        except json.JSONDecodeError as exc:
            raise DataError(f"config file {path} is not valid JSON: {exc}") from exc


@dataclass
class RunManifest:
    config: dict
    chosen_k: Optional[int]
    artifacts: dict[str, str]
    phase_seconds: dict[str, float]
    tool_version: str
    kernel_backend: str
    failed_phase: Optional[str] = None

    def to_json_dict(self) -> dict:
        return asdict(self)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(data: dict, path: Path):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write("\n")


def resolve_output_dir(config: PipelineConfig) -> Path:
    """Explicit output_dir wins; otherwise a run-stamped subdirectory of
    $CRIMEPRED_OUTPUT_DIR is created."""
    if config.output_dir is not None:
        return Path(config.output_dir)
    root = os.environ.get(OUTPUT_DIR_ENV)
    if not root:
        raise ConfigurationError(
            f"no output_dir in the config and {OUTPUT_DIR_ENV} is not set"
        )
    stamp = time.strftime("run-%Y%m%d-%H%M%S", time.gmtime())
    out = Path(root) / stamp
    suffix = 0
    while out.exists():
        suffix += 1
        out = Path(root) / f"{stamp}-{suffix}"
    return out


def run_pipeline(config: PipelineConfig) -> RunManifest:
    """Execute ingest -> split -> k-selection -> yearly stacking ->
    features -> standardize -> train -> evaluate -> smooth -> importance,
    emitting every report under the resolved output directory."""
    config.validate()
    out = resolve_output_dir(config)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, str] = {}
    timings: dict[str, float] = {}
    config_snapshot = config.to_json_dict()
    config_snapshot["output_dir"] = str(out)
    manifest = RunManifest(
        config=config_snapshot,
        chosen_k=None,
        artifacts=artifacts,
        phase_seconds=timings,
        tool_version=__version__,
        kernel_backend=backend(),
    )

    def emit(name: str):
        artifacts[name] = _sha256(out / name)

    def finish_phase(name: str, start: float):
        timings[name] = round(time.perf_counter() - start, 6)

    phase = "ingest"
    try:
        t0 = time.perf_counter()
        raw_records, parse_report = parse_csv(config.input_path, config.columns)
        records, clean_report = clean_records(raw_records, config.bounding_box)
        _write_json(
            {
                "rows_read": parse_report["rows_read"],
                "rows_kept": clean_report["rows_kept"],
                "drops": clean_report["drops"],
            },
            out / "ingest_report.json",
        )
        emit("ingest_report.json")
        finish_phase(phase, t0)

        phase = "split"
        t0 = time.perf_counter()
        if config.split_year is not None:
            split = split_by_year(records, config.split_year)
        else:
            split = chronological_split(records, config.split_ratio)
        _write_json(
            {
                "n_train": len(split.train),
                "n_test": len(split.test),
                "split_timestamp": split.split_timestamp.isoformat(),
            },
            out / "split.json",
        )
        emit("split.json")
        finish_phase(phase, t0)

        train_points = np.column_stack(
            [
                np.array([r.x for r in split.train]),
                np.array([r.y for r in split.train]),
            ]
        )

        phase = "select_k"
        t0 = time.perf_counter()
        kselect_seed = derive_seed(config.seed, "select-k")
        elbow = elbow_select(
            train_points, config.kmax, seed=kselect_seed,
            n_init=config.n_init, max_iter=config.max_iter, tol=config.tol,
        )
        write_json_report(elbow, out / "elbow_report.json")
        emit("elbow_report.json")
        gap = gap_statistic(
            train_points, config.kmax, B=config.gap_b, seed=kselect_seed,
            n_init=config.n_init, max_iter=config.max_iter, tol=config.tol,
        )
        write_json_report(gap, out / "gap_report.json")
        emit("gap_report.json")
        if config.k_method == "fixed":
            chosen_k = config.fixed_k
        elif config.k_method == "elbow":
            chosen_k = elbow.k_elbow
        elif config.k_method == "gap_onesd":
            chosen_k = gap.chosen_k_onesd
        else:
            chosen_k = gap.chosen_k_max
        manifest.chosen_k = int(chosen_k)
        _write_json({"method": config.k_method, "k": int(chosen_k)}, out / "kselect.json")
        emit("kselect.json")
        finish_phase(phase, t0)

        phase = "cluster_years"
        t0 = time.perf_counter()
        centers = stack_yearly_centers(
            split.train, chosen_k, seed=derive_seed(config.seed, "cluster-years"),
            n_init=config.n_init, max_iter=config.max_iter, tol=config.tol,
            on_undersized_year=config.on_undersized_year,
        )
        write_json_report(centers, out / "stacked_centers.json")
        emit("stacked_centers.json")
        finish_phase(phase, t0)

        phase = "featurize"
        t0 = time.perf_counter()
        schema = config.schema()
        if config.per_center_distances:
            schema = schema.with_center_distances(centers.flattened.shape[0])
        ref = SpatialReference.fit(split.train)
        vocab = AddressVocabulary.fit(split.train)
        train_matrix = build_feature_matrix(split.train, schema, ref, vocab, centers)
        test_matrix = build_feature_matrix(split.test, schema, ref, vocab, centers)
        finish_phase(phase, t0)

        phase = "standardize"
        t0 = time.perf_counter()
        standardization = Standardization.fit(train_matrix)
        train_matrix = standardization.transform(train_matrix)
        test_matrix = standardization.transform(test_matrix)
        _write_json(
            feature_meta_dict(schema, ref, vocab, standardization),
            out / "features_meta.json",
        )
        emit("features_meta.json")
        if config.write_features:
            from .features import save_feature_matrix

            save_feature_matrix(train_matrix, out / "features_train.csv")
            save_feature_matrix(test_matrix, out / "features_test.csv")
            emit("features_train.csv")
            emit("features_test.csv")
        finish_phase(phase, t0)

        phase = "train"
        t0 = time.perf_counter()
        model = train_model(
            config.model_kind,
            train_matrix,
            params=config.model_params,
            seed=derive_seed(config.seed, "model"),
            n_classes=config.class_count,
        )
        save_model(model, out / "model.json")
        emit("model.json")
        finish_phase(phase, t0)

        phase = "evaluate"
        t0 = time.perf_counter()
        probabilities = model.predict_proba(test_matrix)
        report = evaluate_predictions(
            probabilities, test_matrix.labels, config.model_kind, config.class_count
        )
        report.write_json(out / "evaluation.json")
        emit("evaluation.json")
        report.write_per_label_csv(out / "per_label.csv")
        emit("per_label.csv")
        finish_phase(phase, t0)

        phase = "smooth"
        t0 = time.perf_counter()
        smoothing = smoothing_search(
            probabilities, test_matrix.labels, config.smoothing_grid
        )
        _write_json(smoothing.to_json_dict(), out / "smoothing.json")
        emit("smoothing.json")
        finish_phase(phase, t0)

        if config.model_kind in ("decision_tree", "random_forest"):
            phase = "importance"
            t0 = time.perf_counter()
            feature_importance(model).write_csv(out / "importance.csv")
            emit("importance.csv")
            finish_phase(phase, t0)
    except BaseException:
        manifest.failed_phase = phase
        _write_json(manifest.to_json_dict(), out / "manifest.json")
        raise

    phase = "manifest"
    _write_json(manifest.to_json_dict(), out / "manifest.json")
    return manifest
