"""Command-line interface.

Subcommands: ingest, aggregate, select-k, cluster, kde, featurize, train,
evaluate, smooth, importance, run, version. Exit codes: 0 success,
1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import (
    ClusterModel,
    StackedCenters,
    elbow_select,
    gap_statistic,
    kde_density_grid,
    kmeans_fit,
    stack_yearly_centers,
    write_json_report,
)
from .errors import CrimePredError, ParameterError
from .evaluation import evaluate_predictions, smoothing_search
from .features import (
    AddressVocabulary,
    FeatureSchema,
    SpatialReference,
    Standardization,
    build_feature_matrix,
    load_feature_matrix,
    save_feature_matrix,
)
from .ingest import (
    CsvSchema,
    aggregate_counts,
    chronological_split,
    clean_records,
    parse_csv,
    split_by_year,
    write_records_csv,
)
from .kernels import backend
from .labels import encode_label
from .models import (
    MODEL_KINDS,
    feature_importance,
    load_model,
    save_model,
    train_model,
)
from .pipeline import K_METHODS, PipelineConfig, run_pipeline


# Every data subcommand layers explicit flags over an optional --config file
# over built-in defaults.


def _base_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_json(args.config)
    return PipelineConfig()


def _pick(flag_value, config_value):
    return flag_value if flag_value is not None else config_value


def _csv_schema(args, config: PipelineConfig) -> CsvSchema:
    base = config.columns
    return CsvSchema(
        x=_pick(args.x_col, base.x),
        y=_pick(args.y_col, base.y),
        date=_pick(args.date_col, base.date),
        label=_pick(args.label_col, base.label),
        address=_pick(args.address_col, base.address),
        district=_pick(args.district_col, base.district),
    )


def _add_column_options(parser):
    parser.add_argument("--config", help="pipeline config JSON supplying defaults")
    parser.add_argument("--x-col", default=None)
    parser.add_argument("--y-col", default=None)
    parser.add_argument("--date-col", default=None)
    parser.add_argument("--label-col", default=None)
    parser.add_argument("--district-col", default=None)
    parser.add_argument("--address-col", default=None)


def _input_path(args, config: PipelineConfig) -> str:
    path = _pick(getattr(args, "input", None), config.input_path)
    if path is None:
        raise ParameterError("an input CSV is required (--input or config input_path)")
    return path


def _load_clean_records(args, config: PipelineConfig):
    records, parse_report = parse_csv(_input_path(args, config), _csv_schema(args, config))
    kept, clean_report = clean_records(records, config.bounding_box)
    report = {
        "rows_read": parse_report["rows_read"],
        "rows_kept": clean_report["rows_kept"],
        "drops": clean_report["drops"],
    }
    return kept, report


def _print_json(data: dict):
    print(json.dumps(data, indent=2, sort_keys=True))


def _cmd_version(args) -> int:
    print(f"crimepred {__version__} (kernels: {backend()})")
    return 0


def _cmd_ingest(args) -> int:
    config = _base_config(args)
    kept, report = _load_clean_records(args, config)
    if args.output:
        write_records_csv(kept, args.output, _csv_schema(args, config))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2, sort_keys=True)
            handle.write("\n")
    _print_json(report)
    return 0


def _cmd_aggregate(args) -> int:
    kept, _ = _load_clean_records(args, _base_config(args))
    label = encode_label(args.label).index if args.label else None
    agg = aggregate_counts(kept, args.granularity, label)
    if args.output and str(args.output).endswith(".json"):
        with open(args.output, "w", encoding="utf-8") as handle:
            json.dump(agg.to_json_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
    elif args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write("bin,count\n")
            for bin_index, count in agg.to_csv_rows():
                handle.write(f"{bin_index},{count}\n")
    else:
        print("bin,count")
        for bin_index, count in agg.to_csv_rows():
            print(f"{bin_index},{count}")
    return 0


def _points(records) -> np.ndarray:
    return np.column_stack(
        [np.array([r.x for r in records]), np.array([r.y for r in records])]
    )


def _cmd_select_k(args) -> int:
    config = _base_config(args)
    kept, _ = _load_clean_records(args, config)
    points = _points(kept)
    kmax = _pick(args.kmax, config.kmax)
    seed = _pick(args.seed, config.seed)
    n_init = _pick(args.n_init, config.n_init)
    if args.method == "elbow":
        report = elbow_select(points, kmax, seed=seed, n_init=n_init)
    else:
        report = gap_statistic(points, kmax, B=_pick(args.B, config.gap_b),
                               seed=seed, n_init=n_init)
    if args.output:
        write_json_report(report, args.output)
    _print_json(report.to_json_dict())
    return 0


def _cmd_cluster(args) -> int:
    config = _base_config(args)
    kept, _ = _load_clean_records(args, config)
    k = _pick(args.k, config.fixed_k)
    if k is None:
        raise ParameterError("a cluster count is required (--k or config fixed_k)")
    seed = _pick(args.seed, config.seed)
    n_init = _pick(args.n_init, config.n_init)
    if args.global_fit:
        model = kmeans_fit(_points(kept), k, seed=seed, n_init=n_init)
        result = model.to_json_dict()
    else:
        centers = stack_yearly_centers(kept, k, seed=seed, n_init=n_init,
                                       on_undersized_year=config.on_undersized_year)
        result = centers.to_json_dict()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            json.dump(result, handle, indent=2, sort_keys=True)
            handle.write("\n")
        print(f"wrote {args.output}")
    else:
        _print_json(result)
    return 0


def _cmd_kde(args) -> int:
    kept, _ = _load_clean_records(args, _base_config(args))
    grid = kde_density_grid(
        _points(kept), bandwidth=args.bandwidth, resolution=args.resolution
    )
    grid.write_csv(args.output)
    print(f"wrote {args.output} ({grid.nx}x{grid.ny} cells, "
          f"bandwidth {grid.bandwidth:.6g}, integral {grid.integral():.4f})")
    return 0


def _cmd_featurize(args) -> int:
    config = _base_config(args)
    kept, _ = _load_clean_records(args, config)
    split_year = _pick(args.split_year, config.split_year)
    if split_year is not None:
        split = split_by_year(kept, split_year)
    else:
        split = chronological_split(kept, _pick(args.split_ratio, config.split_ratio))
    centers = None
    if args.centers:
        with open(args.centers, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        if "per_year" in data:
            centers = StackedCenters.from_json_dict(data)
        else:
            centers = ClusterModel.from_json_dict(data).centers
    if args.features:
        schema = FeatureSchema(tuple(args.features.split(",")))
    elif config.feature_names is not None:
        schema = FeatureSchema(tuple(config.feature_names))
    else:
        schema = FeatureSchema.default(include_distance=centers is not None)
    if args.per_center_distances:
        if centers is None:
            raise ParameterError("--per-center-distances requires --centers")
        from .clustering import center_coordinates

        schema = schema.with_center_distances(center_coordinates(centers).shape[0])
    ref = SpatialReference.fit(split.train)
    vocab = AddressVocabulary.fit(split.train)
    train_matrix = build_feature_matrix(split.train, schema, ref, vocab, centers)
    test_matrix = build_feature_matrix(split.test, schema, ref, vocab, centers)
    standardization = Standardization.fit(train_matrix)
    train_matrix = standardization.transform(train_matrix)
    test_matrix = standardization.transform(test_matrix)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_feature_matrix(train_matrix, out / "features_train.csv",
                        out / "features_meta.json", ref=ref, vocab=vocab)
    save_feature_matrix(test_matrix, out / "features_test.csv")
    print(f"wrote {out / 'features_train.csv'} ({train_matrix.n_rows} rows), "
          f"{out / 'features_test.csv'} ({test_matrix.n_rows} rows)")
    return 0


def _cmd_train(args) -> int:
    config = _base_config(args)
    matrix = load_feature_matrix(args.features)
    kind = _pick(args.model, config.model_kind)
    params = dict(config.model_params)
    if args.params:
        try:
            overrides = json.loads(args.params)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"--params is not valid JSON: {exc}") from exc
        if not isinstance(overrides, dict):
            raise ParameterError("--params must be a JSON object")
        params.update(overrides)
    model = train_model(
        kind,
        matrix,
        params=params,
        seed=_pick(args.seed, config.seed),
        n_classes=_pick(args.n_classes, config.class_count),
    )
    save_model(model, args.output)
    print(f"wrote {args.output}")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    matrix = load_feature_matrix(args.features)
    probabilities = model.predict_proba(matrix)
    report = evaluate_predictions(probabilities, matrix.labels, model.kind, model.n_classes)
    if args.output:
        report.write_json(args.output)
    if args.per_label:
        report.write_per_label_csv(args.per_label)
    _print_json(report.to_json_dict())
    return 0


def _cmd_smooth(args) -> int:
    model = load_model(args.model)
    matrix = load_feature_matrix(args.features)
    probabilities = model.predict_proba(matrix)
    result = smoothing_search(probabilities, matrix.labels)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            json.dump(result.to_json_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
    _print_json(
        {
            "best_epsilon": result.best_epsilon,
            "best_loss": result.best_loss,
            "improvement_percent": result.improvement_percent,
        }
    )
    return 0


def _cmd_importance(args) -> int:
    model = load_model(args.model)
    ranking = feature_importance(model)
    if args.output:
        ranking.write_csv(args.output)
        print(f"wrote {args.output}")
    else:
        print("rank,feature,weight")
        for rank, name, weight in ranking.to_csv_rows():
            print(f"{rank},{name},{weight!r}")
    return 0


def _cmd_run(args) -> int:
    config = PipelineConfig.from_json(args.config)
    if args.input is not None:
        config.input_path = args.input
    if args.output_dir is not None:
        config.output_dir = args.output_dir
    if args.seed is not None:
        config.seed = args.seed
    if args.model is not None:
        config.model_kind = args.model
    if args.k_method is not None:
        config.k_method = args.k_method
    if args.fixed_k is not None:
        config.fixed_k = args.fixed_k
    if args.split_year is not None:
        config.split_year = args.split_year
    if args.split_ratio is not None:
        config.split_ratio = args.split_ratio
    manifest = run_pipeline(config)
    _print_json(manifest.to_json_dict())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crimepred",
        description="Crime-type prediction workflow: clustering-derived "
        "features, multiclass models, smoothed log-loss evaluation.",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("version", help="print version and kernel backend")
    p.set_defaults(func=_cmd_version)

    p = sub.add_parser("ingest", help="parse and clean an incident CSV")
    p.add_argument("--input")
    p.add_argument("--output", help="write the cleaned records as CSV")
    p.add_argument("--report", help="write the parse/clean report as JSON")
    _add_column_options(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("aggregate", help="count records per hour/month/year")
    p.add_argument("--input")
    p.add_argument("--granularity", required=True, choices=("hour", "month", "year"))
    p.add_argument("--label", help="restrict to one class label name")
    p.add_argument("--output", help="write CSV (or JSON if the path ends in .json)")
    _add_column_options(p)
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("select-k", help="choose a cluster count (elbow or gap)")
    p.add_argument("--input")
    p.add_argument("--method", required=True, choices=("elbow", "gap"))
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--B", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-init", type=int, default=None)
    p.add_argument("--output", help="write the report as JSON")
    _add_column_options(p)
    p.set_defaults(func=_cmd_select_k)

    p = sub.add_parser("cluster", help="fit K-Means centers (per year by default)")
    p.add_argument("--input")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--global", dest="global_fit", action="store_true",
                   help="fit one model over all years instead of stacking")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-init", type=int, default=None)
    p.add_argument("--output", help="write the centers as JSON")
    _add_column_options(p)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("kde", help="Gaussian density grid over incident coordinates")
    p.add_argument("--input")
    p.add_argument("--bandwidth", type=float, help="kernel bandwidth in degrees (default: Scott's rule)")
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--output", required=True, help="density grid CSV (x, y, density)")
    _add_column_options(p)
    p.set_defaults(func=_cmd_kde)

    p = sub.add_parser("featurize", help="build standardized train/test feature CSVs")
    p.add_argument("--input")
    p.add_argument("--centers", help="stacked centers JSON for the distance feature")
    p.add_argument("--per-center-distances", action="store_true",
                   help="emit one distance column per center in addition to the nearest")
    p.add_argument("--features", help="comma-separated feature names")
    p.add_argument("--split-ratio", type=float, default=None)
    p.add_argument("--split-year", type=int, default=None)
    p.add_argument("--output-dir", required=True)
    _add_column_options(p)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train a model on a feature CSV")
    p.add_argument("--config", help="pipeline config JSON supplying defaults")
    p.add_argument("--features", required=True)
    p.add_argument("--model", choices=MODEL_KINDS, default=None)
    p.add_argument("--params", help="hyperparameters as a JSON object")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-classes", type=int, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--output", help="write evaluation JSON")
    p.add_argument("--per-label", help="write the per-label CSV")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("smooth", help="search the probability-smoothing epsilon")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--output", help="write smoothing JSON")
    p.set_defaults(func=_cmd_smooth)

    p = sub.add_parser("importance", help="feature importances of a tree model")
    p.add_argument("--model", required=True)
    p.add_argument("--output", help="write importance CSV")
    p.set_defaults(func=_cmd_importance)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--input")
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--k-method", choices=K_METHODS)
    p.add_argument("--fixed-k", type=int)
    p.add_argument("--split-year", type=int)
    p.add_argument("--split-ratio", type=float)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 1
    try:
        result = args.func(args)
        return 0 if result is None else int(result)
    except CrimePredError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - safety net
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
