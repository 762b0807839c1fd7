"""CLI subcommands, exit codes, and file flows."""

import json

import pytest

from conftest import write_incident_csv
from crimepred.cli import main


@pytest.fixture(scope="module")
def incident_csv(tmp_path_factory):
    return write_incident_csv(
        tmp_path_factory.mktemp("cli") / "incidents.csv", n=600, seed=13, n_labels=4
    )


def test_version(capsys):
    assert main(["version"]) == 0
    out = capsys.readouterr().out
    assert "crimepred" in out
    assert "kernels:" in out


def test_unknown_subcommand_usage_error(capsys):
    assert main(["frobnicate"]) == 1


def test_unknown_flag_usage_error():
    assert main(["version", "--bogus"]) == 1


def test_no_subcommand_prints_help():
    assert main([]) == 1


def test_missing_input_is_data_error(tmp_path, capsys):
    code = main(["ingest", "--input", str(tmp_path / "nope.csv")])
    assert code == 2
    assert "nope.csv" in capsys.readouterr().err


def test_ingest_report_and_output(incident_csv, tmp_path, capsys):
    out_csv = tmp_path / "clean.csv"
    report_path = tmp_path / "report.json"
    code = main([
        "ingest", "--input", str(incident_csv),
        "--output", str(out_csv), "--report", str(report_path),
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rows_read"] == 600
    assert report["rows_kept"] == 600
    assert json.loads(report_path.read_text()) == report
    assert out_csv.exists()


def test_aggregate_stdout_and_totals(incident_csv, capsys):
    assert main(["aggregate", "--input", str(incident_csv), "--granularity", "year"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "bin,count"
    total = sum(int(line.split(",")[1]) for line in lines[1:])
    assert total == 600


def test_aggregate_label_filter_json(incident_csv, tmp_path):
    out = tmp_path / "agg.json"
    code = main([
        "aggregate", "--input", str(incident_csv), "--granularity", "hour",
        "--label", "Arson", "--output", str(out),
    ])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["granularity"] == "hour"
    assert data["label_filter"] == 3


def test_aggregate_unknown_label(incident_csv, capsys):
    code = main([
        "aggregate", "--input", str(incident_csv), "--granularity", "hour",
        "--label", "Jaywalking",
    ])
    assert code == 2


def test_select_k_gap_reports_both_rules(incident_csv, tmp_path):
    out = tmp_path / "gap.json"
    code = main([
        "select-k", "--input", str(incident_csv), "--method", "gap",
        "--kmax", "4", "--B", "3", "--n-init", "3", "--output", str(out),
    ])
    assert code == 0
    report = json.loads(out.read_text())
    assert "chosen_k_max" in report
    assert "chosen_k_onesd" in report
    assert len(report["gap"]) == 4


def test_select_k_elbow(incident_csv, tmp_path):
    out = tmp_path / "elbow.json"
    code = main([
        "select-k", "--input", str(incident_csv), "--method", "elbow",
        "--kmax", "5", "--n-init", "3", "--output", str(out),
    ])
    assert code == 0
    assert "k_elbow" in json.loads(out.read_text())


def test_cluster_and_feature_flow(incident_csv, tmp_path, capsys):
    centers = tmp_path / "centers.json"
    assert main([
        "cluster", "--input", str(incident_csv), "--k", "2",
        "--n-init", "3", "--output", str(centers),
    ]) == 0
    data = json.loads(centers.read_text())
    assert data["k"] == 2
    assert len(data["per_year"]) == 10

    outdir = tmp_path / "features"
    assert main([
        "featurize", "--input", str(incident_csv), "--centers", str(centers),
        "--output-dir", str(outdir),
    ]) == 0
    assert (outdir / "features_train.csv").exists()
    assert (outdir / "features_test.csv").exists()
    assert (outdir / "features_meta.json").exists()

    model_path = tmp_path / "model.json"
    assert main([
        "train", "--features", str(outdir / "features_train.csv"),
        "--model", "random_forest", "--params", '{"n_trees": 3}',
        "--seed", "5", "--output", str(model_path),
    ]) == 0

    eval_path = tmp_path / "evaluation.json"
    per_label = tmp_path / "per_label.csv"
    assert main([
        "evaluate", "--model", str(model_path),
        "--features", str(outdir / "features_test.csv"),
        "--output", str(eval_path), "--per-label", str(per_label),
    ]) == 0
    report = json.loads(eval_path.read_text())
    assert report["model_kind"] == "random_forest"
    assert 0.0 <= report["log_loss"] < report["baseline_log_loss"]

    assert main([
        "smooth", "--model", str(model_path),
        "--features", str(outdir / "features_test.csv"),
        "--output", str(tmp_path / "smoothing.json"),
    ]) == 0
    smoothing = json.loads((tmp_path / "smoothing.json").read_text())
    assert smoothing["best_loss"] <= smoothing["losses"][0]

    importance_path = tmp_path / "importance.csv"
    assert main([
        "importance", "--model", str(model_path), "--output", str(importance_path),
    ]) == 0
    lines = importance_path.read_text().strip().splitlines()
    assert lines[0] == "rank,feature,weight"


def test_importance_rejects_non_tree_model(incident_csv, tmp_path):
    outdir = tmp_path / "features"
    main(["featurize", "--input", str(incident_csv), "--output-dir", str(outdir)])
    model_path = tmp_path / "knn.json"
    main([
        "train", "--features", str(outdir / "features_train.csv"),
        "--model", "knn", "--output", str(model_path),
    ])
    assert main(["importance", "--model", str(model_path)]) == 1


def test_run_prints_manifest(incident_csv, tmp_path, capsys):
    config = {
        "input_path": str(incident_csv),
        "output_dir": str(tmp_path / "run"),
        "k_method": "fixed",
        "fixed_k": 2,
        "kmax": 4,
        "gap_b": 3,
        "n_init": 3,
        "model_kind": "gaussian_nb",
        "seed": 4,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    assert main(["run", "--config", str(config_path)]) == 0
    manifest = json.loads(capsys.readouterr().out)
    assert manifest["chosen_k"] == 2
    assert "evaluation.json" in manifest["artifacts"]


def test_run_flag_overrides(incident_csv, tmp_path, capsys):
    config = {
        "input_path": str(incident_csv),
        "output_dir": str(tmp_path / "run1"),
        "k_method": "fixed",
        "fixed_k": 2,
        "kmax": 4,
        "gap_b": 3,
        "n_init": 3,
        "model_kind": "gaussian_nb",
        "seed": 4,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    assert main([
        "run", "--config", str(config_path),
        "--output-dir", str(tmp_path / "run2"), "--model", "decision_tree",
    ]) == 0
    manifest = json.loads(capsys.readouterr().out)
    assert manifest["config"]["model_kind"] == "decision_tree"
    assert (tmp_path / "run2" / "importance.csv").exists()


def test_run_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.json")]) == 2


def test_svm_stub_fails_cleanly(incident_csv, tmp_path):
    outdir = tmp_path / "features"
    main(["featurize", "--input", str(incident_csv), "--output-dir", str(outdir)])
    code = main([
        "train", "--features", str(outdir / "features_train.csv"),
        "--model", "svm", "--output", str(tmp_path / "m.json"),
    ])
    assert code == 1


def test_kde_subcommand(incident_csv, tmp_path):
    out = tmp_path / "density.csv"
    assert main(["kde", "--input", str(incident_csv), "--resolution", "20",
                 "--output", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x,y,density"
    assert len(lines) == 1 + 400


def test_subcommands_read_config_with_flag_overrides(incident_csv, tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "input_path": str(incident_csv),
        "kmax": 4,
        "gap_b": 2,
        "n_init": 3,
        "fixed_k": 2,
        "seed": 9,
    }), encoding="utf-8")

    # select-k pulls input, kmax, B, seed from the config
    assert main(["select-k", "--config", str(config_path), "--method", "gap"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["gap"]) == 4
    assert report["B"] == 2
    assert report["seed"] == 9

    # a flag overrides the config value
    assert main(["select-k", "--config", str(config_path), "--method", "gap",
                 "--kmax", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["gap"]) == 3

    # cluster falls back to the config's fixed_k
    out = tmp_path / "centers.json"
    assert main(["cluster", "--config", str(config_path), "--output", str(out)]) == 0
    assert json.loads(out.read_text())["k"] == 2


def test_config_column_mapping(tmp_path, capsys):
    csv_path = tmp_path / "renamed.csv"
    csv_path.write_text(
        "lng,lat,when,what\n"
        "-75.1,40.0,1/2/2010 5:06,Thefts\n"
        "-75.2,40.1,3/4/2011 15:30,Arson\n",
        encoding="utf-8",
    )
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "input_path": str(csv_path),
        "columns": {"x": "lng", "y": "lat", "date": "when", "what": "what"},
    }), encoding="utf-8")
    # bad config key inside columns -> usage error
    assert main(["ingest", "--config", str(config_path)]) == 1

    config_path.write_text(json.dumps({
        "input_path": str(csv_path),
        "columns": {"x": "lng", "y": "lat", "date": "when", "label": "what"},
    }), encoding="utf-8")
    assert main(["ingest", "--config", str(config_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report == {"rows_read": 2, "rows_kept": 2, "drops": {}}


def test_missing_input_everywhere_is_usage_error(capsys):
    assert main(["aggregate", "--granularity", "hour"]) == 1
    assert "--input" in capsys.readouterr().err


def test_featurize_accepts_global_cluster_model(incident_csv, tmp_path):
    centers = tmp_path / "global.json"
    assert main(["cluster", "--input", str(incident_csv), "--k", "2", "--global",
                 "--n-init", "3", "--output", str(centers)]) == 0
    outdir = tmp_path / "features"
    assert main(["featurize", "--input", str(incident_csv), "--centers", str(centers),
                 "--output-dir", str(outdir)]) == 0
    header = (outdir / "features_train.csv").read_text().splitlines()[0]
    assert "NearestClusterDistance" in header


def test_train_invalid_params_json_is_usage_error(incident_csv, tmp_path, capsys):
    outdir = tmp_path / "features"
    main(["featurize", "--input", str(incident_csv), "--output-dir", str(outdir)])
    code = main([
        "train", "--features", str(outdir / "features_train.csv"),
        "--model", "knn", "--params", "{not json", "--output", str(tmp_path / "m.json"),
    ])
    assert code == 1
    assert "params" in capsys.readouterr().err


def test_featurize_split_year(incident_csv, tmp_path):
    outdir = tmp_path / "by_year"
    assert main([
        "featurize", "--input", str(incident_csv), "--split-year", "2014",
        "--output-dir", str(outdir),
    ]) == 0
    train_rows = (outdir / "features_train.csv").read_text().strip().splitlines()
    test_rows = (outdir / "features_test.csv").read_text().strip().splitlines()
    assert len(train_rows) > len(test_rows) > 1


def test_featurize_per_center_distances(incident_csv, tmp_path):
    centers = tmp_path / "centers.json"
    main(["cluster", "--input", str(incident_csv), "--k", "2", "--n-init", "3",
          "--output", str(centers)])
    outdir = tmp_path / "percenter"
    assert main([
        "featurize", "--input", str(incident_csv), "--centers", str(centers),
        "--per-center-distances", "--output-dir", str(outdir),
    ]) == 0
    header = (outdir / "features_train.csv").read_text().splitlines()[0].split(",")
    assert "NearestClusterDistance" in header
    assert "CenterDistance0" in header
    assert "CenterDistance19" in header  # 10 years x k=2
    # flag without centers is a usage error
    assert main([
        "featurize", "--input", str(incident_csv), "--per-center-distances",
        "--output-dir", str(tmp_path / "x"),
    ]) == 1
