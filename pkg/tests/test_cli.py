import logging

import pandas as pd
import pytest
from fixture_data import planted_directions, same_partition, write_synthetic_dataset

from pretraining_data_selection import feature_store, manifest, selection
from pretraining_data_selection.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, main
from pretraining_data_selection.custom_errors import SinkhornOverflowError


@pytest.fixture
def dataset(tmp_path):
    return write_synthetic_dataset(tmp_path / "data")


def _centroids(paths, out):
    return main(
        ["centroids", "--features", str(paths["features"]), "--labels", str(paths["labels"]), "--out", str(out)]
    )


def _target_centroids(paths, out):
    return main(
        [
            "centroids",
            "--features",
            str(paths["target_features"]),
            "--format",
            "csv",
            "--labels",
            str(paths["target_labels"]),
            "--out",
            str(out),
        ]
    )


def test_centroids_command(dataset, tmp_path):
    out = tmp_path / "pre.csel"
    assert _centroids(dataset, out) == EXIT_OK
    centroids = feature_store.load_centroids(out)
    assert centroids.K == 10
    assert centroids.dims == 8
    run = manifest.read_manifest(manifest.manifest_path(out))
    assert run.results == {"K": 10, "dims": 8}
    assert set(run.input_digests) == {"features", "labels"}


def test_repeated_runs_give_identical_files(dataset, tmp_path):
    first = tmp_path / "first" / "pre.csel"
    second = tmp_path / "second" / "pre.csel"
    first.parent.mkdir()
    second.parent.mkdir()
    assert _centroids(dataset, first) == EXIT_OK
    assert _centroids(dataset, second) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    assert manifest.manifest_path(first).read_bytes() == manifest.manifest_path(second).read_bytes()


def test_missing_labels_file(dataset, tmp_path, caplog):
    missing = tmp_path / "nowhere.csv"
    with caplog.at_level(logging.ERROR):
        code = main(
            ["centroids", "--features", str(dataset["features"]), "--labels", str(missing), "--out", str(tmp_path / "c.csel")]
        )
    assert code == EXIT_INVALID
    assert str(missing) in caplog.text


def test_cluster_command_recovers_directions(dataset, tmp_path):
    out = tmp_path / "labels.csv"
    args = ["cluster", "--features", str(dataset["directions"]), "--k", "3", "--seed", "1", "--out", str(out)]
    assert main(args) == EXIT_OK
    _, truth = planted_directions(seed=0)
    labels = feature_store.load_labels(out)
    assert same_partition(labels.assignments, truth)
    first = out.read_bytes()
    assert main(args) == EXIT_OK
    assert out.read_bytes() == first
    assert manifest.read_manifest(manifest.manifest_path(out)).seed == 1


def test_cluster_with_too_many_clusters(dataset, tmp_path):
    code = main(["cluster", "--features", str(dataset["directions"]), "--k", "31", "--out", str(tmp_path / "l.csv")])
    assert code == EXIT_INVALID


@pytest.mark.parametrize("method", ["uot", "greedy_ot"])
def test_select_finds_target_classes(dataset, tmp_path, method):
    pre = tmp_path / "pre.csel"
    target = tmp_path / "target.csel"
    out = tmp_path / "selection.csv"
    assert _centroids(dataset, pre) == EXIT_OK
    assert _target_centroids(dataset, target) == EXIT_OK
    code = main(
        ["select", "--method", method, "--pre", str(pre), "--target", str(target), "--k", "3", "--out", str(out)]
    )
    assert code == EXIT_OK
    assert sorted(selection.load_selection(out).selected) == [2, 5, 7]
    run = manifest.read_manifest(manifest.manifest_path(out))
    assert run.parameters["metric"] == ("cosine" if method == "uot" else "l2")
    assert set(run.input_digests) == {"pre", "target"}


def test_select_random_matches_library(dataset, tmp_path):
    pre = tmp_path / "pre.csel"
    out = tmp_path / "selection.csv"
    assert _centroids(dataset, pre) == EXIT_OK
    code = main(["select", "--method", "random", "--pre", str(pre), "--k", "3", "--seed", "7", "--out", str(out)])
    assert code == EXIT_OK
    assert selection.load_selection(out).selected == selection.select_random(10, 3, 7).selected
    assert manifest.read_manifest(manifest.manifest_path(out)).seed == 7


def test_select_by_label_then_recall(dataset, tmp_path, capsys):
    pre = tmp_path / "pre.csel"
    out = tmp_path / "selection.csv"
    assert _centroids(dataset, pre) == EXIT_OK
    code = main(["select", "--method", "label", "--pre", str(pre), "--classes", "2,5,9", "--out", str(out)])
    assert code == EXIT_OK
    assert selection.load_selection(out).selected == (2, 5, 9)
    capsys.readouterr()
    code = main(["recall", "--selection", str(out), "--relevant", str(dataset["relevant"]), "--top-k", "3"])
    assert code == EXIT_OK
    assert capsys.readouterr().out.strip() == "recall=0.6667 top_k=3 relevant=3"


def test_select_uot_needs_target(dataset, tmp_path):
    pre = tmp_path / "pre.csel"
    assert _centroids(dataset, pre) == EXIT_OK
    code = main(["select", "--method", "uot", "--pre", str(pre), "--out", str(tmp_path / "s.csv")])
    assert code == EXIT_INVALID


def test_recall_with_empty_relevant_file(dataset, tmp_path):
    pre = tmp_path / "pre.csel"
    out = tmp_path / "selection.csv"
    relevant = tmp_path / "relevant.csv"
    relevant.write_text("class_index\n")
    assert _centroids(dataset, pre) == EXIT_OK
    assert main(["select", "--method", "label", "--pre", str(pre), "--classes", "1", "--out", str(out)]) == EXIT_OK
    code = main(["recall", "--selection", str(out), "--relevant", str(relevant), "--top-k", "1"])
    assert code == EXIT_INVALID


def _write_config(path, extra=""):
    path.write_text("dims = 4\nmu = 0.5\nL = 2.0\nn = 50, 100\nseeds = 0:3\npretrain_steps = 200\n" + extra)
    return path


def test_simulate_small_sweep(tmp_path, capsys):
    config = _write_config(tmp_path / "sweep.cfg")
    out = tmp_path / "sweep.csv"
    assert main(["simulate", "--config", str(config), "--out", str(out)]) == EXIT_OK
    results = pd.read_csv(out)
    assert len(results) == 6
    assert capsys.readouterr().out.startswith("points=2 runs=6 within_bound=")
    run = manifest.read_manifest(manifest.manifest_path(out))
    assert run.parameters["n"] == [50, 100]
    assert run.results["points"] == 2


def test_simulate_bundled_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["simulate", "--out", str(out)]) == EXIT_OK
    assert len(pd.read_csv(out)) == 160


def test_simulate_unknown_key(tmp_path, caplog):
    config = _write_config(tmp_path / "sweep.cfg", "beta = 1\n")
    with caplog.at_level(logging.ERROR):
        code = main(["simulate", "--config", str(config), "--out", str(tmp_path / "sweep.csv")])
    assert code == EXIT_INVALID
    assert "beta" in caplog.text


def test_simulate_divergence(tmp_path):
    config = _write_config(tmp_path / "sweep.cfg", "eta = 10\n")
    code = main(["simulate", "--config", str(config), "--out", str(tmp_path / "sweep.csv")])
    assert code == EXIT_NUMERICAL


def test_bad_arguments():
    assert main(["select", "--method", "nearest"]) == EXIT_INVALID


def _cluster_select_recall(dataset, directory):
    directory.mkdir()
    labels = directory / "clusters.csv"
    pre = directory / "pre.csel"
    target = directory / "target.csel"
    out = directory / "selection.csv"
    commands = [
        ["cluster", "--features", str(dataset["features"]), "--k", "10", "--seed", "3", "--out", str(labels)],
        ["centroids", "--features", str(dataset["features"]), "--labels", str(labels), "--out", str(pre)],
        [
            "centroids",
            "--features",
            str(dataset["target_features"]),
            "--format",
            "csv",
            "--labels",
            str(dataset["target_labels"]),
            "--out",
            str(target),
        ],
        ["select", "--method", "uot", "--pre", str(pre), "--target", str(target), "--k", "3", "--out", str(out)],
        ["recall", "--selection", str(out), "--relevant", str(dataset["relevant"]), "--top-k", "3"],
    ]
    for command in commands:
        assert main(command) == EXIT_OK
    return [labels, pre, out]


def test_cluster_to_recall_pipeline_is_reproducible(dataset, tmp_path, capsys):
    first = _cluster_select_recall(dataset, tmp_path / "first")
    first_recall = capsys.readouterr().out
    second = _cluster_select_recall(dataset, tmp_path / "second")
    assert capsys.readouterr().out == first_recall
    assert first_recall.startswith("recall=")
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()
        assert manifest.manifest_path(a).read_bytes() == manifest.manifest_path(b).read_bytes()


def test_select_reports_solver_overflow(dataset, tmp_path, mocker, caplog):
    pre = tmp_path / "pre.csel"
    target = tmp_path / "target.csel"
    out = tmp_path / "selection.csv"
    assert _centroids(dataset, pre) == EXIT_OK
    assert _target_centroids(dataset, target) == EXIT_OK
    solver = mocker.patch(
        "pretraining_data_selection.ot_core.sinkhorn_unbalanced",
        side_effect=SinkhornOverflowError("potentials became non-finite"),
    )
    with caplog.at_level(logging.ERROR):
        code = main(["select", "--method", "uot", "--pre", str(pre), "--target", str(target), "--out", str(out)])
    assert code == EXIT_NUMERICAL
    solver.assert_called_once()
    assert "potentials became non-finite" in caplog.text
    assert not out.exists()
