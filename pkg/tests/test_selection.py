import numpy as np
import pandas as pd
import pytest
from defaults import planted_k, selection_epsilon_c, selection_params
from fixture_data import planted_copy_centroids, random_centroids

from pretraining_data_selection import selection
from pretraining_data_selection.feature_store import CentroidSet
from pretraining_data_selection.selection import RecallSpec, SelectionResult


def test_uot_with_k_at_least_class_count_ranks_every_class():
    pre = random_centroids(6, 4, seed=0)
    target = random_centroids(2, 4, seed=1)
    result = selection.select_uot(pre, target, selection_params, "cosine", selection_epsilon_c, k=10)
    assert sorted(result.selected) == list(range(6))
    scores = result.transport_plan.row_marginal
    assert list(result.scores) == sorted(scores, reverse=True)
    assert result.method == "uot"
    assert result.k_requested == 10


@pytest.mark.parametrize("seed", range(3))
def test_uot_selects_planted_copies(seed):
    pre, target, planted = planted_copy_centroids(seed)
    result = selection.select_uot(
        pre, target, selection_params, "cosine", selection_epsilon_c, k=planted_k
    )
    assert sorted(result.selected) == planted
    assert selection.recall_rate(result, RecallSpec(relevant=planted, top_k=planted_k)) == 1.0


@pytest.mark.parametrize("seed", range(3))
def test_greedy_ot_selects_planted_copies(seed):
    pre, target, planted = planted_copy_centroids(seed)
    for metric in ["l2", "cosine"]:
        result = selection.select_greedy_ot(pre, target, metric, k=planted_k)
        assert sorted(result.selected) == planted


def test_identical_centroids_tie_to_lower_index():
    pre = CentroidSet(centroids=[[0.0, 1.0], [1.0, 0.2], [1.0, 0.2]])
    target = CentroidSet(centroids=[[1.0, 0.0]])
    result = selection.select_uot(pre, target, k=3)
    assert result.selected[:2] == (1, 2)


def test_uot_ranking_follows_class_permutation():
    pre, target, _ = planted_copy_centroids(seed=4)
    order = np.random.Generator(np.random.Philox(0)).permutation(pre.K)
    permuted = CentroidSet(centroids=pre.centroids[order])
    result = selection.select_uot(pre, target, k=pre.K)
    permuted_result = selection.select_uot(permuted, target, k=pre.K)
    np.testing.assert_allclose(
        permuted_result.transport_plan.row_marginal,
        result.transport_plan.row_marginal[order],
        rtol=1e-9,
    )
    top = [int(order[j]) for j in permuted_result.selected[:planted_k]]
    assert sorted(top) == sorted(result.selected[:planted_k])


def test_greedy_single_target_ranks_by_distance():
    pre = CentroidSet(centroids=[[5.0, 0.0], [1.0, 0.0], [3.0, 0.0], [0.5, 0.5]])
    target = CentroidSet(centroids=[[0.0, 0.0]])
    result = selection.select_greedy_ot(pre, target, "l2", k=4)
    assert result.selected == (3, 1, 2, 0)


def test_greedy_equidistant_classes_ordered_by_index():
    pre = CentroidSet(centroids=[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    target = CentroidSet(centroids=[[0.0, 0.0]])
    result = selection.select_greedy_ot(pre, target, "l2", k=4)
    assert result.selected == (0, 1, 2, 3)
    assert len(set(result.scores)) == 1


def test_greedy_default_bandwidth_is_mean_distance():
    pre = CentroidSet(centroids=[[1.0, 0.0], [3.0, 0.0]])
    target = CentroidSet(centroids=[[0.0, 0.0]])
    scores, gamma = selection.greedy_ot_scores(pre, target, "l2")
    assert gamma == 2.0
    np.testing.assert_allclose(scores, np.exp([-0.5, -1.5]))


def test_greedy_rejects_dimension_mismatch():
    with pytest.raises(ValueError, match="dims"):
        selection.select_greedy_ot(random_centroids(2, 3, 0), random_centroids(2, 4, 1), k=1)


def test_random_with_k_equal_to_class_count():
    assert selection.select_random(10, 10, seed=3).selected == tuple(range(10))


def test_random_is_reproducible():
    first = selection.select_random(10, 3, seed=7)
    second = selection.select_random(10, 3, seed=7)
    assert first.selected == second.selected
    assert list(first.selected) == sorted(first.selected)
    assert first.scores is None


def test_random_selection_is_uniform():
    counts = np.zeros(10)
    for seed in range(10000):
        counts[list(selection.select_random(10, 3, seed).selected)] += 1
    np.testing.assert_allclose(counts / 10000, 0.3, atol=0.02)


def test_random_rejects_k_above_class_count():
    with pytest.raises(ValueError, match="k 11 greater than the number of classes 10"):
        selection.select_random(10, 11, seed=0)


def test_random_recall_on_planted_fixture():
    _, _, planted = planted_copy_centroids(seed=0)
    spec = RecallSpec(relevant=planted, top_k=planted_k)
    recalls = [
        selection.recall_rate(selection.select_random(20, planted_k, seed), spec)
        for seed in range(2000)
    ]
    assert np.mean(recalls) == pytest.approx(0.25, abs=0.05)


def test_label_selection_keeps_given_order():
    result = selection.select_by_label([3, 1, 7], 10)
    assert result.selected == (3, 1, 7)
    assert result.method == "label"


def test_label_selection_rejects_empty_list():
    with pytest.raises(ValueError, match="classes is empty."):
        selection.select_by_label([], 10)


def test_label_selection_rejects_duplicates():
    with pytest.raises(ValueError, match="classes contains duplicate index 1."):
        selection.select_by_label([1, 1], 10)


def test_recall_when_relevant_inside_top_k():
    result = selection.select_by_label([4, 2, 9, 0], 10)
    assert selection.recall_rate(result, RecallSpec(relevant={2, 4}, top_k=2)) == 1.0


def test_recall_when_nothing_relevant_selected():
    result = selection.select_by_label([4, 2], 10)
    assert selection.recall_rate(result, RecallSpec(relevant={5}, top_k=2)) == 0.0


def test_recall_fifty_eight_of_fifty_nine():
    result = selection.select_by_label(list(range(100)), 1000)
    relevant = set(range(1, 59)) | {700}
    assert round(selection.recall_rate(result, RecallSpec(relevant=relevant)), 4) == 0.9831


def test_recall_non_decreasing_in_top_k():
    pre, target, planted = planted_copy_centroids(seed=1)
    result = selection.select_greedy_ot(pre, target, k=pre.K)
    recalls = [
        selection.recall_rate(result, RecallSpec(relevant=planted, top_k=top_k))
        for top_k in range(1, pre.K + 1)
    ]
    assert all(a <= b for a, b in zip(recalls, recalls[1:]))


def test_recall_top_k_beyond_selection():
    result = selection.select_by_label([1, 2], 10)
    with pytest.raises(ValueError, match="top_k 3 exceeds the 2 selected classes"):
        selection.recall_rate(result, RecallSpec(relevant={1}, top_k=3))


def test_recall_spec_rejects_empty_relevant_set():
    with pytest.raises(ValueError, match="relevant set is empty."):
        RecallSpec(relevant=set())


def test_selection_result_rejects_out_of_range_index():
    with pytest.raises(ValueError, match="selected index 4 not in the range"):
        SelectionResult(method="label", selected=(4,), scores=None, k_requested=1, n_classes=4)


def test_selected_member_count():
    centroids = CentroidSet(centroids=np.eye(3), member_counts=[5, 7, 11])
    result = selection.select_by_label([2, 0], 3)
    assert selection.selected_member_count(result, centroids) == 16


def test_recall_by_epsilon_c_frame():
    pre, target, planted = planted_copy_centroids(seed=2)
    recalls = selection.recall_by_epsilon_c(
        pre, target, planted, [0.01, 0.1, 1.0], selection_params, k=planted_k
    )
    assert list(recalls.columns) == ["EPSILON_C", "RECALL"]
    assert list(recalls["EPSILON_C"]) == [0.01, 0.1, 1.0]
    assert recalls["RECALL"].iloc[0] == 1.0


def test_compare_methods_on_planted_fixture():
    pre, target, planted = planted_copy_centroids(seed=0)
    comparison = selection.compare_methods(pre, target, planted, selection_params, k=planted_k)
    expected = pd.DataFrame(
        {
            "METHOD": ["uot", "uot", "greedy_ot", "greedy_ot"],
            "METRIC": ["cosine", "l2", "cosine", "l2"],
            "RECALL": [1.0, 1.0, 1.0, 1.0],
        }
    )
    pd.testing.assert_frame_equal(comparison, expected)


def test_selection_file_round_trip(tmp_path):
    pre, target, _ = planted_copy_centroids(seed=0)
    result = selection.select_uot(pre, target, k=3)
    path = tmp_path / "selection.csv"
    selection.save_selection(result, path)
    with open(path) as f:
        header = f.readline()
    assert header.startswith("# method=uot k_requested=3 n_classes=20 ")
    assert "converged=true" in header
    loaded = selection.load_selection(path)
    assert loaded.selected == result.selected
    assert loaded.scores == result.scores
    assert loaded.parameters["tau2"] == 100.0
    assert loaded.parameters["converged"] is True


def test_label_selection_file_has_blank_scores(tmp_path):
    path = tmp_path / "selection.csv"
    selection.save_selection(selection.select_by_label([2, 5, 9], 10), path)
    frame = pd.read_csv(path, skiprows=1, keep_default_na=False, dtype=str)
    assert list(frame["score"]) == ["", "", ""]
    assert selection.load_selection(path).scores is None


def test_load_relevant(tmp_path):
    path = tmp_path / "relevant.csv"
    path.write_text("class_index\n3\n1\n")
    assert selection.load_relevant(path) == frozenset({1, 3})
