"""
Strategies for choosing which pre-training classes or clusters to reuse during fine-tuning, and the recall rate
used to judge a ranking against a known set of relevant classes.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from pretraining_data_selection import defaults, input_validation, ot_core

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectionResult:
    """
    Attributes:
        method: one of 'random', 'label', 'greedy_ot' or 'uot'.
        selected: pre-training class indices, best first.
        scores: similarity score of each selected class, None for random and label selection.
        k_requested: number of classes asked for.
        n_classes: number of pre-training classes the selection was made from.
        parameters: settings used, recorded in output file headers.
        transport_plan: the solved plan for uot selection.
    """

    method: str
    selected: Tuple[int, ...]
    scores: Optional[Tuple[float, ...]]
    k_requested: int
    n_classes: int
    parameters: dict = field(default_factory=dict)
    transport_plan: Optional[ot_core.TransportPlan] = None

    def __post_init__(self):
        input_validation.value_in_expected_set(
            self.method, defaults.selection_methods, "method"
        )
        selected = tuple(int(i) for i in self.selected)
        input_validation.distinct_indices_in_range(list(selected), self.n_classes, "selected")
        object.__setattr__(self, "selected", selected)
        if self.scores is not None:
            scores = tuple(float(s) for s in self.scores)
            if len(scores) != len(selected):
                raise ValueError("scores must have one entry per selected class")
            assert all(a >= b for a, b in zip(scores, scores[1:]))
            object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class RecallSpec:
    relevant: frozenset
    top_k: int = defaults.classes_to_select

    def __post_init__(self):
        relevant = frozenset(int(i) for i in self.relevant)
        if len(relevant) == 0:
            raise ValueError("relevant set is empty.")
        input_validation.positive_count(self.top_k, "top_k")
        object.__setattr__(self, "relevant", relevant)


def _rank(scores, k):
    # descending score, ties to the lower index
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[: min(k, len(scores))]


def select_uot(
    pre,
    target,
    params=ot_core.UotParams(),
    metric=defaults.uot_metric,
    epsilon_c=defaults.epsilon_c,
    k=defaults.classes_to_select,
):
    """
    Rank pre-training classes by how much mass the unbalanced transport plan sends from them to the target
    classes, [P1]_j, and keep the top k.

    Both measures carry unit mass on every centroid. A plan that did not converge is still ranked, and the
    solver logs a warning.

    Examples:

    >>> from pretraining_data_selection.feature_store import CentroidSet

    >>> pre = CentroidSet(centroids=[[0.0, 1.0], [1.0, 0.0], [1.0, 0.1]])

    >>> target = CentroidSet(centroids=[[1.0, 0.0]])

    >>> select_uot(pre, target, k=2).selected
    (1, 2)

    Args:
        pre: CentroidSet of pre-training classes or clusters.
        target: CentroidSet of target classes.
        params: UotParams
        metric: cost metric, 'cosine' or 'l2'.
        epsilon_c: scale of the cosine cost.
        k: number of classes to select.

    Returns:
        SelectionResult with scores [P1]_j and the transport plan attached.
    """
    input_validation.positive_count(k, "k")
    cost = ot_core.build_cost(pre, target, metric, epsilon_c)
    plan = ot_core.sinkhorn_unbalanced(cost, pre.masses, target.masses, params)
    scores = plan.row_marginal
    chosen = _rank(scores, k)
    return SelectionResult(
        method="uot",
        selected=tuple(chosen),
        scores=tuple(scores[chosen]),
        k_requested=k,
        n_classes=pre.K,
        parameters={
            "epsilon": params.epsilon,
            "tau1": params.tau1,
            "tau2": params.tau2,
            "metric": metric,
            "epsilon_c": epsilon_c,
            "converged": plan.converged,
        },
        transport_plan=plan,
    )


def greedy_ot_scores(pre, target, metric=defaults.greedy_ot_metric, gamma=None):
    """
    Per pre-training class similarity s_j = sum_i exp(-d(b_j, a_i) / gamma), summed over target classes.

    Every class is scored on its own, with no coupling between classes. Under the cosine metric d is 1 - cos
    without the epsilon_c scaling. gamma defaults to the mean distance between pre-training and target
    centroids, or 1 if that mean is zero.

    Returns:
        (scores, gamma)
    """
    input_validation.value_in_expected_set(metric, defaults.metrics, "metric")
    if pre.dims != target.dims:
        raise ValueError(
            "pre-training centroids have {} dims but target centroids have {}".format(
                pre.dims, target.dims
            )
        )
    if metric == "cosine":
        distance = ot_core.build_cost(pre, target, "cosine", 1.0).entries
    else:
        distance = cdist(pre.centroids, target.centroids, metric="euclidean")
    if gamma is None:
        gamma = float(distance.mean())
        if gamma == 0:
            gamma = 1.0
    input_validation.positive_real(gamma, "gamma")
    return np.exp(-distance / gamma).sum(axis=1), gamma


def select_greedy_ot(
    pre, target, metric=defaults.greedy_ot_metric, k=defaults.classes_to_select, gamma=None
):
    """
    Examples:

    >>> from pretraining_data_selection.feature_store import CentroidSet

    >>> pre = CentroidSet(centroids=[[5.0, 0.0], [1.0, 0.0], [3.0, 0.0]])

    >>> target = CentroidSet(centroids=[[0.0, 0.0]])

    >>> select_greedy_ot(pre, target, k=3).selected
    (1, 2, 0)
    """
    input_validation.positive_count(k, "k")
    scores, gamma = greedy_ot_scores(pre, target, metric, gamma)
    chosen = _rank(scores, k)
    return SelectionResult(
        method="greedy_ot",
        selected=tuple(chosen),
        scores=tuple(scores[chosen]),
        k_requested=k,
        n_classes=pre.K,
        parameters={"metric": metric, "gamma": gamma},
    )


def select_random(n_classes, k, seed):
    """
    Uniform sample of k classes without replacement, returned in ascending order.

    Examples:

    >>> select_random(5, 5, seed=1).selected
    (0, 1, 2, 3, 4)
    """
    input_validation.positive_count(n_classes, "n_classes")
    input_validation.positive_count(k, "k")
    input_validation.integer(seed, "seed")
    if k > n_classes:
        raise ValueError(
            "k {} greater than the number of classes {}".format(k, n_classes)
        )
    rng = np.random.Generator(np.random.Philox(seed))
    chosen = np.sort(rng.choice(n_classes, size=k, replace=False))
    return SelectionResult(
        method="random",
        selected=tuple(chosen),
        scores=None,
        k_requested=k,
        n_classes=n_classes,
        parameters={"seed": seed},
    )


def select_by_label(overlap, n_classes):
    """
    Wrap a hand-picked list of pre-training classes, for example those sharing a label with the target task.

    Examples:

    >>> select_by_label([3, 1, 7], 10).selected
    (3, 1, 7)

    >>> select_by_label([3, 12], 10)
    Traceback (most recent call last):
     ...
    ValueError: classes index 12 not in the range [0, 10).
    """
    overlap = list(overlap)
    input_validation.distinct_indices_in_range(overlap, n_classes, "classes")
    return SelectionResult(
        method="label",
        selected=tuple(overlap),
        scores=None,
        k_requested=len(overlap),
        n_classes=n_classes,
    )


def recall_rate(result, spec):
    """
    Fraction of the relevant classes found among the first top_k selected classes.

    Examples:

    >>> result = select_by_label(list(range(100)), 1000)

    >>> spec = RecallSpec(relevant=set(range(1, 59)) | {500}, top_k=100)

    >>> round(recall_rate(result, spec), 4)
    0.9831

    Args:
        result: SelectionResult
        spec: RecallSpec

    Returns:
        float in [0, 1]
    """
    if spec.top_k > len(result.selected) and len(result.selected) < result.n_classes:
        raise ValueError(
            "top_k {} exceeds the {} selected classes".format(
                spec.top_k, len(result.selected)
            )
        )
    hits = spec.relevant.intersection(result.selected[: spec.top_k])
    return len(hits) / len(spec.relevant)


def selected_member_count(result, centroids):
    """Number of underlying samples (images) behind the selected pre-training classes."""
    if centroids.K != result.n_classes:
        raise ValueError(
            "selection made from {} classes but centroid set has {}".format(
                result.n_classes, centroids.K
            )
        )
    return int(centroids.member_counts[list(result.selected)].sum())


def recall_by_epsilon_c(
    pre,
    target,
    relevant,
    epsilon_cs,
    params=ot_core.UotParams(),
    k=defaults.classes_to_select,
):
    """
    Recall of UOT selection as the cosine cost scale changes.

    Returns:
        pd.DataFrame with columns EPSILON_C and RECALL, one row per scale in the order given.
    """
    spec = RecallSpec(relevant=relevant, top_k=k)
    recalls = []
    for epsilon_c in epsilon_cs:
        result = select_uot(pre, target, params, "cosine", epsilon_c, k)
        recalls.append(recall_rate(result, _clip_spec(spec, result)))
    return pd.DataFrame({"EPSILON_C": list(epsilon_cs), "RECALL": recalls})


def compare_methods(
    pre, target, relevant, params=ot_core.UotParams(), k=defaults.classes_to_select
):
    """
    Recall of UOT and Greedy-OT selection under both cost metrics.

    Examples:

    >>> from pretraining_data_selection.feature_store import CentroidSet

    >>> pre = CentroidSet(centroids=[[0.0, 1.0], [1.0, 0.0], [1.0, 0.1]])

    >>> target = CentroidSet(centroids=[[1.0, 0.0]])

    >>> compare_methods(pre, target, {1}, k=1)
          METHOD  METRIC  RECALL
    0        uot  cosine     1.0
    1        uot      l2     1.0
    2  greedy_ot  cosine     1.0
    3  greedy_ot      l2     1.0

    Returns:
        pd.DataFrame with columns METHOD, METRIC and RECALL.
    """
    spec = RecallSpec(relevant=relevant, top_k=k)
    rows = []
    for metric in defaults.metrics:
        result = select_uot(pre, target, params, metric, defaults.epsilon_c, k)
        rows.append(("uot", metric, recall_rate(result, _clip_spec(spec, result))))
    for metric in defaults.metrics:
        result = select_greedy_ot(pre, target, metric, k)
        rows.append(("greedy_ot", metric, recall_rate(result, _clip_spec(spec, result))))
    return pd.DataFrame(rows, columns=["METHOD", "METRIC", "RECALL"])


def _clip_spec(spec, result):
    return RecallSpec(relevant=spec.relevant, top_k=min(spec.top_k, len(result.selected)))


def selection_to_frame(result):
    """Ranked selection with columns rank (from 1), class_index and score, the score left blank when absent."""
    scores = [""] * len(result.selected) if result.scores is None else list(result.scores)
    return pd.DataFrame(
        {
            "rank": np.arange(1, len(result.selected) + 1),
            "class_index": list(result.selected),
            "score": scores,
        }
    )


def _header_tokens(result):
    tokens = {
        "method": result.method,
        "k_requested": result.k_requested,
        "n_classes": result.n_classes,
    }
    tokens.update(result.parameters)
    formatted = []
    for key, value in tokens.items():
        if isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, float):
            value = defaults.float_format % value
        formatted.append("{}={}".format(key, value))
    return " ".join(formatted)


def save_selection(result, path):
    with open(path, "w", newline="") as f:
        f.write("# {}\n".format(_header_tokens(result)))
        selection_to_frame(result).to_csv(
            f, index=False, float_format=defaults.float_format
        )


def _parse_header_value(text):
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_selection(path):
    """Read a selection file written by save_selection back into a SelectionResult (without a transport plan)."""
    with open(path) as f:
        header = f.readline()
    if not header.startswith("#"):
        raise ValueError("selection file {} has no header line".format(path))
    tokens = {}
    for token in header[1:].split():
        key, _, value = token.partition("=")
        tokens[key] = _parse_header_value(value)
    for key in ["method", "k_requested", "n_classes"]:
        if key not in tokens:
            raise ValueError("selection file header is missing {}".format(key))
    frame = pd.read_csv(
        path, skiprows=1, dtype={"score": str}, keep_default_na=False
    )
    if list(frame.columns) != ["rank", "class_index", "score"]:
        raise ValueError("selection file columns must be rank,class_index,score")
    if list(frame["rank"]) != list(range(1, len(frame) + 1)):
        raise ValueError("selection file ranks must run 1, 2, ...")
    scores = None
    if (frame["score"] != "").all() and len(frame) > 0:
        scores = tuple(float(s) for s in frame["score"])
    method = tokens.pop("method")
    k_requested = tokens.pop("k_requested")
    n_classes = tokens.pop("n_classes")
    return SelectionResult(
        method=method,
        selected=tuple(int(i) for i in frame["class_index"]),
        scores=scores,
        k_requested=k_requested,
        n_classes=n_classes,
        parameters=tokens,
    )


def load_relevant(path):
    """Read a CSV with header class_index listing the relevant pre-training classes."""
    input_validation.file_exists(path, "relevant")
    frame = pd.read_csv(path)
    if list(frame.columns) != ["class_index"]:
        raise ValueError("relevant file header must be class_index")
    return frozenset(int(i) for i in frame["class_index"])
