"""
Spherical k-means for indexing unlabeled pre-training features into clusters that can be treated like classes.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Tuple

import numpy as np
from sklearn.preprocessing import normalize

from pretraining_data_selection import defaults, input_validation
from pretraining_data_selection.feature_store import LabelMap

logger = logging.getLogger(__name__)

_inertia_tolerance = 1e-9


@dataclass(frozen=True)
class KMeansConfig:
    n_clusters: int = defaults.cluster_count
    max_iters: int = defaults.kmeans_max_iters
    seed: int = 0
    n_init: int = defaults.kmeans_n_init
    min_cluster_size: int = defaults.kmeans_min_cluster_size

    def __post_init__(self):
        input_validation.positive_count(self.n_clusters, "n_clusters")
        input_validation.positive_count(self.max_iters, "max_iters")
        input_validation.integer(self.seed, "seed")
        input_validation.positive_count(self.n_init, "n_init")
        input_validation.positive_count(self.min_cluster_size, "min_cluster_size")


@dataclass(frozen=True)
class KMeansReport:
    """What a clustering run did, in a form that can be written into a run manifest."""

    inertia: float
    iterations: int
    seed: int
    n_init: int
    best_restart: int
    converged: bool
    inertia_history: Tuple[float, ...] = field(default_factory=tuple)

    def to_dict(self):
        report = asdict(self)
        report["inertia_history"] = list(self.inertia_history)
        return report


def _normalised_rows(features):
    norms = np.linalg.norm(features.data, axis=1)
    zero = np.flatnonzero(norms == 0)
    if len(zero) > 0:
        raise ValueError(
            "row {} has zero norm, cosine distance undefined".format(int(zero[0]))
        )
    return normalize(features.data, norm="l2")


def _seed_centres(X, n_clusters, rng):
    # k-means++ with 1 - cos as the distance
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    distance = np.clip(1.0 - X @ X[chosen[0]], 0.0, None)
    distance[chosen[0]] = 0.0
    while len(chosen) < n_clusters:
        total = distance.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=distance / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(remaining))
        chosen.append(nxt)
        distance = np.minimum(distance, np.clip(1.0 - X @ X[nxt], 0.0, None))
        distance[chosen] = 0.0
    return X[chosen].copy()


def _repair(X, labels, own_similarity, centres, n_clusters, min_cluster_size):
    """
    Bring every cluster up to min_cluster_size by pulling in the points that sit farthest from their own centre,
    taken from clusters that can spare them. An empty cluster is re-seeded at the point it receives.

    Returns True when a point was moved into a cluster whose centre was left in place, which is the only kind
    of move that can raise the inertia.
    """
    counts = np.bincount(labels, minlength=n_clusters)
    raised = False
    for cluster in range(n_clusters):
        while counts[cluster] < min_cluster_size:
            donors = counts[labels] > min_cluster_size
            candidates = np.flatnonzero(donors)
            point = int(candidates[np.argmin(own_similarity[candidates])])
            counts[labels[point]] -= 1
            labels[point] = cluster
            if counts[cluster] == 0:
                centres[cluster] = X[point]
            else:
                raised = True
            own_similarity[point] = X[point] @ centres[cluster]
            counts[cluster] += 1
    return raised


def _update_centres(X, labels, centres):
    sums = np.zeros_like(centres)
    np.add.at(sums, labels, X)
    norms = np.linalg.norm(sums, axis=1)
    updated = centres.copy()
    keep = norms == 0
    updated[~keep] = sums[~keep] / norms[~keep][:, None]
    return updated


def _inertia(own_similarity):
    return float(np.sum(np.clip(1.0 - own_similarity, 0.0, None)))


def _single_run(X, cfg, rng):
    centres = _seed_centres(X, cfg.n_clusters, rng)
    rows = np.arange(X.shape[0])
    labels = None
    history = []
    converged = False
    for iteration in range(1, cfg.max_iters + 1):
        similarity = X @ centres.T
        new_labels = np.argmax(similarity, axis=1)
        own_similarity = similarity[rows, new_labels]
        raised = _repair(
            X, new_labels, own_similarity, centres, cfg.n_clusters, cfg.min_cluster_size
        )
        inertia = _inertia(own_similarity)
        if history and not raised:
            assert inertia <= history[-1] + _inertia_tolerance, (
                "inertia increased from {} to {} at iteration {}".format(
                    history[-1], inertia, iteration
                )
            )
        history.append(inertia)
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        centres = _update_centres(X, labels, centres)
    final_inertia = _inertia((X @ centres.T)[rows, labels])
    return labels, final_inertia, iteration, converged, history


def run_spherical_kmeans(features, cfg=KMeansConfig()):
    """
    Cluster feature rows by cosine similarity and keep the best of cfg.n_init seeded restarts.

    Rows are scaled to unit length first. Restart r draws from its own stream spawned from cfg.seed, so a given
    seed always produces the same clustering.

    Args:
        features: FeatureMatrix without zero rows.
        cfg: KMeansConfig

    Returns:
        (LabelMap, KMeansReport)
    """
    if cfg.n_clusters > features.rows:
        raise ValueError(
            "n_clusters {} greater than the number of rows {}".format(
                cfg.n_clusters, features.rows
            )
        )
    if cfg.n_clusters * cfg.min_cluster_size > features.rows:
        raise ValueError(
            "{} clusters of at least {} members need more than {} rows".format(
                cfg.n_clusters, cfg.min_cluster_size, features.rows
            )
        )
    X = _normalised_rows(features)
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_init)

    best = None
    for restart, stream in enumerate(streams):
        rng = np.random.Generator(np.random.Philox(stream))
        labels, inertia, iterations, converged, history = _single_run(X, cfg, rng)
        logger.debug(
            "restart %d: inertia %.6f after %d iterations", restart, inertia, iterations
        )
        if best is None or inertia < best[1]:
            best = (labels, inertia, iterations, converged, history, restart)

    labels, inertia, iterations, converged, history, restart = best
    if not converged:
        logger.warning(
            "best k-means restart stopped at max_iters=%d before the labels settled",
            cfg.max_iters,
        )
    report = KMeansReport(
        inertia=inertia,
        iterations=iterations,
        seed=cfg.seed,
        n_init=cfg.n_init,
        best_restart=restart,
        converged=converged,
        inertia_history=tuple(history),
    )
    return LabelMap(assignments=labels, n_classes=cfg.n_clusters), report


def spherical_kmeans(features, cfg=KMeansConfig()):
    """
    Examples:

    >>> from pretraining_data_selection.feature_store import FeatureMatrix

    >>> fm = FeatureMatrix(data=[[1.0, 0.0], [0.9, 0.1], [-1.0, 0.0], [-0.9, -0.1]])

    >>> labels, inertia = spherical_kmeans(fm, KMeansConfig(n_clusters=2, seed=3))

    >>> bool(labels.assignments[0] == labels.assignments[1] != labels.assignments[2] == labels.assignments[3])
    True

    Returns:
        (LabelMap, inertia) where inertia is the sum over rows of 1 - cos(row, centre of its cluster).
    """
    labels, report = run_spherical_kmeans(features, cfg)
    return labels, report.inertia
