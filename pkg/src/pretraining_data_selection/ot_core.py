"""
Cost matrices and entropic optimal transport solvers used to measure how close each pre-training class is to a
target dataset.

Rows of every matrix index pre-training classes/clusters and columns index target classes.
"""
import logging
from dataclasses import dataclass

import numpy as np
import ot
import pandas as pd
from scipy.spatial.distance import cdist
from scipy.special import logsumexp, rel_entr, xlogy

from pretraining_data_selection import defaults, input_validation
from pretraining_data_selection.custom_errors import SinkhornOverflowError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise cost between pre-training centroids (rows) and target centroids (columns).

    Attributes:
        entries: K_g x K_f array of finite non-negative costs.
        metric: 'cosine' or 'l2'.
        epsilon_c: scale the cosine distance was divided by, kept for l2 for the record only.
    """

    entries: np.ndarray
    metric: str = defaults.uot_metric
    epsilon_c: float = defaults.epsilon_c

    def __post_init__(self):
        input_validation.value_in_expected_set(self.metric, defaults.metrics, "metric")
        input_validation.positive_real(self.epsilon_c, "epsilon_c")
        entries = np.array(self.entries, dtype=np.float64)
        if entries.ndim != 2 or 0 in entries.shape:
            raise ValueError("cost entries must be a non-empty matrix")
        if not np.isfinite(entries).all() or (entries < 0).any():
            raise ValueError("cost entries not all finite and non-negative")
        if self.metric == "cosine" and (entries > defaults.max_cosine_cost(self.epsilon_c)).any():
            raise ValueError("cosine cost entries exceed 2 / epsilon_c")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]


@dataclass(frozen=True)
class UotParams:
    """Entropy weight, marginal relaxation weights and stopping controls of the scaling iteration."""

    epsilon: float = defaults.epsilon
    tau1: float = defaults.tau1
    tau2: float = defaults.tau2
    max_iters: int = defaults.sinkhorn_max_iters
    tol: float = defaults.sinkhorn_tol

    def __post_init__(self):
        input_validation.positive_real(self.epsilon, "epsilon")
        input_validation.positive_real(self.tau1, "tau1")
        input_validation.positive_real(self.tau2, "tau2")
        input_validation.positive_count(self.max_iters, "max_iters")
        input_validation.positive_real(self.tol, "tol")


@dataclass(frozen=True)
class TransportPlan:
    P: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    objective: float
    iterations_used: int
    converged: bool


def build_cost(pre, target, metric=defaults.uot_metric, epsilon_c=defaults.epsilon_c):
    """
    Cost of moving mass between every pre-training centroid and every target centroid.

    Under the cosine metric the entry is (1 - cos(b_j, a_i)) / epsilon_c, under l2 it is the unscaled euclidean
    distance.

    Examples:

    >>> from pretraining_data_selection.feature_store import CentroidSet

    >>> pre = CentroidSet(centroids=[[1.0, 0.0], [0.0, 1.0]])

    >>> target = CentroidSet(centroids=[[1.0, 0.0]])

    >>> build_cost(pre, target, 'cosine', 0.01).entries
    array([[  0.],
           [100.]])

    >>> build_cost(CentroidSet(centroids=[[0.0, 0.0]]), CentroidSet(centroids=[[3.0, 4.0]]), 'l2').entries
    array([[5.]])

    Args:
        pre: CentroidSet of the pre-training data, K_g centroids.
        target: CentroidSet of the target data, K_f centroids.
        metric: 'cosine' or 'l2'.
        epsilon_c: positive scale applied to the cosine distance.

    Returns:
        CostMatrix of shape K_g x K_f.
    """
    input_validation.value_in_expected_set(metric, defaults.metrics, "metric")
    input_validation.positive_real(epsilon_c, "epsilon_c")
    if pre.dims != target.dims:
        raise ValueError(
            "pre-training centroids have {} dims but target centroids have {}".format(
                pre.dims, target.dims
            )
        )
    if metric == "cosine":
        for name, centroid_set in [("pre", pre), ("target", target)]:
            zero = np.flatnonzero(np.linalg.norm(centroid_set.centroids, axis=1) == 0)
            if len(zero) > 0:
                raise ValueError(
                    "{} centroid {} has zero norm, cosine cost undefined".format(
                        name, int(zero[0])
                    )
                )
        distance = cdist(pre.centroids, target.centroids, metric="cosine")
        entries = np.clip(distance, 0.0, defaults.max_cosine_distance) / epsilon_c
    else:
        entries = cdist(pre.centroids, target.centroids, metric="euclidean")
    return CostMatrix(entries=entries, metric=metric, epsilon_c=epsilon_c)


def _check_masses(cost, w_g, w_f):
    w_g = np.asarray(w_g, dtype=np.float64)
    w_f = np.asarray(w_f, dtype=np.float64)
    input_validation.masses_positive(w_g, "w_g")
    input_validation.masses_positive(w_f, "w_f")
    if w_g.shape != (cost.rows,) or w_f.shape != (cost.cols,):
        raise ValueError(
            "masses of length {} and {} do not match a {} x {} cost matrix".format(
                len(w_g), len(w_f), cost.rows, cost.cols
            )
        )
    return w_g, w_f


def _entropic_cost(P, entries, epsilon):
    # <P, C> - epsilon * h(P) with h(P) = -sum P (log P - 1) and 0 log 0 = 0
    return float(np.sum(P * entries) + epsilon * np.sum(xlogy(P, P) - P))


def _kl(x, y):
    return float(np.sum(rel_entr(x, y) - x + y))


def uot_objective(plan, cost, w_g, w_f, params):
    """
    <P, C> - epsilon h(P) + tau1 KL(P1, w_g) + tau2 KL(P^T 1, w_f), with KL carrying the mass difference terms.

    Examples:

    >>> cost = CostMatrix(entries=[[1.0, 2.0], [3.0, 4.0]], metric='l2')

    >>> uot_objective(np.zeros((2, 2)), cost, [1.0, 1.0], [1.0, 1.0], UotParams(tau1=1.0, tau2=100.0))
    202.0

    Args:
        plan: TransportPlan or K_g x K_f array.
        cost: CostMatrix
        w_g: pre-training masses.
        w_f: target masses.
        params: UotParams

    Returns:
        float
    """
    P = plan.P if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    if P.shape != cost.entries.shape:
        raise ValueError(
            "plan shape {} does not match cost shape {}".format(P.shape, cost.entries.shape)
        )
    w_g, w_f = _check_masses(cost, w_g, w_f)
    return (
        _entropic_cost(P, cost.entries, params.epsilon)
        + params.tau1 * _kl(P.sum(axis=1), w_g)
        + params.tau2 * _kl(P.sum(axis=0), w_f)
    )


def _finish_plan(log_P, objective_fn, iterations, converged):
    P = np.exp(log_P)
    if not np.isfinite(P).all():
        raise SinkhornOverflowError("transport plan has non-finite entries")
    P.setflags(write=False)
    row_marginal = P.sum(axis=1)
    col_marginal = P.sum(axis=0)
    return TransportPlan(
        P=P,
        row_marginal=row_marginal,
        col_marginal=col_marginal,
        objective=objective_fn(P),
        iterations_used=iterations,
        converged=converged,
    )


def sinkhorn_unbalanced(cost, w_g, w_f, params=UotParams()):
    """
    Solve the entropic unbalanced transport problem by the generalised Sinkhorn iteration, run in the log domain.

    The scalings follow u <- (w_g / Kv)^(tau1/(tau1+epsilon)), v <- (w_f / K^T u)^(tau2/(tau2+epsilon)) with
    K = exp(-C/epsilon), starting from u = v = 1, and stop once neither log u nor log v moves by tol or more.
    A run that hits max_iters is returned with converged=False and a warning is logged.

    Examples:

    >>> plan = sinkhorn_unbalanced(CostMatrix(entries=[[0.0]], metric='l2'), [1.0], [1.0],
    ...                            UotParams(tau1=1e9, tau2=1e9))

    >>> round(float(plan.P[0, 0]), 6)
    1.0

    Args:
        cost: CostMatrix, K_g x K_f.
        w_g: K_g positive pre-training masses.
        w_f: K_f positive target masses.
        params: UotParams

    Returns:
        TransportPlan

    Raises:
        SinkhornOverflowError: the potentials became non-finite.
    """
    w_g, w_f = _check_masses(cost, w_g, w_f)
    log_K = -cost.entries / params.epsilon
    log_w_g = np.log(w_g)
    log_w_f = np.log(w_f)
    fi_1 = params.tau1 / (params.tau1 + params.epsilon)
    fi_2 = params.tau2 / (params.tau2 + params.epsilon)

    log_u = np.zeros(cost.rows)
    log_v = np.zeros(cost.cols)
    converged = False
    iteration = 0
    err = np.inf
    while iteration < params.max_iters:
        iteration += 1
        log_u_new = fi_1 * (log_w_g - logsumexp(log_K + log_v[None, :], axis=1))
        log_v_new = fi_2 * (log_w_f - logsumexp(log_K.T + log_u_new[None, :], axis=1))
        if not (np.isfinite(log_u_new).all() and np.isfinite(log_v_new).all()):
            raise SinkhornOverflowError(
                "non-finite scaling at iteration {}".format(iteration)
            )
        err = max(
            np.max(np.abs(log_u_new - log_u)), np.max(np.abs(log_v_new - log_v))
        )
        log_u, log_v = log_u_new, log_v_new
        if err < params.tol:
            converged = True
            break

    if converged:
        logger.debug("unbalanced sinkhorn converged after %d iterations", iteration)
    else:
        logger.warning(
            "unbalanced sinkhorn did not converge in %d iterations (last change %.3e)",
            iteration,
            err,
        )
    return _finish_plan(
        log_u[:, None] + log_K + log_v[None, :],
        lambda P: uot_objective(P, cost, w_g, w_f, params),
        iteration,
        converged,
    )


def sinkhorn_unbalanced_naive(cost, w_g, w_f, params=UotParams()):
    """
    The same scaling iteration as sinkhorn_unbalanced carried out on u, v and K directly.

    Only usable while exp(-C/epsilon) stays representable. Raises SinkhornOverflowError as soon as a scaling
    underflows to zero or overflows.
    """
    w_g, w_f = _check_masses(cost, w_g, w_f)
    K = np.exp(-cost.entries / params.epsilon)
    fi_1 = params.tau1 / (params.tau1 + params.epsilon)
    fi_2 = params.tau2 / (params.tau2 + params.epsilon)

    u = np.ones(cost.rows)
    v = np.ones(cost.cols)
    converged = False
    iteration = 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        while iteration < params.max_iters:
            iteration += 1
            u_new = (w_g / K.dot(v)) ** fi_1
            v_new = (w_f / K.T.dot(u_new)) ** fi_2
            if not (
                np.isfinite(u_new).all()
                and np.isfinite(v_new).all()
                and (u_new > 0).all()
                and (v_new > 0).all()
            ):
                raise SinkhornOverflowError(
                    "scaling vectors left the floating point range at iteration {}".format(
                        iteration
                    )
                )
            err = max(
                np.max(np.abs(np.log(u_new) - np.log(u))),
                np.max(np.abs(np.log(v_new) - np.log(v))),
            )
            u, v = u_new, v_new
            if err < params.tol:
                converged = True
                break
    if not converged:
        logger.warning("naive unbalanced sinkhorn did not converge in %d iterations", iteration)
    return _finish_plan(
        np.log(u)[:, None] - cost.entries / params.epsilon + np.log(v)[None, :],
        lambda P: uot_objective(P, cost, w_g, w_f, params),
        iteration,
        converged,
    )


def sinkhorn_balanced(
    cost,
    w_g,
    w_f,
    epsilon=defaults.epsilon,
    max_iters=defaults.sinkhorn_max_iters,
    tol=defaults.sinkhorn_tol,
):
    """
    Standard entropic optimal transport between measures of equal total mass, solved by the log-domain
    Sinkhorn iteration of POT.

    The row marginal is exact after every update. Convergence is checked every 10 iterations and reached once the
    column marginal is within tol of w_f in Euclidean norm. The objective field reports <P, C> - epsilon h(P).

    Examples:

    >>> plan = sinkhorn_balanced(CostMatrix(entries=[[0.0, 1.0], [1.0, 0.0]], metric='l2'),
    ...                          [0.5, 0.5], [0.5, 0.5], epsilon=0.01)

    >>> bool(plan.P[0, 1] < 1e-3 and plan.P[1, 0] < 1e-3)
    True

    Raises:
        ValueError: the two measures have different total mass.
    """
    input_validation.positive_real(epsilon, "epsilon")
    input_validation.positive_count(max_iters, "max_iters")
    input_validation.positive_real(tol, "tol")
    w_g, w_f = _check_masses(cost, w_g, w_f)
    if not np.isclose(w_g.sum(), w_f.sum(), rtol=1e-12, atol=0.0):
        raise ValueError(
            "balanced transport needs equal total mass, got {} and {}".format(
                w_g.sum(), w_f.sum()
            )
        )
    _, log = ot.sinkhorn(
        w_g,
        w_f,
        cost.entries,
        epsilon,
        method="sinkhorn_log",
        numItermax=max_iters,
        stopThr=tol,
        log=True,
        warn=False,
    )
    iterations = int(log["niter"]) + 1
    err = log["err"][-1] if len(log["err"]) > 0 else np.inf
    converged = bool(err < tol)
    if not converged:
        logger.warning(
            "balanced sinkhorn did not converge in %d iterations (marginal error %.3e)",
            iterations,
            err,
        )
    log_P = log["log_u"][:, None] - cost.entries / epsilon + log["log_v"][None, :]
    return _finish_plan(
        log_P,
        lambda P: _entropic_cost(P, cost.entries, epsilon),
        iterations,
        converged,
    )


def plan_to_frame(plan):
    """
    Long format copy of a transport plan with columns row, col and value, one line per entry.

    Examples:

    >>> plan = TransportPlan(P=np.array([[0.5, 0.25]]), row_marginal=np.array([0.75]),
    ...                      col_marginal=np.array([0.5, 0.25]), objective=1.0, iterations_used=3, converged=True)

    >>> plan_to_frame(plan)
       row  col  value
    0    0    0   0.50
    1    0    1   0.25
    """
    rows, cols = np.indices(plan.P.shape)
    return pd.DataFrame(
        {"row": rows.ravel(), "col": cols.ravel(), "value": plan.P.ravel()}
    )


def save_plan(plan, path):
    with open(path, "w", newline="") as f:
        f.write(
            "# converged={} objective={} iterations={}\n".format(
                str(plan.converged).lower(),
                defaults.float_format % plan.objective,
                plan.iterations_used,
            )
        )
        plan_to_frame(plan).to_csv(f, index=False, float_format=defaults.float_format)

