"""
Simulated pre-training and fine-tuning by SGD on quadratic objectives, used to check the excess risk bounds for
fine-tuning with a mix of target gradients and gradients from reused pre-training data.

A quadratic F(theta) = theta^T A theta / 2 + b^T theta is L-smooth and satisfies the Polyak-Lojasiewicz
inequality with mu and L the extreme eigenvalues of A, so every bound can be evaluated exactly.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from pretraining_data_selection import defaults, input_validation
from pretraining_data_selection.custom_errors import ConfigError, DivergenceError

logger = logging.getLogger(__name__)

# spawn-key slots under each seed
_target_stream = 0
_reused_stream = 1
_pretrain_stream = 2
_init_stream = 3
_n_streams = 4


@dataclass(frozen=True, eq=False)
class PLObjective:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        M = np.array(self.A, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
            raise ValueError("A must be a square matrix")
        if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
            raise ValueError("A not symmetric")
        A = (M + M.T) / 2
        b = np.array(self.b, dtype=np.float64)
        if b.shape != (A.shape[0],):
            raise ValueError("b must have one entry per dimension of A")
        eigenvalues = np.linalg.eigvalsh(A)
        if eigenvalues[0] <= 0:
            raise ValueError("A not positive definite")
        theta_star = np.linalg.solve(A, -b)
        assert np.abs(A @ theta_star + b).max() <= 1e-10 * max(1.0, np.abs(b).max())
        for name, value in [
            ("A", A),
            ("b", b),
            ("mu", float(eigenvalues[0])),
            ("L", float(eigenvalues[-1])),
            ("theta_star", theta_star),
            ("f_star", float(0.5 * theta_star @ A @ theta_star + b @ theta_star)),
        ]:
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dims(self):
        return self.A.shape[0]

    def value(self, theta):
        return 0.5 * np.sum((theta @ self.A) * theta, axis=-1) + theta @ self.b

    def gradient(self, theta):
        return theta @ self.A + self.b

    def excess_risk(self, theta):
        """F(theta) - F(theta*), evaluated through theta - theta* to avoid cancellation."""
        e = theta - self.theta_star
        return 0.5 * np.sum((e @ self.A) * e, axis=-1)


def make_quadratic(dims, mu, L, seed=0):
    """
    Random quadratic objective whose Hessian has eigenvalues spread evenly over [mu, L].

    Examples:

    >>> obj = make_quadratic(4, 0.5, 5.0, seed=1)

    >>> round(obj.mu, 8), round(obj.L, 8)
    (0.5, 5.0)
    """
    input_validation.positive_count(dims, "dims")
    input_validation.positive_real(mu, "mu")
    input_validation.positive_real(L, "L")
    if mu > L:
        raise ValueError("mu not at most L.")
    if dims == 1 and mu != L:
        raise ValueError("a one dimensional objective needs mu equal to L.")
    rng = np.random.Generator(np.random.Philox(seed))
    Q, _ = np.linalg.qr(rng.standard_normal((dims, dims)))
    A = Q @ np.diag(np.linspace(mu, L, dims)) @ Q.T
    b = rng.standard_normal(dims)
    return PLObjective(A=(A + A.T) / 2, b=b)


@dataclass(frozen=True)
class SimConfig:
    """
    Settings of one simulated fine-tuning experiment.

    Attributes:
        alpha: weight of the target gradient in the mixed estimator, in (0, 1].
        delta_vec: bias added to the gradient during pre-training, its norm is Delta.
        sigma: noise scale of a target stochastic gradient, E||noise||^2 = sigma^2.
        delta_h: norm of the bias of the reused-data gradient.
        m_tilde: batch size of reused data, shrinking its noise by 1/sqrt(m_tilde).
        n: number of fine-tuning steps.
        eta: fine-tuning learning rate, None to use finetune_learning_rate.
        seeds: one independent run per seed.
        init: 'pretrained' to start from sgd_pretrain, 'random' to start init_radius away from theta*.
        bias_direction: direction of the reused-data bias, defaults to the normalised all-ones vector.
    """

    alpha: float = 1.0
    delta_vec: Optional[np.ndarray] = None
    sigma: float = 1.0
    delta_h: float = 0.0
    m_tilde: int = defaults.m_tilde
    n: int = 1000
    eta: Optional[float] = None
    seeds: Tuple[int, ...] = tuple(range(50))
    init: str = "pretrained"
    pretrain_steps: int = defaults.pretrain_steps
    pretrain_seed: int = 0
    init_radius: float = defaults.init_radius
    bias_direction: Optional[np.ndarray] = None

    def __post_init__(self):
        input_validation.in_half_open_unit_interval(self.alpha, "alpha")
        input_validation.non_negative_real(self.sigma, "sigma")
        input_validation.non_negative_real(self.delta_h, "delta_h")
        input_validation.positive_count(self.m_tilde, "m_tilde")
        input_validation.positive_count(self.n, "n")
        if self.eta is not None:
            input_validation.positive_real(self.eta, "eta")
        seeds = tuple(self.seeds)
        if len(seeds) == 0:
            raise ValueError("seeds is empty.")
        for seed in seeds:
            input_validation.integer(seed, "seeds")
        object.__setattr__(self, "seeds", seeds)
        input_validation.value_in_expected_set(self.init, defaults.init_modes, "init")
        input_validation.positive_count(self.pretrain_steps, "pretrain_steps")
        input_validation.integer(self.pretrain_seed, "pretrain_seed")
        input_validation.non_negative_real(self.init_radius, "init_radius")
        for name in ["delta_vec", "bias_direction"]:
            value = getattr(self, name)
            if value is not None:
                value = np.array(value, dtype=np.float64)
                if value.ndim != 1 or not np.isfinite(value).all():
                    raise ValueError("{} not a finite vector.".format(name))
                value.setflags(write=False)
                object.__setattr__(self, name, value)
        if self.bias_direction is not None and np.linalg.norm(self.bias_direction) == 0:
            raise ValueError("bias_direction has zero norm.")

    @property
    def delta(self):
        return 0.0 if self.delta_vec is None else float(np.linalg.norm(self.delta_vec))

    def check_dims(self, dims):
        for name in ["delta_vec", "bias_direction"]:
            value = getattr(self, name)
            if value is not None and len(value) != dims:
                raise ValueError(
                    "{} has {} entries but the objective has {} dims".format(
                        name, len(value), dims
                    )
                )

    def bias_h(self, dims):
        """The fixed bias of the reused-data gradient, a vector of norm delta_h."""
        if self.bias_direction is None:
            direction = np.ones(dims) / math.sqrt(dims)
        else:
            direction = self.bias_direction / np.linalg.norm(self.bias_direction)
        return self.delta_h * direction


class GradientStreams:
    """
    Independent random streams of one seed: one for target-data gradient noise and one for reused-data
    gradient noise. Runs that differ only in alpha see the same target noise.
    """

    def __init__(self, seed):
        children = np.random.SeedSequence(seed).spawn(_n_streams)
        self.target = np.random.Generator(np.random.Philox(children[_target_stream]))
        self.reused = np.random.Generator(np.random.Philox(children[_reused_stream]))


def _seed_stream(seed, slot):
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed).spawn(_n_streams)[slot])
    )


def stochastic_gradient(obj, theta, cfg, rng):
    """Gradient of F at theta plus isotropic noise with E||noise||^2 = sigma^2, drawn from rng.target."""
    return obj.gradient(theta) + cfg.sigma / math.sqrt(obj.dims) * rng.target.standard_normal(
        obj.dims
    )


def _mix(cfg, grad, target_noise, reused_noise=None, bias_h=None):
    target = grad + target_noise
    if cfg.alpha == 1:
        return target
    return cfg.alpha * target + (1 - cfg.alpha) * (grad + bias_h + reused_noise)


def mixed_gradient(obj, theta, cfg, rng):
    """
    alpha * (target stochastic gradient) + (1 - alpha) * (reused-data gradient).

    The reused-data gradient is the gradient of F plus the fixed bias cfg.bias_h plus noise of scale
    sigma / sqrt(m_tilde). With alpha = 1 nothing is drawn from the reused stream and the result is exactly
    stochastic_gradient.

    Examples:

    >>> obj = make_quadratic(3, 1.0, 2.0, seed=0)

    >>> cfg = SimConfig(alpha=0.5, sigma=0.0, delta_h=0.0)

    >>> theta = np.ones(3)

    >>> bool(np.array_equal(mixed_gradient(obj, theta, cfg, GradientStreams(0)), obj.gradient(theta)))
    True
    """
    d = obj.dims
    target_noise = cfg.sigma / math.sqrt(d) * rng.target.standard_normal(d)
    if cfg.alpha == 1:
        return _mix(cfg, obj.gradient(theta), target_noise)
    reused_noise = cfg.sigma / math.sqrt(cfg.m_tilde * d) * rng.reused.standard_normal(d)
    return _mix(cfg, obj.gradient(theta), target_noise, reused_noise, cfg.bias_h(d))


def _check_step(obj, theta, step):
    norms = np.linalg.norm(np.atleast_2d(theta), axis=1)
    worst = float(np.max(norms))
    if not math.isfinite(worst) or worst > defaults.divergence_threshold:
        raise DivergenceError(step, worst)
    e = theta - obj.theta_star
    grad = e @ obj.A
    excess = 0.5 * np.sum(grad * e, axis=-1)
    squared_grad = np.sum(grad * grad, axis=-1)
    assert np.all(
        2 * obj.mu * excess <= squared_grad * (1 + defaults.pl_tolerance) + 1e-300
    ), "PL inequality violated at step {}".format(step)
    return excess


def pretrain_learning_rate(L, sigma2, delta2):
    """
    min(1, Delta^2 / (2 sigma^2)) / L, floored at learning_rate_floor / L.

    Examples:

    >>> pretrain_learning_rate(5.0, 1.0, 1.0)
    0.1

    >>> pretrain_learning_rate(5.0, 0.0, 1.0)
    0.2
    """
    input_validation.positive_real(L, "L")
    input_validation.non_negative_real(sigma2, "sigma2")
    input_validation.non_negative_real(delta2, "delta2")
    if sigma2 == 0:
        return 1 / L
    return max(min(1.0, delta2 / (2 * sigma2)), defaults.learning_rate_floor) / L


def finetune_learning_rate(mu, L, sigma2, delta2, n, alpha=1.0):
    """
    (2 / (n mu)) log(n mu Delta^2 / (2 alpha L sigma^2)), capped at 1/L.

    Falls back to 1/L, with a warning, when the log argument is not above 1.
    """
    input_validation.positive_real(mu, "mu")
    input_validation.positive_real(L, "L")
    input_validation.non_negative_real(sigma2, "sigma2")
    input_validation.non_negative_real(delta2, "delta2")
    input_validation.positive_count(n, "n")
    input_validation.in_half_open_unit_interval(alpha, "alpha")
    if sigma2 == 0:
        return 1 / L
    argument = n * mu * delta2 / (2 * alpha * L * sigma2)
    if argument <= 1:
        logger.warning(
            "log argument %.3g not above 1, using learning rate 1/L", argument
        )
        return 1 / L
    return min(2 / (n * mu) * math.log(argument), 1 / L)


def sgd_pretrain(obj, cfg, T, eta=None):
    """
    Run T steps of SGD on the biased gradient grad F(theta) + delta_vec + noise, starting at the origin.

    Args:
        obj: PLObjective
        cfg: SimConfig providing delta_vec, sigma and pretrain_seed.
        T: number of steps.
        eta: learning rate, defaults to pretrain_learning_rate.

    Returns:
        final iterate theta_p.

    Raises:
        DivergenceError: ||theta|| exceeded the divergence threshold.
    """
    input_validation.positive_count(T, "T")
    cfg.check_dims(obj.dims)
    if eta is None:
        eta = pretrain_learning_rate(obj.L, cfg.sigma**2, cfg.delta**2)
    input_validation.positive_real(eta, "eta")
    delta_vec = np.zeros(obj.dims) if cfg.delta_vec is None else cfg.delta_vec
    noise = (
        cfg.sigma
        / math.sqrt(obj.dims)
        * _seed_stream(cfg.pretrain_seed, _pretrain_stream).standard_normal((T, obj.dims))
    )
    theta = np.zeros(obj.dims)
    for step in range(T):
        theta = theta - eta * (obj.gradient(theta) + delta_vec + noise[step])
        _check_step(obj, theta, step + 1)
    logger.debug(
        "pre-training finished after %d steps, excess risk %.3e", T, obj.excess_risk(theta)
    )
    return theta


@dataclass(frozen=True)
class BoundValue:
    """A closed-form bound, NaN when its preconditions do not hold."""

    value: float
    applicable: bool
    variance_term: float = math.nan
    bias_term: float = 0.0


def _not_applicable():
    return BoundValue(value=math.nan, applicable=False)


def _check_bound_inputs(mu, L, sigma2, delta2, n):
    input_validation.positive_real(mu, "mu")
    input_validation.positive_real(L, "L")
    input_validation.positive_real(sigma2, "sigma2")
    input_validation.positive_real(delta2, "delta2")
    input_validation.positive_count(n, "n")


def _variance_term(mu, L, sigma2, delta2, n, alpha):
    argument = n * mu * delta2 / (2 * alpha * L * sigma2)
    if argument <= 1:
        return None
    return 4 * alpha * L * sigma2 / (n * mu**2) * math.log(argument)


def bound_lemma2(mu, L, sigma2, delta2, n):
    """
    Excess risk bounds after pre-training, Delta^2 / mu, and after n steps of plain fine-tuning,
    4 L sigma^2 / (n mu^2) log(n mu Delta^2 / (2 L sigma^2)).

    Examples:

    >>> pretrain, finetune = bound_lemma2(0.5, 5.0, 1.0, 0.5, 1000)

    >>> pretrain.value
    1.0

    Returns:
        (pretrain BoundValue, finetune BoundValue), the second not applicable when the log argument is at
        most 1.
    """
    _check_bound_inputs(mu, L, sigma2, delta2, n)
    pretrain = BoundValue(value=delta2 / mu, applicable=True, bias_term=delta2 / mu)
    variance = _variance_term(mu, L, sigma2, delta2, n, 1.0)
    if variance is None:
        return pretrain, _not_applicable()
    return pretrain, BoundValue(value=variance, applicable=True, variance_term=variance)


def bound_theorem2(mu, L, sigma2, delta2, n, alpha, delta_h2):
    """
    Excess risk bound of fine-tuning with the mixed gradient,
    4 alpha L sigma^2 / (n mu^2) log(n mu Delta^2 / (2 alpha L sigma^2)) + 2 (1 - alpha) delta^2 / mu.

    Examples:

    >>> round(bound_theorem2(1.0, 1.0, 1.0, 2.0, 100, 0.5, 1.0).bias_term, 12)
    1.0
    """
    _check_bound_inputs(mu, L, sigma2, delta2, n)
    input_validation.in_half_open_unit_interval(alpha, "alpha")
    input_validation.non_negative_real(delta_h2, "delta_h2")
    variance = _variance_term(mu, L, sigma2, delta2, n, alpha)
    if variance is None:
        return _not_applicable()
    bias = 2 * (1 - alpha) * delta_h2 / mu
    return BoundValue(
        value=variance + bias, applicable=True, variance_term=variance, bias_term=bias
    )


def bound_theorem2_finite_batch(mu, L, sigma2, delta2, n, alpha, delta_h2, m_tilde):
    """
    Mixed-gradient bound for a reused batch of m_tilde samples,
    4 alpha L sigma^2 / (n mu^2) log(n mu Delta^2 / (2 alpha L sigma^2)) + (1 - alpha) delta^2 / mu
    + 2 (1 - alpha) sigma^2 / (m_tilde mu).

    It is at most bound_theorem2 once m_tilde >= 2 sigma^2 / delta^2.

    Examples:

    >>> round(bound_theorem2_finite_batch(1.0, 1.0, 1.0, 2.0, 100, 0.5, 1.0, 4).bias_term, 12)
    0.75
    """
    input_validation.positive_count(m_tilde, "m_tilde")
    base = bound_theorem2(mu, L, sigma2, delta2, n, alpha, delta_h2)
    if not base.applicable:
        return base
    bias = (1 - alpha) * delta_h2 / mu + 2 * (1 - alpha) * sigma2 / (m_tilde * mu)
    return BoundValue(
        value=base.variance_term + bias,
        applicable=True,
        variance_term=base.variance_term,
        bias_term=bias,
    )


def bound_finetune_with_eta(mu, L, sigma2, delta2, n, eta):
    """
    exp(-eta mu n / 2) Delta^2 / mu + eta L sigma^2 / mu, the fine-tuning bound for a given learning
    rate eta <= 1/L.
    """
    _check_bound_inputs(mu, L, sigma2, delta2, n)
    input_validation.positive_real(eta, "eta")
    if eta > 1 / L:
        return _not_applicable()
    bias = math.exp(-eta * mu * n / 2) * delta2 / mu
    variance = eta * L * sigma2 / mu
    return BoundValue(
        value=bias + variance, applicable=True, variance_term=variance, bias_term=bias
    )


@dataclass(frozen=True)
class SimResult:
    """
    Attributes:
        seeds: seeds of the runs, in row order of trajectories.
        trajectories: array of shape (len(seeds), n + 1), excess risk before every step and after the last.
        eta: learning rate used.
        delta2: Delta^2 the bounds were evaluated with.
        bound: bound_theorem2 at the run settings.
        pretrain_bound: first value of bound_lemma2.
        finetune_bound: second value of bound_lemma2.
    """

    seeds: Tuple[int, ...]
    trajectories: np.ndarray
    eta: float
    delta2: float
    bound: BoundValue
    pretrain_bound: BoundValue
    finetune_bound: BoundValue

    def __post_init__(self):
        assert (self.trajectories >= -1e-12).all()

    @property
    def final_excess(self):
        return self.trajectories[:, -1]

    @property
    def mean_final_excess(self):
        return float(self.final_excess.mean())

    @property
    def stderr_final_excess(self):
        if len(self.seeds) < 2:
            return 0.0
        return float(self.final_excess.std(ddof=1) / math.sqrt(len(self.seeds)))


def _bounds(obj, cfg, delta2):
    sigma2 = cfg.sigma**2
    if sigma2 == 0 or delta2 == 0:
        return _not_applicable(), _not_applicable(), _not_applicable()
    pretrain, finetune = bound_lemma2(obj.mu, obj.L, sigma2, delta2, cfg.n)
    theorem = bound_theorem2(obj.mu, obj.L, sigma2, delta2, cfg.n, cfg.alpha, cfg.delta_h**2)
    return theorem, pretrain, finetune


def effective_delta2(obj, cfg, theta_0):
    """
    Delta^2 to use in the fine-tuning bounds and learning rate: the larger of ||delta_vec||^2 and
    mu (F(theta_0) - F(theta*)), so that the starting excess risk is at most Delta^2 / mu.
    """
    return max(cfg.delta**2, obj.mu * float(obj.excess_risk(theta_0)))


def sgd_finetune(obj, cfg, theta_0, delta2=None):
    """
    n steps of theta <- theta - eta * mixed_gradient for every seed in cfg.seeds, all starting at theta_0.

    Seeds are advanced together as rows of one array. The noise of seed s is drawn from GradientStreams(s)
    in blocks of n draws, which gives the same values as drawing one vector per step.

    Args:
        obj: PLObjective
        cfg: SimConfig
        theta_0: starting point.
        delta2: Delta^2 for the learning rate and bounds, defaults to effective_delta2.

    Returns:
        SimResult

    Raises:
        DivergenceError: some seed left the ball of radius divergence_threshold.
    """
    cfg.check_dims(obj.dims)
    theta_0 = np.asarray(theta_0, dtype=np.float64)
    if theta_0.shape != (obj.dims,):
        raise ValueError("theta_0 must have {} entries".format(obj.dims))
    if delta2 is None:
        delta2 = effective_delta2(obj, cfg, theta_0)
    eta = cfg.eta
    if eta is None:
        eta = finetune_learning_rate(obj.mu, obj.L, cfg.sigma**2, delta2, cfg.n, cfg.alpha)

    d = obj.dims
    streams = [GradientStreams(seed) for seed in cfg.seeds]
    target_noise = cfg.sigma / math.sqrt(d) * np.stack(
        [s.target.standard_normal((cfg.n, d)) for s in streams]
    )
    if cfg.alpha != 1:
        reused_noise = cfg.sigma / math.sqrt(cfg.m_tilde * d) * np.stack(
            [s.reused.standard_normal((cfg.n, d)) for s in streams]
        )
        bias_h = cfg.bias_h(d)

    theta = np.tile(theta_0, (len(cfg.seeds), 1))
    trajectories = np.empty((len(cfg.seeds), cfg.n + 1))
    trajectories[:, 0] = _check_step(obj, theta, 0)
    for step in range(cfg.n):
        if cfg.alpha == 1:
            mixed = _mix(cfg, obj.gradient(theta), target_noise[:, step])
        else:
            mixed = _mix(
                cfg, obj.gradient(theta), target_noise[:, step], reused_noise[:, step], bias_h
            )
        theta = theta - eta * mixed
        trajectories[:, step + 1] = _check_step(obj, theta, step + 1)

    bound, pretrain_bound, finetune_bound = _bounds(obj, cfg, delta2)
    result = SimResult(
        seeds=cfg.seeds,
        trajectories=trajectories,
        eta=eta,
        delta2=delta2,
        bound=bound,
        pretrain_bound=pretrain_bound,
        finetune_bound=finetune_bound,
    )
    logger.debug(
        "fine-tuning alpha=%g n=%d eta=%.4g: mean excess risk %.4e, bound %.4e",
        cfg.alpha,
        cfg.n,
        eta,
        result.mean_final_excess,
        bound.value,
    )
    return result


def initial_point(obj, cfg):
    """Starting point of fine-tuning: the pre-trained iterate, or a seeded point init_radius away from theta*."""
    if cfg.init == "pretrained":
        return sgd_pretrain(obj, cfg, cfg.pretrain_steps)
    direction = _seed_stream(cfg.pretrain_seed, _init_stream).standard_normal(obj.dims)
    return obj.theta_star + cfg.init_radius * direction / np.linalg.norm(direction)


def run_simulation(obj, cfg):
    return sgd_finetune(obj, cfg, initial_point(obj, cfg))


sweep_keys = {
    "dims": int,
    "mu": float,
    "L": float,
    "sigma": float,
    "delta": float,
    "alpha": [float],
    "delta2": [float],
    "n": [int],
    "m_tilde": int,
    "seeds": [int],
    "init": str,
    "objective_seed": int,
    "pretrain_steps": int,
    "pretrain_seed": int,
    "init_radius": float,
    "eta": float,
}


def default_sweep_config():
    return {
        "dims": 10,
        "mu": 0.5,
        "L": 5.0,
        "sigma": 1.0,
        "delta": 1.0,
        "alpha": [1.0],
        "delta2": [0.0],
        "n": [1000],
        "m_tilde": defaults.m_tilde,
        "seeds": list(range(50)),
        "init": "pretrained",
        "objective_seed": 0,
        "pretrain_steps": defaults.pretrain_steps,
        "pretrain_seed": 0,
        "init_radius": defaults.init_radius,
        "eta": None,
    }


def _parse_scalar(key, kind, text):
    try:
        if kind is str:
            return text
        return kind(text)
    except ValueError:
        raise ConfigError(key, "could not parse {!r} as {}".format(text, kind.__name__))


def _parse_value(key, text):
    kind = sweep_keys[key]
    if key == "eta" and text == "auto":
        return None
    if not isinstance(kind, list):
        return _parse_scalar(key, kind, text)
    values = []
    for token in [t.strip() for t in text.split(",")]:
        if kind[0] is int and ":" in token:
            start, _, stop = token.partition(":")
            values.extend(
                range(_parse_scalar(key, int, start), _parse_scalar(key, int, stop))
            )
        else:
            values.append(_parse_scalar(key, kind[0], token))
    if len(values) == 0:
        raise ConfigError(key, "empty list")
    return values


def _non_negative_seed(value, variable_name):
    input_validation.integer(value, variable_name)
    if value < 0:
        raise ValueError("{} not all non-negative.".format(variable_name))


def _optional_positive_real(value, variable_name):
    if value is not None:
        input_validation.positive_real(value, variable_name)


def _init_mode(value, variable_name):
    input_validation.value_in_expected_set(value, defaults.init_modes, variable_name)


_sweep_checks = {
    "dims": input_validation.positive_count,
    "mu": input_validation.positive_real,
    "L": input_validation.positive_real,
    "sigma": input_validation.non_negative_real,
    "delta": input_validation.non_negative_real,
    "alpha": input_validation.in_half_open_unit_interval,
    "delta2": input_validation.non_negative_real,
    "n": input_validation.positive_count,
    "m_tilde": input_validation.positive_count,
    "seeds": _non_negative_seed,
    "init": _init_mode,
    "objective_seed": input_validation.integer,
    "pretrain_steps": input_validation.positive_count,
    "pretrain_seed": input_validation.integer,
    "init_radius": input_validation.non_negative_real,
    "eta": _optional_positive_real,
}


def _validate_sweep(config):
    for key, check in _sweep_checks.items():
        values = config[key] if isinstance(sweep_keys[key], list) else [config[key]]
        try:
            for value in values:
                check(value, key)
        except ValueError as e:
            raise ConfigError(key, str(e))
    if config["mu"] > config["L"]:
        raise ConfigError("mu", "mu not at most L.")
    if config["dims"] == 1 and config["mu"] != config["L"]:
        raise ConfigError("dims", "a one dimensional objective needs mu equal to L.")


def load_sweep_config(path):
    """
    Read a flat key = value sweep file. Lists are comma separated, integer lists also take start:stop ranges,
    eta takes 'auto'. Keys left out keep the values of default_sweep_config.

    Raises:
        ConfigError: unknown, repeated or invalid key.
    """
    input_validation.file_exists(path, "config")
    config = default_sweep_config()
    seen = set()
    with open(path) as f:
        for line_number, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, separator, text = line.partition("=")
            key = key.strip()
            if not separator:
                raise ConfigError(key, "line {} is not of the form key = value".format(line_number))
            if key not in sweep_keys:
                raise ConfigError(key, "unknown key")
            if key in seen:
                raise ConfigError(key, "repeated key")
            seen.add(key)
            config[key] = _parse_value(key, text.strip())
    _validate_sweep(config)
    return config


def run_sweep(config):
    """
    Simulate every (alpha, delta2, n) combination of a sweep config on one quadratic objective.

    delta2 is the squared norm of the reused-data bias. Each point starts from the same initial point.

    Returns:
        pd.DataFrame with columns alpha, delta2, n, seed, final_excess_risk and bound, one row per run.
    """
    _validate_sweep(config)
    obj = make_quadratic(config["dims"], config["mu"], config["L"], config["objective_seed"])
    delta_vec = config["delta"] * np.ones(config["dims"]) / math.sqrt(config["dims"])
    base = SimConfig(
        delta_vec=delta_vec,
        sigma=config["sigma"],
        m_tilde=config["m_tilde"],
        eta=config["eta"],
        seeds=tuple(config["seeds"]),
        init=config["init"],
        pretrain_steps=config["pretrain_steps"],
        pretrain_seed=config["pretrain_seed"],
        init_radius=config["init_radius"],
    )
    theta_0 = initial_point(obj, base)

    frames = []
    for alpha, delta2, n in itertools.product(
        config["alpha"], config["delta2"], config["n"]
    ):
        cfg = SimConfig(
            alpha=alpha,
            delta_vec=delta_vec,
            sigma=config["sigma"],
            delta_h=math.sqrt(delta2),
            m_tilde=config["m_tilde"],
            n=n,
            eta=config["eta"],
            seeds=tuple(config["seeds"]),
            init=config["init"],
        )
        result = sgd_finetune(obj, cfg, theta_0)
        frames.append(
            pd.DataFrame(
                {
                    "alpha": alpha,
                    "delta2": delta2,
                    "n": n,
                    "seed": list(cfg.seeds),
                    "final_excess_risk": result.final_excess,
                    "bound": result.bound.value,
                }
            )
        )
        logger.info(
            "alpha=%g delta2=%g n=%d: mean excess risk %.4e, bound %.4e",
            alpha,
            delta2,
            n,
            result.mean_final_excess,
            result.bound.value,
        )
    return pd.concat(frames, ignore_index=True)


def summarise_sweep(results):
    """
    Mean excess risk against the bound at every sweep point.

    Returns:
        pd.DataFrame with columns ALPHA, DELTA2, N, MEAN_EXCESS_RISK, BOUND and WITHIN_BOUND.
    """
    summary = (
        results.groupby(["alpha", "delta2", "n"], sort=False)
        .agg(MEAN_EXCESS_RISK=("final_excess_risk", "mean"), BOUND=("bound", "first"))
        .reset_index()
        .rename(columns={"alpha": "ALPHA", "delta2": "DELTA2", "n": "N"})
    )
    summary["WITHIN_BOUND"] = summary["MEAN_EXCESS_RISK"] <= summary["BOUND"]
    return summary


def save_sweep_results(results, path):
    results.to_csv(path, index=False, float_format=defaults.float_format)
