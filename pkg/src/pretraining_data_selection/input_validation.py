import math
import os as _os


def positive_real(value, variable_name):
    """
    Examples:

    >>> positive_real(0.0, 'epsilon')
    Traceback (most recent call last):
     ...
    ValueError: epsilon not a positive real number.

    >>> positive_real(1.0, 'epsilon')

    """
    if (
        isinstance(value, bool)
        or not isinstance(value, (int, float))
        or not math.isfinite(value)
        or value <= 0
    ):
        raise ValueError("{} not a positive real number.".format(variable_name))


def non_negative_real(value, variable_name):
    """
    Examples:

    >>> non_negative_real(-1.0, 'sigma')
    Traceback (most recent call last):
     ...
    ValueError: sigma not a non-negative real number.

    >>> non_negative_real(0.0, 'sigma')

    """
    if (
        isinstance(value, bool)
        or not isinstance(value, (int, float))
        or not math.isfinite(value)
        or value < 0
    ):
        raise ValueError("{} not a non-negative real number.".format(variable_name))


def positive_count(value, variable_name):
    """
    Examples:

    >>> positive_count(0, 'k')
    Traceback (most recent call last):
     ...
    ValueError: k not a positive integer.

    >>> positive_count(2.5, 'k')
    Traceback (most recent call last):
     ...
    ValueError: k not a positive integer.

    >>> positive_count(3, 'k')

    """
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError("{} not a positive integer.".format(variable_name))


def integer(value, variable_name):
    """
    Examples:

    >>> integer('7', 'seed')
    Traceback (most recent call last):
     ...
    ValueError: seed not an integer.

    >>> integer(7, 'seed')

    """
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError("{} not an integer.".format(variable_name))


def in_half_open_unit_interval(value, variable_name):
    """Checks value lies in (0, 1].

    Examples:

    >>> in_half_open_unit_interval(0.0, 'alpha')
    Traceback (most recent call last):
     ...
    ValueError: alpha not in the interval (0, 1].

    >>> in_half_open_unit_interval(1.0, 'alpha')

    """
    if (
        isinstance(value, bool)
        or not isinstance(value, (int, float))
        or not 0 < value <= 1
    ):
        raise ValueError("{} not in the interval (0, 1].".format(variable_name))


def value_in_expected_set(value, expected, variable_name):
    """
    Examples:

    >>> value_in_expected_set('l1', ['cosine', 'l2'], 'metric')
    Traceback (most recent call last):
     ...
    ValueError: Provided metric, l1, not one of 'cosine', or 'l2'.

    >>> value_in_expected_set('l2', ['cosine', 'l2'], 'metric')

    """
    if value not in expected:
        options = ["'{}'".format(option) for option in expected]
        raise ValueError(
            "Provided {}, {}, not one of {}, or {}.".format(
                variable_name, value, ", ".join(options[:-1]), options[-1]
            )
        )


def distinct_indices_in_range(indices, upper, variable_name):
    """Checks a list of class indices is non-empty, has no repeats and lies in [0, upper).

    Examples:

    >>> distinct_indices_in_range([], 10, 'classes')
    Traceback (most recent call last):
     ...
    ValueError: classes is empty.

    >>> distinct_indices_in_range([3, 3], 10, 'classes')
    Traceback (most recent call last):
     ...
    ValueError: classes contains duplicate index 3.

    >>> distinct_indices_in_range([3, 12], 10, 'classes')
    Traceback (most recent call last):
     ...
    ValueError: classes index 12 not in the range [0, 10).

    >>> distinct_indices_in_range([3, 1, 7], 10, 'classes')

    """
    if len(indices) == 0:
        raise ValueError("{} is empty.".format(variable_name))
    seen = set()
    for index in indices:
        if isinstance(index, bool) or not isinstance(index, int):
            raise ValueError(
                "{} index {!r} not an integer.".format(variable_name, index)
            )
        if index in seen:
            raise ValueError(
                "{} contains duplicate index {}.".format(variable_name, index)
            )
        if not 0 <= index < upper:
            raise ValueError(
                "{} index {} not in the range [0, {}).".format(
                    variable_name, index, upper
                )
            )
        seen.add(index)


def masses_positive(masses, variable_name):
    """
    Examples:

    >>> masses_positive([1.0, 0.0], 'w_g')
    Traceback (most recent call last):
     ...
    ValueError: w_g not all positive and finite.

    >>> masses_positive([1.0, 2.0], 'w_g')

    """
    if len(masses) == 0 or not all(math.isfinite(m) and m > 0 for m in masses):
        raise ValueError("{} not all positive and finite.".format(variable_name))


def file_exists(path, variable_name):
    """
    Examples:

    >>> file_exists('no/such/file.csv', 'labels')
    Traceback (most recent call last):
     ...
    ValueError: labels file no/such/file.csv does not exist.

    """
    if not _os.path.isfile(path):
        raise ValueError(
            "{} file {} does not exist.".format(variable_name, _os.fspath(path))
        )
