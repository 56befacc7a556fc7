"""
Feature matrices, label maps and class/cluster centroid measures, plus the on-disk formats they are exchanged in.

All arrays are held as float64 regardless of how they were stored.
"""
import logging
import struct
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from pretraining_data_selection import defaults, input_validation
from pretraining_data_selection.custom_errors import CentroidFileError, FeatureFileError

logger = logging.getLogger(__name__)

_header = struct.Struct("<4sIII")


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense rows x dims matrix of embedding vectors.

    Attributes:
        data: 2d float64 array, one embedding per row.
        ids: optional tuple of distinct per-row identifiers.
    """

    data: np.ndarray
    ids: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise FeatureFileError("feature data must be two dimensional")
        if data.shape[0] < 1:
            raise FeatureFileError("rows must be ≥ 1")
        if data.shape[1] < 1:
            raise FeatureFileError("dims must be ≥ 1")
        bad_rows = np.flatnonzero(~np.isfinite(data).all(axis=1))
        if len(bad_rows) > 0:
            raise FeatureFileError(
                "non-finite value in row {}".format(int(bad_rows[0]))
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != data.shape[0]:
                raise FeatureFileError(
                    "ids has {} entries, expected {}".format(len(ids), data.shape[0])
                )
            if len(set(ids)) != len(ids):
                raise FeatureFileError("ids are not distinct")
            object.__setattr__(self, "ids", ids)

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def dims(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class LabelMap:
    """Assignment of every feature row to one of n_classes classes or clusters, none of them empty."""

    assignments: np.ndarray
    n_classes: int
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        input_validation.positive_count(self.n_classes, "n_classes")
        assignments = np.array(self.assignments)
        if assignments.ndim != 1 or len(assignments) == 0:
            raise FeatureFileError("assignments must be a non-empty 1d sequence")
        if not np.issubdtype(assignments.dtype, np.integer):
            raise FeatureFileError("assignments must be integers")
        assignments = assignments.astype(np.int64)
        out_of_range = np.flatnonzero((assignments < 0) | (assignments >= self.n_classes))
        if len(out_of_range) > 0:
            row = int(out_of_range[0])
            raise FeatureFileError(
                "label {} in row {} not in the range [0, {})".format(
                    int(assignments[row]), row, self.n_classes
                )
            )
        counts = np.bincount(assignments, minlength=self.n_classes)
        empty = np.flatnonzero(counts == 0)
        if len(empty) > 0:
            raise FeatureFileError("class {} has zero members".format(int(empty[0])))
        assignments.setflags(write=False)
        object.__setattr__(self, "assignments", assignments)
        if self.names is not None:
            names = tuple(str(n) for n in self.names)
            if len(names) != self.n_classes:
                raise FeatureFileError(
                    "names has {} entries, expected {}".format(
                        len(names), self.n_classes
                    )
                )
            object.__setattr__(self, "names", names)

    def member_counts(self):
        return np.bincount(self.assignments, minlength=self.n_classes)


@dataclass(frozen=True, eq=False)
class CentroidSet:
    """Per-class mean vectors, each carrying unit mass.

    Attributes:
        centroids: K x dims float64 array.
        member_counts: number of feature rows behind each centroid, all >= 1. Defaults to ones when the
            centroids are given directly rather than computed from labelled features.
    """

    centroids: np.ndarray
    member_counts: Optional[np.ndarray] = None

    def __post_init__(self):
        centroids = np.array(self.centroids, dtype=np.float64)
        if centroids.ndim != 2 or centroids.shape[0] < 1 or centroids.shape[1] < 1:
            raise ValueError("centroids must be a non-empty K x dims matrix")
        if not np.isfinite(centroids).all():
            raise ValueError("centroids not all finite")
        if self.member_counts is None:
            counts = np.ones(centroids.shape[0], dtype=np.int64)
        else:
            counts = np.array(self.member_counts, dtype=np.int64)
        if counts.shape != (centroids.shape[0],):
            raise ValueError("member_counts must have one entry per centroid")
        if (counts < 1).any():
            raise ValueError("member_counts not all ≥ 1")
        centroids.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "member_counts", counts)

    @property
    def K(self):
        return self.centroids.shape[0]

    @property
    def dims(self):
        return self.centroids.shape[1]

    @property
    def masses(self):
        return np.ones(self.K)

    def __eq__(self, other):
        if not isinstance(other, CentroidSet):
            return NotImplemented
        return np.array_equal(self.centroids, other.centroids) and np.array_equal(
            self.member_counts, other.member_counts
        )


def load_features(path, format="binary"):
    """
    Read a feature matrix from a binary FSEL file or a headerless CSV file.

    Examples:

    >>> import os, tempfile
    >>> path = os.path.join(tempfile.mkdtemp(), 'features.csv')
    >>> with open(path, 'w') as f:
    ...     _ = f.write('1,0\\n0,1\\n1,1\\n')

    >>> fm = load_features(path, format='csv')

    >>> fm.rows, fm.dims
    (3, 2)

    Args:
        path: str or path-like, location of the file.
        format: 'binary' or 'csv'.

    Returns:
        FeatureMatrix holding float64 data.
    """
    input_validation.value_in_expected_set(format, defaults.feature_formats, "format")
    if format == "binary":
        return _load_features_binary(path)
    return _load_features_csv(path)


def _load_features_binary(path):
    with open(path, "rb") as f:
        content = f.read()
    if len(content) < _header.size:
        raise FeatureFileError("unexpected end of file")
    magic, version, rows, dims = _header.unpack_from(content)
    if magic != defaults.feature_file_magic:
        raise FeatureFileError("not a feature file")
    if version != defaults.file_format_version:
        raise FeatureFileError("unsupported feature file version {}".format(version))
    if rows < 1:
        raise FeatureFileError("rows must be ≥ 1")
    if dims < 1:
        raise FeatureFileError("dims must be ≥ 1")
    expected = _header.size + rows * dims * 4
    if len(content) < expected:
        raise FeatureFileError("unexpected end of file")
    if len(content) > expected:
        raise FeatureFileError(
            "dimension mismatch: {} trailing bytes after {} x {} values".format(
                len(content) - expected, rows, dims
            )
        )
    data = np.frombuffer(content, dtype="<f4", offset=_header.size)
    return FeatureMatrix(data=data.reshape(rows, dims).astype(np.float64))


def _load_features_csv(path):
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise FeatureFileError("rows must be ≥ 1")
    except pd.errors.ParserError as e:
        raise FeatureFileError("dimension mismatch: {}".format(e))
    data = np.empty(raw.shape, dtype=np.float64)
    for row_index, row in enumerate(raw.itertuples(index=False)):
        for col_index, cell in enumerate(row):
            if not isinstance(cell, str) or cell.strip() == "":
                raise FeatureFileError(
                    "dimension mismatch in row {}: expected {} values".format(
                        row_index, raw.shape[1]
                    )
                )
            try:
                data[row_index, col_index] = float(cell)
            except ValueError:
                raise FeatureFileError(
                    "could not parse value {!r} in row {}".format(cell, row_index)
                )
    return FeatureMatrix(data=data)


def save_features(features, path, format="binary"):
    """Write features as a binary FSEL file (float32) or a headerless CSV file."""
    input_validation.value_in_expected_set(format, defaults.feature_formats, "format")
    if format == "binary":
        with open(path, "wb") as f:
            f.write(
                _header.pack(
                    defaults.feature_file_magic,
                    defaults.file_format_version,
                    features.rows,
                    features.dims,
                )
            )
            f.write(features.data.astype("<f4").tobytes())
    else:
        pd.DataFrame(features.data).to_csv(
            path, header=False, index=False, float_format=defaults.float_format
        )


def load_labels(path, n_classes=None):
    """
    Read a label CSV with header row,label. Row indices must run 0, 1, ..., n-1.

    Args:
        path: str or path-like.
        n_classes: number of classes, defaults to the largest label plus one.

    Returns:
        LabelMap
    """
    input_validation.file_exists(path, "labels")
    try:
        labels = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise FeatureFileError("label file {} is empty".format(path))
    if list(labels.columns) != ["row", "label"]:
        raise FeatureFileError("label file header must be row,label")
    if labels.empty:
        raise FeatureFileError("label file {} has no rows".format(path))
    parsed = {}
    for column in ["row", "label"]:
        text = labels[column].str.strip()
        bad = np.flatnonzero(~text.str.fullmatch(r"[+-]?\d+", na=False).to_numpy(dtype=bool))
        if len(bad) > 0:
            raise FeatureFileError(
                "could not parse {} {!r} in row {}".format(
                    column, labels[column].iloc[bad[0]], int(bad[0])
                )
            )
        parsed[column] = text.astype(np.int64).to_numpy()
    mismatched = np.flatnonzero(parsed["row"] != np.arange(len(labels)))
    if len(mismatched) > 0:
        position = int(mismatched[0])
        raise FeatureFileError(
            "row index {} found at position {}, row indices must be 0-based and strictly increasing".format(
                int(parsed["row"][position]), position
            )
        )
    if n_classes is None:
        n_classes = int(parsed["label"].max()) + 1
    return LabelMap(assignments=parsed["label"], n_classes=n_classes)


def save_labels(labels, path):
    pd.DataFrame(
        {"row": np.arange(len(labels.assignments)), "label": labels.assignments}
    ).to_csv(path, index=False)


def compute_centroids(features, labels):
    """
    Mean feature vector of every class. Summation runs in ascending row order so results are reproducible
    bit for bit.

    Examples:

    >>> fm = FeatureMatrix(data=[[0.0, 0.0], [2.0, 2.0], [5.0, 1.0]])

    >>> labels = LabelMap(assignments=[0, 0, 1], n_classes=2)

    >>> cs = compute_centroids(fm, labels)

    >>> cs.centroids
    array([[1., 1.],
           [5., 1.]])

    >>> cs.member_counts
    array([2, 1])

    Args:
        features: FeatureMatrix
        labels: LabelMap with one assignment per feature row.

    Returns:
        CentroidSet with unit masses.
    """
    if len(labels.assignments) != features.rows:
        raise ValueError(
            "labels has {} assignments but features has {} rows".format(
                len(labels.assignments), features.rows
            )
        )
    sums = np.zeros((labels.n_classes, features.dims))
    np.add.at(sums, labels.assignments, features.data)
    counts = labels.member_counts()
    assert counts.sum() == features.rows
    return CentroidSet(centroids=sums / counts[:, None], member_counts=counts)


def save_centroids(centroids, path):
    with open(path, "wb") as f:
        f.write(
            _header.pack(
                defaults.centroid_file_magic,
                defaults.file_format_version,
                centroids.K,
                centroids.dims,
            )
        )
        f.write(centroids.centroids.astype("<f8").tobytes())
        f.write(centroids.member_counts.astype("<u4").tobytes())


def load_centroids(path):
    """
    Read a CSEL centroid file written by save_centroids.

    Raises:
        CentroidFileError: wrong magic bytes, unsupported version, truncated or over-long file.
    """
    with open(path, "rb") as f:
        content = f.read()
    if not defaults.centroid_file_magic.startswith(content[:4]):
        raise CentroidFileError("not a centroid file")
    if len(content) < _header.size:
        raise CentroidFileError("unexpected end of file")
    _, version, K, dims = _header.unpack_from(content)
    if version != defaults.file_format_version:
        raise CentroidFileError("unsupported centroid file version {}".format(version))
    counts_offset = _header.size + K * dims * 8
    expected = counts_offset + K * 4
    if len(content) < expected:
        raise CentroidFileError("unexpected end of file")
    if len(content) > expected:
        raise CentroidFileError("{} trailing bytes".format(len(content) - expected))
    centroids = np.frombuffer(content, dtype="<f8", count=K * dims, offset=_header.size)
    counts = np.frombuffer(content, dtype="<u4", count=K, offset=counts_offset)
    logger.debug("loaded %d centroids of dimension %d from %s", K, dims, path)
    return CentroidSet(
        centroids=centroids.reshape(K, dims), member_counts=counts.astype(np.int64)
    )
