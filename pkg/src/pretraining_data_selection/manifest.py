"""
Run manifests: a JSON sidecar written next to every command output recording the command, its parameters, the
SHA-256 digest of every input file and the package version. Manifests carry no timestamps or absolute paths,
so identical runs produce byte-identical manifests.
"""
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

import pretraining_data_selection

logger = logging.getLogger(__name__)

manifest_suffix = ".manifest.json"
_chunk_size = 1 << 20


def file_digest(path):
    """
    Examples:

    >>> import os, tempfile
    >>> path = os.path.join(tempfile.mkdtemp(), 'empty.bin')
    >>> open(path, 'wb').close()

    >>> file_digest(path)
    'sha256:e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855'
    """
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(_chunk_size), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def _plain(value):
    # json-friendly copy, numpy scalars and arrays become python values, NaN becomes None
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass(frozen=True)
class RunManifest:
    """
    Attributes:
        command: subcommand that produced the output.
        parameters: flag values and defaults in effect.
        input_digests: role of each input file (e.g. 'features') mapped to its content digest.
        seed: seed of the run, None when the command is not random.
        tool_version: version of pretraining_data_selection.
        results: small summary values of the run, such as a clustering report.
    """

    command: str
    parameters: dict
    input_digests: dict = field(default_factory=dict)
    seed: Optional[int] = None
    tool_version: str = pretraining_data_selection.__version__
    results: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(_plain(asdict(self)), sort_keys=True, indent=2) + "\n"


def build_manifest(command, parameters, inputs, seed=None, results=None):
    """
    Args:
        command: subcommand name.
        parameters: dict of parameter values.
        inputs: dict mapping an input role to its file path.
        seed: integer or None.
        results: optional dict of run results.

    Returns:
        RunManifest
    """
    return RunManifest(
        command=command,
        parameters=dict(parameters),
        input_digests={role: file_digest(path) for role, path in sorted(inputs.items())},
        seed=seed,
        results={} if results is None else dict(results),
    )


def manifest_path(out_path):
    out_path = Path(out_path)
    return out_path.with_name(out_path.name + manifest_suffix)


def write_manifest(manifest, out_path):
    """Write the manifest beside out_path as <out_path>.manifest.json and return its path."""
    path = manifest_path(out_path)
    with open(path, "w", newline="\n") as f:
        f.write(manifest.to_json())
    logger.debug("wrote manifest %s", path)
    return path


def read_manifest(path):
    with open(path) as f:
        content = json.load(f)
    return RunManifest(**content)
