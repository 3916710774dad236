"""
Utility functions for trollscope
"""

import hashlib
import json
import logging
import platform
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def sha256_file(path: PathLike) -> str:
    """Hex SHA-256 digest of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def input_digests(paths: Iterable[Optional[PathLike]]) -> Dict[str, str]:
    """Digest of every existing input, keyed by file name"""
    return {Path(p).name: sha256_file(p) for p in paths if p is not None and Path(p).is_file()}


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 32-bit child seed for (seed, *keys)"""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def ensure_dir(path: PathLike) -> Path:
    """Create an output directory if needed"""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    """Write a CSV artifact with '\\n' line endings"""
    path = Path(path)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def package_versions() -> Dict[str, str]:
    """Versions recorded in run manifests"""
    from config import APP_VERSION

    versions = {"trollscope": APP_VERSION, "python": platform.python_version()}
    for name in ("numpy", "scipy", "pandas", "pydantic", "joblib"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_manifest(
    out_dir: PathLike,
    subcommand: str,
    config: Dict[str, Any],
    seed: int,
    inputs: Iterable[Optional[PathLike]] = (),
    outputs: Iterable[PathLike] = (),
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write manifest.json describing a run

    Keys are sorted and no wall-clock time is recorded, so identical runs
    produce identical manifests.
    """
    from learning.lstm import PARAMS_FORMAT_VERSION
    from trollscope.models import CODE_TABLE_VERSION

    out_dir = ensure_dir(out_dir)
    output_names: List[str] = sorted({Path(p).name for p in outputs})
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "inputs": input_digests(inputs),
        "versions": package_versions(),
        "code_table_version": CODE_TABLE_VERSION,
        "model_format_version": PARAMS_FORMAT_VERSION,
        "outputs": output_names,
    }
    if extra:
        manifest.update(extra)

    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path
