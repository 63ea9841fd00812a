import hashlib
import io
import logging
import os
from pathlib import Path
from typing import Annotated, Mapping, Optional

import numpy as np
import pandas as pd
import scipy

logger = logging.getLogger(__name__)

__version__ = "0.1.0"

# Define custom annotated types
SavePathType = Annotated[str | os.PathLike, "File path to save data. If None, data is not saved."]
RunDirType = Annotated[str | os.PathLike, "Directory holding the artifacts of one pipeline run"]

FLOAT_FORMAT = "%.17g"


def config_hash(config) -> str:
    """Short sha256 of a run config, ignoring where and which stages it runs"""
    payload = config.model_dump_json(exclude={"output_dir", "stages"})
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def provenance_header(stage: str, config=None, seed: Optional[int] = None, **extra) -> dict:
    header = {
        "tool": f"nacdyn {__version__}",
        "stage": stage,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    if config is not None:
        header["config_hash"] = config_hash(config)
    if seed is not None:
        header["seed"] = str(seed)
    header.update({k: str(v) for k, v in extra.items()})
    return header


def save_output(
    data: pd.DataFrame,
    tag: str,
    save_path: SavePathType = None,
    header: Optional[Mapping[str, str]] = None,
) -> None:
    """Write a table as CSV preceded by `# key: value` provenance lines"""
    if not save_path:
        return
    save_path = Path(save_path)
    save_path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    for key, value in (header or {}).items():
        buffer.write(f"# {key}: {value}\n")
    data.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    save_path.write_text(buffer.getvalue())
    logger.info("%s saved to %s", tag, save_path)


def read_header(path: SavePathType) -> dict:
    header = {}
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
    return header


def read_table(path: SavePathType) -> pd.DataFrame:
    """Read a table written by save_output, skipping its provenance lines"""
    return pd.read_csv(path, comment="#")
