import json
import logging
import os
from pathlib import Path
from typing import Annotated, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator

from exceptions import AlignmentError, ConfigError, MissingArtifactError

logger = logging.getLogger(__name__)

DISPLACEMENT_KEYS = tuple(f"{c}{sign}" for c in ("Y1", "Z1", "Y2", "Z2") for sign in "+-")
TAG_DECIMALS = 9


class ManifestPoint(BaseModel):
    """FCIDUMP files of one coarse geometry: the centre and its 8 Cartesian displacements"""
    model_config = ConfigDict(extra="forbid")

    r: float = Field(description="OH length (bohr)")
    theta: float = Field(description="HOH angle (radian)")
    center: str = Field(description="FCIDUMP at the geometry itself")
    displaced: dict[str, str] = Field(default_factory=dict, description="Y1+ ... Z2- -> FCIDUMP")

    @field_validator("displaced")
    @classmethod
    def _known_keys(cls, value):
        unknown = set(value) - set(DISPLACEMENT_KEYS)
        if unknown:
            raise ValueError(f"unknown displacement keys {sorted(unknown)}")
        return value

    @property
    def tag(self) -> tuple[float, float]:
        return (self.r, self.theta)

    def files(self) -> list[str]:
        return [self.center] + [self.displaced[k] for k in DISPLACEMENT_KEYS if k in self.displaced]


class Manifest(BaseModel):
    """Coarse-grid geometries with their FCIDUMP files; paths are relative to base_dir"""
    model_config = ConfigDict(extra="forbid")

    delta_r: float = Field(default=0.001, gt=0, description="Cartesian displacement for dH/dR (bohr)")
    points: list[ManifestPoint] = Field(min_length=1)
    base_dir: Optional[Path] = Field(default=None, exclude=True)

    _r_axis: Optional[np.ndarray] = PrivateAttr(default=None)
    _theta_axis: Optional[np.ndarray] = PrivateAttr(default=None)
    _index: Optional[dict] = PrivateAttr(default=None)

    def check_grid(self) -> None:
        """Index the points; raises AlignmentError unless they tile a rectangular grid"""
        keys = [(round(p.r, TAG_DECIMALS), round(p.theta, TAG_DECIMALS)) for p in self.points]
        seen, duplicates = set(), []
        for key in keys:
            if key in seen:
                duplicates.append(key)
            seen.add(key)
        if duplicates:
            raise AlignmentError("manifest lists a geometry more than once", duplicates)
        r_axis = sorted({k[0] for k in keys})
        theta_axis = sorted({k[1] for k in keys})
        missing = [(r, t) for r in r_axis for t in theta_axis if (r, t) not in seen]
        if missing:
            raise AlignmentError("manifest points do not cover a rectangular grid", missing)
        position = {k: n for n, k in enumerate(keys)}
        self._index = {(i, j): position[(r, t)] for i, r in enumerate(r_axis) for j, t in enumerate(theta_axis)}
        self._r_axis = np.array(r_axis)
        self._theta_axis = np.array(theta_axis)

    def _indexed(self) -> "Manifest":
        if self._index is None:
            self.check_grid()
        return self

    @property
    def r_axis(self) -> np.ndarray:
        return self._indexed()._r_axis

    @property
    def theta_axis(self) -> np.ndarray:
        return self._indexed()._theta_axis

    @property
    def shape(self) -> tuple[int, int]:
        return (self.r_axis.size, self.theta_axis.size)

    def point(self, i: int, j: int) -> ManifestPoint:
        return self.points[self._indexed()._index[(i, j)]]

    def grid_index(self, r: float, theta: float) -> tuple[int, int]:
        i = int(np.argmin(np.abs(self.r_axis - r)))
        j = int(np.argmin(np.abs(self.theta_axis - theta)))
        return i, j

    def resolve(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        if path.is_absolute() or self.base_dir is None:
            return path
        return self.base_dir / path

    def missing_files(self, need_displaced: bool = True) -> list[tuple[tuple[float, float], str]]:
        """(geometry tag, path) of every referenced file that does not exist"""
        missing = []
        for point in self.points:
            if need_displaced:
                absent = [k for k in DISPLACEMENT_KEYS if k not in point.displaced]
                missing.extend((point.tag, f"<no {k} entry>") for k in absent)
            files = point.files() if need_displaced else [point.center]
            missing.extend((point.tag, f) for f in files if not self.resolve(f).is_file())
        return missing

    def require_files(self, need_displaced: bool = True) -> None:
        missing = self.missing_files(need_displaced)
        if missing:
            tag, path = missing[0]
            raise MissingArtifactError(f"{len(missing)} manifest files missing, first {path}", tag)


class ManifestUtils:

    def load_manifest(
        path: Annotated[str | os.PathLike, "Manifest JSON file"],
    ) -> Manifest:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as e:
            raise MissingArtifactError(f"cannot read manifest {path}: {e}", str(path)) from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"manifest {path} is not valid JSON: {e}") from e
        try:
            manifest = Manifest.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(f"manifest {path} violates the schema:\n{e}") from e
        manifest.base_dir = path.parent
        manifest.check_grid()
        logger.debug("manifest %s: %d x %d points", path, *manifest.shape)
        return manifest

    def write_manifest(
        manifest: Annotated[Manifest, "Manifest to serialise"],
        save_path: Annotated[str | os.PathLike, "Destination JSON file"],
    ) -> None:
        save_path = Path(save_path)
        save_path.parent.mkdir(parents=True, exist_ok=True)
        save_path.write_text(manifest.model_dump_json(indent=2) + "\n")
        logger.info("manifest with %d points saved to %s", len(manifest.points), save_path)
