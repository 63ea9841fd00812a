import json
import logging
import os
from pathlib import Path
from typing import Annotated, Mapping, Optional

import numpy as np
import pandas as pd

from exceptions import AlignmentError, FormatError, MissingArtifactError
from functional.surfaces import FIELDS, FineSurfaces
from utils import SavePathType, read_table, save_output

logger = logging.getLogger(__name__)

BUNDLE_MAGIC = b"NACDYN-SURFACES 1\n"
BUNDLE_DTYPE = "<f8"

NAC_COLUMNS = ["r", "theta", "F_r", "F_theta", "residual_r", "residual_theta", "masked", "warning", "flipped"]
POPULATION_COLUMNS = ["t_fs", "P_B", "P_A", "absorbed_A", "absorbed_B", "total"]


def _join(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _require(path: Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"missing artifact {path}", str(path))
    return path


class TableUtils:

    def energy_table(
        results: Annotated[Mapping, "Grid index -> GeometryResult"],
    ) -> pd.DataFrame:
        """One row per coarse point in (r, theta) order; params and permutation as space-separated text"""
        rows = []
        for index in sorted(results):
            res = results[index]
            row = {"r": res.geometry_tag[0], "theta": res.geometry_tag[1]}
            row.update({f"E{k}": float(e) for k, e in enumerate(res.energies)})
            row.update(
                objective=res.objective,
                converged=bool(res.converged),
                n_iterations=int(res.n_iterations),
                gradient_norm=res.gradient_norm,
                restarted=bool(res.restarted),
                local_minimum=bool(res.local_minimum),
                permutation=" ".join(str(p) for p in res.permutation),
                params=_join(res.params),
            )
            rows.append(row)
        return pd.DataFrame(rows)

    def energy_records(
        table: Annotated[pd.DataFrame, "Energy table"],
        manifest: Annotated[object, "Manifest whose grid indexes the rows"],
    ) -> dict[tuple[int, int], tuple[np.ndarray, np.ndarray, tuple[int, ...]]]:
        """Grid index -> (energies, params, permutation), the input of the NAC stage"""
        energy_columns = sorted((c for c in table.columns if c[:1] == "E" and c[1:].isdigit()), key=lambda c: int(c[1:]))
        records = {}
        for row in table.itertuples(index=False):
            row = row._asdict()
            index = manifest.grid_index(row["r"], row["theta"])
            r, theta = manifest.r_axis[index[0]], manifest.theta_axis[index[1]]
            if abs(r - row["r"]) > 1e-9 or abs(theta - row["theta"]) > 1e-9:
                raise AlignmentError("energy table row is not a manifest point", [(row["r"], row["theta"])])
            energies = np.array([row[c] for c in energy_columns], dtype=float)
            params = np.array([float(v) for v in str(row["params"]).split()], dtype=float)
            permutation = tuple(int(v) for v in str(row["permutation"]).split())
            records[index] = (energies, params, permutation)
        if len(records) != manifest.shape[0] * manifest.shape[1]:
            raise AlignmentError(f"energy table covers {len(records)} of {manifest.shape[0] * manifest.shape[1]} manifest points")
        return records

    def nac_table(
        field: Annotated[object, "Sign-fixed NacField"],
    ) -> pd.DataFrame:
        R, T = np.meshgrid(field.r, field.theta, indexing="ij")
        table = pd.DataFrame(
            {
                "r": R.ravel(),
                "theta": T.ravel(),
                "F_r": field.F_r.ravel(),
                "F_theta": field.F_theta.ravel(),
                "residual_r": field.residual_r.ravel(),
                "residual_theta": field.residual_theta.ravel(),
                "masked": field.mask.ravel(),
                "warning": field.warning.ravel(),
                "flipped": field.flipped.ravel(),
            }
        )
        return table[NAC_COLUMNS]

    def load_table(
        path: Annotated[str | os.PathLike, "CSV written by save_output"],
    ) -> pd.DataFrame:
        return read_table(_require(path))

    def save_table(
        table: pd.DataFrame,
        tag: str,
        save_path: SavePathType,
        header: Optional[Mapping[str, str]] = None,
    ) -> None:
        save_output(table, tag, save_path, header)

    def write_surface_bundle(
        fs: Annotated[FineSurfaces, "Fine surfaces"],
        save_path: SavePathType,
        header: Optional[Mapping[str, str]] = None,
    ) -> None:
        """Magic line, one JSON header line, then little-endian float64 arrays in row-major order"""
        save_path = Path(save_path)
        save_path.parent.mkdir(parents=True, exist_ok=True)
        meta = {
            "n_r": int(fs.r.size),
            "n_theta": int(fs.theta.size),
            "arrays": ["r", "theta", *FIELDS],
            "dtype": BUNDLE_DTYPE,
            "order": "C",
            "provenance": dict(header or {}),
            "metadata": fs.metadata,
        }
        with open(save_path, "wb") as f:
            f.write(BUNDLE_MAGIC)
            f.write(json.dumps(meta, sort_keys=True).encode() + b"\n")
            for name in meta["arrays"]:
                f.write(np.ascontiguousarray(getattr(fs, name), dtype=BUNDLE_DTYPE).tobytes())
        logger.info("fine-surface bundle saved to %s", save_path)

    def read_surface_bundle(
        path: Annotated[str | os.PathLike, "Bundle written by write_surface_bundle"],
    ) -> FineSurfaces:
        raw = _require(path).read_bytes()
        if not raw.startswith(BUNDLE_MAGIC):
            raise FormatError(f"{path} is not a surface bundle (bad magic line)")
        rest = raw[len(BUNDLE_MAGIC):]
        line, newline, payload = rest.partition(b"\n")
        if not newline:
            raise FormatError(f"{path}: truncated bundle header")
        try:
            meta = json.loads(line)
            n_r, n_theta, names = int(meta["n_r"]), int(meta["n_theta"]), list(meta["arrays"])
        except (ValueError, KeyError, TypeError) as e:
            raise FormatError(f"{path}: unreadable bundle header ({e})") from e
        if meta.get("dtype") != BUNDLE_DTYPE or set(names) != {"r", "theta", *FIELDS}:
            raise FormatError(f"{path}: unsupported bundle layout")
        sizes = {name: n_r if name == "r" else n_theta if name == "theta" else n_r * n_theta for name in names}
        itemsize = np.dtype(BUNDLE_DTYPE).itemsize
        if len(payload) != itemsize * sum(sizes.values()):
            raise FormatError(f"{path}: payload holds {len(payload)} bytes, header implies {itemsize * sum(sizes.values())}")
        arrays, offset = {}, 0
        for name in names:
            count = sizes[name]
            values = np.frombuffer(payload, dtype=BUNDLE_DTYPE, count=count, offset=offset).astype(float)
            arrays[name] = values if name in ("r", "theta") else values.reshape(n_r, n_theta)
            offset += count * itemsize
        return FineSurfaces(metadata=meta.get("metadata", {}), **arrays)

    def snapshot_table(
        r: np.ndarray,
        theta: np.ndarray,
        density_B: np.ndarray,
        density_A: np.ndarray,
    ) -> pd.DataFrame:
        R, T = np.meshgrid(r, theta, indexing="ij")
        return pd.DataFrame(
            {"r": R.ravel(), "theta": T.ravel(), "density_B": density_B.ravel(), "density_A": density_A.ravel()}
        )

    def snapshot_grids(
        table: Annotated[pd.DataFrame, "Snapshot table"],
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(r axis, theta axis, |chi_B|^2, |chi_A|^2) with rows along r"""
        r = np.unique(table["r"].to_numpy())
        theta = np.unique(table["theta"].to_numpy())
        if len(table) != r.size * theta.size:
            raise FormatError("snapshot table is not a full grid")
        ordered = table.sort_values(["r", "theta"])
        shape = (r.size, theta.size)
        return (
            r,
            theta,
            ordered["density_B"].to_numpy().reshape(shape),
            ordered["density_A"].to_numpy().reshape(shape),
        )
