"""
Coarse PES / NAC tables and their interpolation onto the fine dynamics grid.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Annotated, Optional

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.interpolate import make_interp_spline
from scipy.sparse.linalg import spsolve

from config import GridSpec
from exceptions import AlignmentError, DimensionError, ExtrapolationError, NumericError

logger = logging.getLogger(__name__)

MAX_MASKED_FRACTION = 0.2
HULL_TOLERANCE = 1e-9
KEY_DECIMALS = 9

ENERGY_FIELDS = ("E_X", "E_A", "E_B")
NAC_FIELDS = ("F_r", "F_theta")
FIELDS = ENERGY_FIELDS + NAC_FIELDS


def _strictly_increasing(axis: np.ndarray) -> bool:
    return axis.ndim == 1 and axis.size >= 1 and bool(np.all(np.diff(axis) > 0))


@dataclass
class SurfaceSet:
    """Adiabatic energies (hartree) and NAC components on the coarse (r, theta) grid"""

    r: np.ndarray
    theta: np.ndarray
    E_X: np.ndarray
    E_A: np.ndarray
    E_B: np.ndarray
    F_r: np.ndarray
    F_theta: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if not (_strictly_increasing(self.r) and _strictly_increasing(self.theta)):
            raise AlignmentError("coarse axes must be strictly increasing")
        shape = (self.r.size, self.theta.size)
        for name in FIELDS + ("mask",):
            value = np.asarray(getattr(self, name), dtype=bool if name == "mask" else float)
            if value.shape != shape:
                raise DimensionError(f"{name} has shape {value.shape}, axes give {shape}")
            setattr(self, name, value)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.r.size, self.theta.size)

    @property
    def masked_fraction(self) -> float:
        return float(self.mask.mean())


@dataclass
class FineSurfaces:
    """Surfaces on the dynamics grid; E_X drives the initial packet"""

    r: np.ndarray
    theta: np.ndarray
    E_X: np.ndarray
    E_A: np.ndarray
    E_B: np.ndarray
    F_r: np.ndarray
    F_theta: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        shape = (self.r.size, self.theta.size)
        for name in FIELDS:
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != shape:
                raise DimensionError(f"{name} has shape {value.shape}, axes give {shape}")
            setattr(self, name, value)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.r.size, self.theta.size)

    def check_grid(self, grid: GridSpec, tolerance: float = 1e-9) -> None:
        if self.shape != grid.shape:
            raise DimensionError(f"surfaces on a {self.shape} grid, dynamics grid is {grid.shape}")
        if not (
            np.allclose(self.r, grid.r_axis(), rtol=0, atol=tolerance)
            and np.allclose(self.theta, grid.theta_axis(), rtol=0, atol=tolerance)
        ):
            raise DimensionError("surface axes differ from the dynamics grid axes")

    def negated_nac(self) -> "FineSurfaces":
        return replace(self, F_r=-self.F_r, F_theta=-self.F_theta)


def assemble(
    energy_table: Annotated[pd.DataFrame, "Rows of r, theta, E0, E1, E2, converged"],
    nac_table: Annotated[pd.DataFrame, "Rows of r, theta, F_r, F_theta, masked"],
    state_pair: Annotated[tuple[int, int], "(p, q) energy columns read as (A, B); E0 is X"] = (1, 2),
) -> SurfaceSet:
    """Merge the two coarse tables; the mask is the union of unconverged and degenerate points."""
    p, q = state_pair
    if 0 in (p, q) or p == q:
        raise AlignmentError(f"state pair {state_pair} must name two distinct excited states")
    absent = [c for c in ("E0", f"E{p}", f"E{q}", "converged") if c not in energy_table.columns]
    absent += [c for c in ("F_r", "F_theta", "masked") if c not in nac_table.columns]
    if absent:
        raise AlignmentError("coarse tables lack columns", absent)

    def keyed(table: pd.DataFrame, name: str) -> pd.DataFrame:
        table = table.assign(_r=table["r"].round(KEY_DECIMALS), _t=table["theta"].round(KEY_DECIMALS))
        duplicates = table[table.duplicated(["_r", "_t"], keep=False)]
        if len(duplicates):
            raise AlignmentError(f"duplicate points in the {name} table", list(zip(duplicates["r"], duplicates["theta"])))
        return table.set_index(["_r", "_t"])

    energy = keyed(energy_table, "energy")
    nac = keyed(nac_table, "NAC")
    offenders = sorted(set(energy.index) ^ set(nac.index))
    if offenders:
        raise AlignmentError("energy and NAC tables cover different points", offenders)

    r = np.array(sorted({k[0] for k in energy.index}))
    theta = np.array(sorted({k[1] for k in energy.index}))
    missing = [(a, b) for a in r for b in theta if (a, b) not in energy.index]
    if missing:
        raise AlignmentError("coarse points do not form a rectangular grid", missing)

    index = pd.MultiIndex.from_product([r, theta])
    energy = energy.reindex(index)
    nac = nac.reindex(index)
    shape = (r.size, theta.size)

    def grid(frame, column):
        return frame[column].to_numpy(dtype=float).reshape(shape)

    unconverged = ~energy["converged"].astype(bool).to_numpy().reshape(shape)
    degenerate = nac["masked"].astype(bool).to_numpy().reshape(shape)
    return SurfaceSet(
        r=r,
        theta=theta,
        E_X=grid(energy, "E0"),
        E_A=grid(energy, f"E{p}"),
        E_B=grid(energy, f"E{q}"),
        F_r=grid(nac, "F_r"),
        F_theta=grid(nac, "F_theta"),
        mask=unconverged | degenerate,
    )


def harmonic_fill(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Replace masked entries by the discrete harmonic (Laplace) interpolant of the rest"""
    values = np.array(values, dtype=float)
    if not mask.any():
        return values
    if mask.all():
        raise NumericError("cannot fill a field with no valid points")
    n_r, n_theta = values.shape
    unknown = -np.ones(values.shape, dtype=int)
    cells = np.argwhere(mask)
    unknown[mask] = np.arange(len(cells))
    rows, cols, data = [], [], []
    rhs = np.zeros(len(cells))
    for k, (i, j) in enumerate(cells):
        degree = 0
        for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if not (0 <= ni < n_r and 0 <= nj < n_theta):
                continue
            degree += 1
            if mask[ni, nj]:
                rows.append(k)
                cols.append(unknown[ni, nj])
                data.append(-1.0)
            else:
                rhs[k] += values[ni, nj]
        rows.append(k)
        cols.append(k)
        data.append(float(degree))
    system = sparse.csr_array((data, (rows, cols)), shape=(len(cells), len(cells)))
    values[mask] = spsolve(system.tocsc(), rhs)
    return values


def fill_masked(ss: SurfaceSet, gap_floor: float = 1e-5) -> tuple[SurfaceSet, list[tuple[float, float]]]:
    """
    Fill masked coarse points. Energies are filled harmonically; NACs through the
    smooth product F * (E_B - E_A), divided by the filled gap where it exceeds the floor.
    """
    mask = ss.mask
    filled_points = [(float(ss.r[i]), float(ss.theta[j])) for i, j in np.argwhere(mask)]
    if not filled_points:
        return ss, []
    energies = {name: harmonic_fill(getattr(ss, name), mask) for name in ENERGY_FIELDS}
    gap = energies["E_B"] - energies["E_A"]
    nacs = {}
    for name in NAC_FIELDS:
        raw = getattr(ss, name)
        product = harmonic_fill(np.where(mask, 0.0, raw * gap), mask)
        direct = harmonic_fill(np.where(mask, 0.0, raw), mask)
        nacs[name] = np.where(
            mask,
            np.where(np.abs(gap) > gap_floor, product / np.where(np.abs(gap) > gap_floor, gap, 1.0), direct),
            raw,
        )
    logger.info("filled %d masked coarse points", len(filled_points))
    return replace(ss, **energies, **nacs), filled_points


def _spline_axis(coarse: np.ndarray, fine: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
    if coarse.size == 1:
        if not np.allclose(fine, coarse[0], rtol=0, atol=HULL_TOLERANCE):
            raise ExtrapolationError(f"single coarse value {coarse[0]} cannot cover the fine axis")
        return np.repeat(values, fine.size, axis=axis)
    k = min(3, coarse.size - 1)
    return make_interp_spline(coarse, values, k=k, axis=axis)(fine)


def interpolate_field(r: np.ndarray, theta: np.ndarray, values: np.ndarray, r_fine: np.ndarray, theta_fine: np.ndarray) -> np.ndarray:
    """Tensor-product not-a-knot cubic spline (degree lowered on short axes)"""
    along_r = _spline_axis(r, r_fine, values, axis=0)
    return _spline_axis(theta, theta_fine, along_r, axis=1)


def interpolate(
    ss: Annotated[SurfaceSet, "Assembled coarse surfaces"],
    fine_spec: Annotated[GridSpec, "Dynamics grid"],
    gap_floor: Annotated[float, "NAC gap floor (hartree)"] = 1e-5,
) -> FineSurfaces:
    if ss.masked_fraction >= MAX_MASKED_FRACTION:
        raise NumericError(
            f"{ss.masked_fraction:.0%} of coarse points are masked; refusing to interpolate (limit {MAX_MASKED_FRACTION:.0%})"
        )
    r_fine, theta_fine = fine_spec.r_axis(), fine_spec.theta_axis()
    for name, coarse, fine in (("r", ss.r, r_fine), ("theta", ss.theta, theta_fine)):
        if fine[0] < coarse[0] - HULL_TOLERANCE or fine[-1] > coarse[-1] + HULL_TOLERANCE:
            raise ExtrapolationError(
                f"fine {name} range [{fine[0]:.4f}, {fine[-1]:.4f}] leaves the coarse hull [{coarse[0]:.4f}, {coarse[-1]:.4f}]"
            )
    filled, filled_points = fill_masked(ss, gap_floor)
    values = {name: interpolate_field(ss.r, ss.theta, getattr(filled, name), r_fine, theta_fine) for name in FIELDS}
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            raise NumericError(f"interpolated {name} is not finite")
    metadata = {
        "coarse_shape": list(ss.shape),
        "filled_points": [list(p) for p in filled_points],
        "method": "tensor-product not-a-knot cubic spline",
    }
    return FineSurfaces(r=r_fine, theta=theta_fine, metadata=metadata, **values)
