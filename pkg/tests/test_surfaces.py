import numpy as np
import pandas as pd
import pytest

from config import GridSpec
from exceptions import AlignmentError, ExtrapolationError, NumericError
from functional.surfaces import FIELDS, SurfaceSet, assemble, fill_masked, harmonic_fill, interpolate


def coarse_set(r, theta, func, mask=None) -> SurfaceSet:
    R, T = np.meshgrid(r, theta, indexing="ij")
    values = {name: func(R, T) * (k + 1) for k, name in enumerate(FIELDS)}
    # keep E_B above E_A so the NAC fill sees an open gap
    values["E_B"] = values["E_A"] + 1.0
    return SurfaceSet(r=r, theta=theta, mask=np.zeros(R.shape, dtype=bool) if mask is None else mask, **values)


def tables(r, theta, unconverged=(), degenerate=()):
    rows, nac_rows = [], []
    for i, a in enumerate(r):
        for j, b in enumerate(theta):
            rows.append({"r": a, "theta": b, "E0": -1.0 + a, "E1": -0.5 + b, "E2": 0.1 * a * b, "converged": (i, j) not in unconverged})
            nac_rows.append({"r": a, "theta": b, "F_r": a - b, "F_theta": a + b, "masked": (i, j) in degenerate})
    return pd.DataFrame(rows), pd.DataFrame(nac_rows)


def test_linear_fields_are_reproduced():
    ss = coarse_set(np.linspace(1.0, 3.0, 5), np.linspace(0.5, 3.0, 6), lambda R, T: 0.3 + 1.7 * R - 0.4 * T)
    fine = interpolate(ss, GridSpec(n_r=23, n_theta=31, r_min=1.0, r_max=3.0, theta_min=0.5, theta_max=3.0))
    R, T = np.meshgrid(fine.r, fine.theta, indexing="ij")
    expected = 0.3 + 1.7 * R - 0.4 * T
    for k, name in enumerate(FIELDS):
        if name != "E_B":
            np.testing.assert_allclose(getattr(fine, name), expected * (k + 1), atol=1e-12)
    np.testing.assert_allclose(fine.E_B - fine.E_A, 1.0, atol=1e-12)


def test_same_axes_are_identity():
    rng = np.random.default_rng(0)
    grid = GridSpec(n_r=7, n_theta=9, r_min=1.0, r_max=2.5, theta_min=1.0, theta_max=2.8)
    R, T = np.meshgrid(grid.r_axis(), grid.theta_axis(), indexing="ij")
    values = {name: rng.normal(size=R.shape) for name in FIELDS}
    ss = SurfaceSet(r=grid.r_axis(), theta=grid.theta_axis(), mask=np.zeros(R.shape, dtype=bool), **values)
    fine = interpolate(ss, grid)
    for name in FIELDS:
        np.testing.assert_allclose(getattr(fine, name), values[name], atol=1e-12)


def test_nac_sign_passes_through():
    ss = coarse_set(np.linspace(1.0, 2.0, 6), np.linspace(1.0, 2.0, 6), lambda R, T: np.sin(3 * R) * T)
    grid = GridSpec(n_r=20, n_theta=20, r_min=1.0, r_max=2.0, theta_min=1.0, theta_max=2.0)
    plus = interpolate(ss, grid)
    minus = interpolate(SurfaceSet(**{**ss.__dict__, "F_r": -ss.F_r, "F_theta": -ss.F_theta}), grid)
    np.testing.assert_allclose(minus.F_r, -plus.F_r, atol=1e-14)
    np.testing.assert_allclose(minus.F_theta, -plus.F_theta, atol=1e-14)
    np.testing.assert_array_equal(minus.E_A, plus.E_A)


def test_spline_converges_at_fourth_order():
    def max_error(n):
        axis = np.linspace(1.0, 2.0, n)
        ss = coarse_set(axis, axis, lambda R, T: np.sin(R) * np.cos(T))
        fine = interpolate(ss, GridSpec(n_r=50, n_theta=50, r_min=1.0, r_max=2.0, theta_min=1.0, theta_max=2.0))
        R, T = np.meshgrid(fine.r, fine.theta, indexing="ij")
        return np.abs(fine.E_X - np.sin(R) * np.cos(T)).max()

    assert max_error(9) / max_error(17) > 8.0


def test_too_many_masked_points():
    mask = np.zeros((5, 5), dtype=bool)
    mask[0, :] = True
    ss = coarse_set(np.linspace(1.0, 2.0, 5), np.linspace(1.0, 2.0, 5), lambda R, T: R + T, mask)
    with pytest.raises(NumericError, match="masked"):
        interpolate(ss, GridSpec(n_r=8, n_theta=8, r_min=1.0, r_max=2.0, theta_min=1.0, theta_max=2.0))


def test_fine_grid_outside_hull():
    ss = coarse_set(np.linspace(1.0, 2.0, 5), np.linspace(1.0, 2.0, 5), lambda R, T: R + T)
    with pytest.raises(ExtrapolationError, match="r range"):
        interpolate(ss, GridSpec(n_r=8, n_theta=8, r_min=1.0, r_max=2.1, theta_min=1.0, theta_max=2.0))
    with pytest.raises(ExtrapolationError, match="theta range"):
        interpolate(ss, GridSpec(n_r=8, n_theta=8, r_min=1.0, r_max=2.0, theta_min=0.9, theta_max=2.0))


def test_single_masked_point_is_filled():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 2] = True
    ss = coarse_set(np.linspace(1.0, 2.0, 5), np.linspace(1.0, 2.0, 5), lambda R, T: 2.0 * R - T, mask)
    broken = SurfaceSet(**{**ss.__dict__, "E_X": np.where(mask, np.nan, ss.E_X), "F_r": np.where(mask, np.nan, ss.F_r)})
    fine = interpolate(broken, GridSpec(n_r=9, n_theta=9, r_min=1.0, r_max=2.0, theta_min=1.0, theta_max=2.0))
    assert fine.metadata["filled_points"] == [[1.5, 1.5]]
    R, T = np.meshgrid(fine.r, fine.theta, indexing="ij")
    np.testing.assert_allclose(fine.E_X, 2.0 * R - T, atol=1e-12)
    np.testing.assert_allclose(fine.F_r, 4.0 * (2.0 * R - T), atol=1e-12)


def test_fill_leaves_valid_points():
    mask = np.zeros((4, 4), dtype=bool)
    ss = coarse_set(np.linspace(1.0, 2.0, 4), np.linspace(1.0, 2.0, 4), lambda R, T: R * T, mask)
    same, filled = fill_masked(ss)
    assert same is ss and filled == []


def test_harmonic_fill_of_linear_field():
    i, j = np.meshgrid(np.arange(6), np.arange(7), indexing="ij")
    values = 0.5 * i - 1.25 * j + 3.0
    mask = np.zeros(values.shape, dtype=bool)
    mask[2:4, 2:5] = True
    filled = harmonic_fill(np.where(mask, 0.0, values), mask)
    np.testing.assert_allclose(filled, values, atol=1e-12)
    with pytest.raises(NumericError):
        harmonic_fill(values, np.ones(values.shape, dtype=bool))


def test_assemble_merges_tables():
    r, theta = [1.5, 2.0, 2.5], [1.6, 2.2]
    energy, nac = tables(r, theta, unconverged=[(0, 1)], degenerate=[(2, 0)])
    ss = assemble(energy.sample(frac=1.0, random_state=3), nac)
    np.testing.assert_array_equal(ss.r, r)
    np.testing.assert_array_equal(ss.theta, theta)
    assert ss.E_X[1, 0] == -1.0 + 2.0
    assert ss.F_theta[2, 1] == 2.5 + 2.2
    expected = np.zeros((3, 2), dtype=bool)
    expected[0, 1] = expected[2, 0] = True
    np.testing.assert_array_equal(ss.mask, expected)


def test_assemble_single_point():
    energy, nac = tables([1.9], [1.8])
    ss = assemble(energy, nac)
    assert ss.shape == (1, 1)
    assert not ss.mask.any()


def test_assemble_rejects_misaligned_tables():
    energy, nac = tables([1.5, 2.0], [1.6, 2.2])
    with pytest.raises(AlignmentError) as info:
        assemble(energy, nac.iloc[:-1])
    assert info.value.offenders == [(2.0, 2.2)]
    with pytest.raises(AlignmentError, match="rectangular"):
        assemble(energy.iloc[:-1], nac.iloc[:-1])
    with pytest.raises(AlignmentError, match="duplicate"):
        assemble(pd.concat([energy, energy.iloc[:1]]), nac)


def test_assemble_follows_state_pair():
    energy, nac = tables([1.5, 2.0], [1.6, 2.2])
    swapped = assemble(energy, nac, state_pair=(2, 1))
    default = assemble(energy, nac)
    np.testing.assert_array_equal(swapped.E_A, default.E_B)
    np.testing.assert_array_equal(swapped.E_B, default.E_A)
    np.testing.assert_array_equal(swapped.E_X, default.E_X)


def test_assemble_needs_the_pair_columns():
    energy, nac = tables([1.5, 2.0], [1.6, 2.2])
    with pytest.raises(AlignmentError) as info:
        assemble(energy.drop(columns="E2"), nac)
    assert info.value.offenders == ["E2"]
    with pytest.raises(AlignmentError, match="distinct excited states"):
        assemble(energy, nac, state_pair=(0, 1))
