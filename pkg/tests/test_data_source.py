import json

import numpy as np
import pandas as pd
import pytest

from conftest import flat_surfaces
from data_source.manifest_utils import DISPLACEMENT_KEYS, Manifest, ManifestPoint, ManifestUtils
from data_source.table_utils import TableUtils
from exceptions import AlignmentError, ConfigError, FormatError, MissingArtifactError
from functional.nac import NacField
from functional.ssvqe import GeometryResult
from utils import provenance_header, read_header


def write_points(path, points, **extra):
    path.write_text(json.dumps({"points": points, **extra}))
    return path


def point(r, theta, displaced=True):
    entry = {"r": r, "theta": theta, "center": f"c_{r}_{theta}.fcidump"}
    if displaced:
        entry["displaced"] = {k: f"d_{r}_{theta}_{k}.fcidump" for k in DISPLACEMENT_KEYS}
    return entry


def test_manifest_grid_indexing(tmp_path):
    points = [point(r, t) for t in (2.0, 1.5) for r in (2.2, 1.8)]
    manifest = ManifestUtils.load_manifest(write_points(tmp_path / "manifest.json", points, delta_r=0.002))
    assert manifest.shape == (2, 2)
    np.testing.assert_array_equal(manifest.r_axis, [1.8, 2.2])
    np.testing.assert_array_equal(manifest.theta_axis, [1.5, 2.0])
    assert manifest.point(0, 1).tag == (1.8, 2.0)
    assert manifest.grid_index(2.2, 1.5) == (1, 0)
    assert manifest.delta_r == 0.002
    assert manifest.resolve("x.fcidump") == tmp_path / "x.fcidump"


def test_manifest_missing_files(tmp_path):
    entry = point(1.9, 1.8)
    del entry["displaced"]["Z2-"]
    (tmp_path / entry["center"]).write_text("")
    for name in entry["displaced"].values():
        (tmp_path / name).write_text("")
    manifest = ManifestUtils.load_manifest(write_points(tmp_path / "manifest.json", [entry]))
    assert manifest.missing_files() == [((1.9, 1.8), "<no Z2- entry>")]
    assert manifest.missing_files(need_displaced=False) == []
    with pytest.raises(MissingArtifactError) as info:
        manifest.require_files()
    assert info.value.tag == (1.9, 1.8)


def test_manifest_errors(tmp_path):
    with pytest.raises(MissingArtifactError):
        ManifestUtils.load_manifest(tmp_path / "absent.json")
    (tmp_path / "bad.json").write_text("{points: }")
    with pytest.raises(ConfigError, match="not valid JSON"):
        ManifestUtils.load_manifest(tmp_path / "bad.json")
    with pytest.raises(ConfigError, match="schema"):
        ManifestUtils.load_manifest(write_points(tmp_path / "empty.json", []))
    unknown = point(1.9, 1.8)
    unknown["displaced"]["X1+"] = "x.fcidump"
    with pytest.raises(ConfigError):
        ManifestUtils.load_manifest(write_points(tmp_path / "keys.json", [unknown]))
    with pytest.raises(AlignmentError, match="more than once"):
        ManifestUtils.load_manifest(write_points(tmp_path / "dup.json", [point(1.9, 1.8), point(1.9, 1.8)]))
    with pytest.raises(AlignmentError, match="rectangular") as info:
        ManifestUtils.load_manifest(write_points(tmp_path / "holes.json", [point(1.8, 1.5), point(2.2, 2.0)]))
    assert (1.8, 2.0) in info.value.offenders


def test_manifest_written_and_read(tmp_path):
    manifest = Manifest(points=[ManifestPoint(**point(1.9, 1.8))], delta_r=0.005)
    ManifestUtils.write_manifest(manifest, tmp_path / "sub" / "m.json")
    again = ManifestUtils.load_manifest(tmp_path / "sub" / "m.json")
    assert again.points == manifest.points
    assert again.delta_r == 0.005
    assert again.base_dir == tmp_path / "sub"


def test_surface_bundle_round_trip(tmp_path):
    fs = flat_surfaces(5, 7)
    fs.metadata = {"method": "test"}
    path = tmp_path / "surfaces.bin"
    TableUtils.write_surface_bundle(fs, path, {"stage": "interp"})
    again = TableUtils.read_surface_bundle(path)
    assert again.shape == (5, 7)
    for name in ("r", "theta", "E_X", "E_A", "E_B", "F_r", "F_theta"):
        np.testing.assert_array_equal(getattr(again, name), getattr(fs, name))
    assert again.metadata == {"method": "test"}


def test_surface_bundle_rejects_damage(tmp_path):
    path = tmp_path / "surfaces.bin"
    TableUtils.write_surface_bundle(flat_surfaces(4, 4), path)
    raw = path.read_bytes()
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    (tmp_path / "magic.bin").write_bytes(b"XX" + raw[2:])
    (tmp_path / "header.bin").write_bytes(raw.split(b"\n")[0] + b"\n{not json\n")
    for name in ("short.bin", "magic.bin", "header.bin"):
        with pytest.raises(FormatError):
            TableUtils.read_surface_bundle(tmp_path / name)
    with pytest.raises(MissingArtifactError):
        TableUtils.read_surface_bundle(tmp_path / "absent.bin")


def test_snapshot_grid_round_trip():
    r, theta = np.array([1.0, 1.5, 2.0]), np.array([0.5, 1.0])
    density_B = np.arange(6.0).reshape(3, 2)
    table = TableUtils.snapshot_table(r, theta, density_B, 0.5 * density_B)
    shuffled = table.sample(frac=1.0, random_state=0)
    r2, theta2, b, a = TableUtils.snapshot_grids(shuffled)
    np.testing.assert_array_equal(r2, r)
    np.testing.assert_array_equal(theta2, theta)
    np.testing.assert_array_equal(b, density_B)
    np.testing.assert_array_equal(a, 0.5 * density_B)
    with pytest.raises(FormatError):
        TableUtils.snapshot_grids(table.iloc[:-1])


def test_energy_table_and_records(tmp_path):
    manifest = Manifest(points=[ManifestPoint(**point(r, t, False)) for r in (1.8, 2.0) for t in (1.6, 1.9)])
    results = {}
    for i, r in enumerate(manifest.r_axis):
        for j, t in enumerate(manifest.theta_axis):
            results[(i, j)] = GeometryResult(
                geometry_tag=(float(r), float(t)),
                energies=np.array([-1.0, -0.5, -0.25]) + 0.1 * i + 0.01 * j,
                params=np.array([0.1, -0.2 / 3, np.pi]),
                objective=0.0,
                converged=True,
                n_iterations=12,
                gradient_norm=1e-7,
                permutation=(0, 2, 1),
            )
    table = TableUtils.energy_table(results)
    assert list(table[["r", "theta"]].itertuples(index=False, name=None)) == [(1.8, 1.6), (1.8, 1.9), (2.0, 1.6), (2.0, 1.9)]
    TableUtils.save_table(table, "energies", tmp_path / "energies.csv", provenance_header("surfaces", seed=3))
    loaded = TableUtils.load_table(tmp_path / "energies.csv")
    assert read_header(tmp_path / "energies.csv")["seed"] == "3"
    records = TableUtils.energy_records(loaded, manifest)
    energies, params, permutation = records[(1, 0)]
    np.testing.assert_array_equal(energies, results[(1, 0)].energies)
    np.testing.assert_array_equal(params, results[(1, 0)].params)
    assert permutation == (0, 2, 1)
    with pytest.raises(AlignmentError):
        TableUtils.energy_records(loaded.iloc[:-1], manifest)
    shifted = loaded.assign(r=loaded["r"] + 0.05)
    with pytest.raises(AlignmentError, match="not a manifest point"):
        TableUtils.energy_records(shifted, manifest)


def test_nac_table_layout():
    mask = np.array([[False, True], [False, False]])
    field = NacField(np.array([1.0, 2.0]), np.array([0.5, 1.5]), np.ones((2, 2)), 2 * np.ones((2, 2)), mask)
    table = TableUtils.nac_table(field)
    assert list(table.columns) == ["r", "theta", "F_r", "F_theta", "residual_r", "residual_theta", "masked", "warning", "flipped"]
    assert table["masked"].tolist() == [False, True, False, False]
    assert table.loc[1, ["r", "theta"]].tolist() == [1.0, 1.5]
    assert isinstance(table, pd.DataFrame)
