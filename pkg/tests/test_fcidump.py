import itertools
import json

import numpy as np
import pytest

from data_source.fcidump_utils import FCIDumpUtils
from exceptions import IndexRangeError, ParseError


def test_minimal_header_and_records():
    text = " &FCI NORB=2,NELEC=2,\n &END\n 0.5 1 1 0 0\n 1.0 0 0 0 0\n"
    ints = FCIDumpUtils.parse_fcidump(text)
    assert ints.n_orbitals == 2 and ints.n_electrons == 2 and ints.ms2 == 0
    assert ints.h1[0, 0] == 0.5
    assert ints.core_energy == 1.0
    assert np.count_nonzero(ints.h1) == 1
    assert not ints.h2.any()


def test_two_electron_record_fills_all_permutations():
    ints = FCIDumpUtils.parse_fcidump(b"&FCI NORB=2, NELEC=2 /\n0.25 1 2 1 2\n")
    p, q, r, s = 0, 1, 0, 1
    for a, b, c, d in [(p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r), (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p)]:
        assert ints.h2[a, b, c, d] == 0.25
    assert np.count_nonzero(ints.h2) == 4


def test_multiline_header_and_fortran_exponent():
    text = "&FCI NORB=2,\n NELEC=3, MS2=1,\n ORBSYM=1,1,\n ISYM=1\n&END\n 1.5D-01 2 2 0 0\n"
    ints = FCIDumpUtils.parse_fcidump(text, geometry_tag=(1.8, 1.9))
    assert (ints.n_orbitals, ints.n_electrons, ints.ms2) == (2, 3, 1)
    assert ints.h1[1, 1] == pytest.approx(0.15)
    assert ints.geometry_tag == (1.8, 1.9)


def test_fixture_matches_expected_table(fixture_fcidump, data_dir):
    ints = FCIDumpUtils.read_fcidump(fixture_fcidump)
    expected = json.loads((data_dir / "h2o_cation_fixture_expected.json").read_text())
    n = expected["n_orbitals"]
    assert (ints.n_orbitals, ints.n_electrons, ints.ms2) == (n, expected["n_electrons"], expected["ms2"])
    assert ints.core_energy == pytest.approx(expected["core_energy"], abs=1e-15)

    h1 = np.zeros((n, n))
    for p, q, value in expected["h1"]:
        h1[p - 1, q - 1] = h1[q - 1, p - 1] = value
    h2 = np.zeros((n,) * 4)
    for p, q, r, s, value in expected["h2"]:
        for (i, j), (k, l) in itertools.permutations([(p - 1, q - 1), (r - 1, s - 1)]):
            for x, y in ((i, j), (j, i)):
                for z, w in ((k, l), (l, k)):
                    h2[x, y, z, w] = value
    np.testing.assert_allclose(ints.h1, h1, atol=1e-15)
    np.testing.assert_allclose(ints.h2, h2, atol=1e-15)


def test_written_file_parses_back(fixture_fcidump, tmp_path):
    ints = FCIDumpUtils.read_fcidump(fixture_fcidump)
    target = tmp_path / "copy.fcidump"
    FCIDumpUtils.write_fcidump(ints, target)
    again = FCIDumpUtils.read_fcidump(target)
    np.testing.assert_array_equal(again.h1, ints.h1)
    np.testing.assert_array_equal(again.h2, ints.h2)
    assert again.core_energy == ints.core_energy
    assert again.ms2 == ints.ms2


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("NORB=2\n", 1),
        ("&FCI NORB=2, NELEC=2\n0.5 1 1 0 0\n", 1),
        ("&FCI NELEC=2 &END\n", 1),
        ("&FCI NORB=2, NELEC=2 &END\n0.5 1 1 0\n", 2),
        ("&FCI NORB=2, NELEC=2\n&END\n0.5 1 1 0 0\nabc 1 1 0 0\n", 4),
        ("&FCI NORB=2, NELEC=2\n&END\n0.5 1 0 1 0\n", 3),
    ],
)
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(ParseError) as info:
        FCIDumpUtils.parse_fcidump(text)
    assert info.value.line_number == line
    assert f"line {line}" in str(info.value)


def test_index_out_of_range():
    with pytest.raises(IndexRangeError, match="line 2"):
        FCIDumpUtils.parse_fcidump("&FCI NORB=2, NELEC=2 &END\n0.5 3 1 0 0\n")
