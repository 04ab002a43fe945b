import numpy as np
import pytest

from beltrami_lab.grid import DerivativePair, GridField, coordinates, from_function, load, zeros


def test_coordinates_layout():
    Z = coordinates(2.0, 16)
    h = 4.0 / 16
    assert Z[0, 0] == -2 - 2j
    assert Z[0, 1] == -2 + h - 2j          # column index moves the real part
    assert Z[1, 0] == -2 + 1j * (-2 + h)   # row index moves the imaginary part
    assert Z[8, 8] == 0


def test_validation():
    with pytest.raises(ValueError):
        GridField(2.0, np.zeros((12, 12), dtype=complex))     # not >= 16
    with pytest.raises(ValueError):
        GridField(2.0, np.zeros((24, 24), dtype=complex))     # not a power of two
    with pytest.raises(ValueError):
        GridField(-1.0, np.zeros((16, 16), dtype=complex))
    bad = np.zeros((16, 16), dtype=complex)
    bad[3, 3] = np.nan
    with pytest.raises(ValueError):
        GridField(2.0, bad)


def test_fields_are_immutable():
    f = zeros(2.0, 16)
    with pytest.raises(ValueError):
        f.data[0, 0] = 1.0


def test_binary_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    f = GridField(1.5, rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32)))
    path = tmp_path / "field.blgf"
    f.save(path)
    g = load(path)
    assert g.L == f.L and g.n == f.n
    np.testing.assert_array_equal(g.data, f.data)
    # header layout: magic, u32 n, f64 L
    raw = path.read_bytes()
    assert raw[:4] == b"BLGF"
    assert int.from_bytes(raw[4:8], "little") == 32
    assert len(raw) == 16 + 32 * 32 * 16


def test_csv_export(tmp_path):
    f = from_function(1.0, 16, lambda z: z)
    path = tmp_path / "field.csv"
    f.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "x,y,re,im"
    assert len(rows) == 1 + 16 * 16


def test_bilinear_interp_exact_on_bilinear_data():
    f = from_function(2.0, 32, lambda z: 3 * z.real + 1j * z.imag - 2)
    pts = np.array([0.13 + 0.4j, -1.1 - 0.77j, 0.0j])
    expected = 3 * pts.real + 1j * pts.imag - 2
    np.testing.assert_allclose(f.interp(pts), expected, atol=1e-13)


def test_derivative_pair_geometry_check():
    with pytest.raises(ValueError):
        DerivativePair(zeros(1.0, 16), zeros(2.0, 16))
