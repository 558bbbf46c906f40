import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from q1dshock.errors import InvalidNozzle, OutOfDomain
from q1dshock.nozzle import Nozzle, area, check_widening, darea, nozzle_from_config


def test_area_examples():
    assert area(Nozzle.cone(1, 3), 2.0) == 2.0
    assert area(Nozzle.sphere(1, 3), 3.0) == 9.0
    assert area(Nozzle.constant(0, 5), 4.2) == 1.0


def test_darea_examples():
    assert darea(Nozzle.sphere(1, 3), 3.0) == 6.0
    assert darea(Nozzle.constant(0, 5), 1.3) == 0.0
    assert darea(Nozzle.polynomial([1, 1], 1, 3), 2.7) == 1.0


def test_check_widening_examples():
    assert check_widening(Nozzle.polynomial([1, 1], 1, 3), 2.0)
    assert not check_widening(Nozzle.polynomial([3, -1], 1, 2.9), 2.0)
    assert check_widening(Nozzle.sphere(1, 2), 1.5)


def test_out_of_domain():
    noz = Nozzle.polynomial([1, 1], 1, 3)
    area(noz, 3.0 + 0.5 * noz.margin)  # inside the extension margin
    with pytest.raises(OutOfDomain):
        area(noz, 3.0 + 2 * noz.margin)
    with pytest.raises(OutOfDomain):
        darea(noz, 0.0)


def test_nonpositive_area_rejected():
    with pytest.raises(InvalidNozzle):
        Nozzle.polynomial([2, -1], 1, 3)  # a = 2 - x hits zero at x = 2
    with pytest.raises(InvalidNozzle):
        Nozzle.tabulated([0, 1, 2], [1, -0.1, 1])
    with pytest.raises(InvalidNozzle):
        Nozzle.constant(3, 1)


shapes = st.sampled_from(["cone", "sphere", "poly", "table"])


@given(shapes, st.floats(1.05, 2.95))
def test_darea_matches_finite_difference(kind, x):
    if kind == "poly":
        noz = Nozzle.polynomial([2.0, 0.3, -0.05, 0.01], 1, 3)
    elif kind == "table":
        xs = np.linspace(1, 3, 41)
        noz = Nozzle.tabulated(xs, 1 + 0.3 * np.sin(xs))
    else:
        noz = getattr(Nozzle, kind)(1, 3)
    # PCHIP is only C1, so at a knot the central difference is first order in h
    h = 1e-7 if kind == "table" else 1e-5
    fd = (noz.a(x + h) - noz.a(x - h)) / (2 * h)
    assert darea(noz, x) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_tabulated_is_c1_and_csv_roundtrip(tmp_path):
    xs = np.linspace(1, 3, 21)
    vals = 1 + xs**2 / 4
    path = tmp_path / "a.csv"
    np.savetxt(path, np.column_stack([xs, vals]), delimiter=",", header="x,a")
    noz = Nozzle.from_csv(path)
    np.testing.assert_allclose(noz.a(xs), vals, rtol=1e-14)
    # derivative continuous across a knot
    k = xs[10]
    assert noz.da(k - 1e-9) == pytest.approx(noz.da(k + 1e-9), rel=1e-6)


def test_nozzle_from_config():
    noz = nozzle_from_config({"shape": "polynomial", "coeffs": [1, 1], "l": 1, "L": 3})
    assert noz.a(2.0) == 3.0
    noz = nozzle_from_config({"shape": "tabulated", "x": [0, 1, 2], "a": [1, 2, 3]})
    assert noz.l == 0 and noz.L == 2
    with pytest.raises(InvalidNozzle):
        nozzle_from_config({"shape": "cone", "l": 1})
