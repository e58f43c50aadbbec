import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gnsflow.errors import DomainError, NonIntegrableError
from gnsflow.profiles import barenblatt
from gnsflow.radial import (ProfileFormatError, RadialFunction, build_grid, differentiate, evaluate_at,
                            fit_tail_exponent, integrate_radial, load_profile_csv, quadrature_weights,
                            read_profile_csv, sphere_area, write_profile_csv)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_grid_validation():
    build_grid(2, 3, 1.0)
    with pytest.raises(DomainError):
        build_grid(2, 2, 1.0)
    with pytest.raises(DomainError):
        build_grid(2, 10, -1.0)


def test_barenblatt_moments(p22, grid22):
    B = barenblatt(p22, p22.mass, 1.0, grid22)
    assert integrate_radial(B) == pytest.approx(math.pi / 3, rel=1e-11)
    assert integrate_radial(B, 2) == pytest.approx(math.pi / 6, rel=1e-11)


def test_gaussian_no_tail():
    g = build_grid(3, 400, 12.0)
    f = RadialFunction(g, np.exp(-g.nodes ** 2))
    assert integrate_radial(f, tail=False) == pytest.approx(math.pi ** 1.5, rel=1e-12)


def test_weights_are_positive_sum(grid22):
    w = quadrature_weights(grid22)
    assert np.isfinite(w).all()
    # integrates r^0 dr exactly
    assert w.sum() == pytest.approx(grid22.R, rel=1e-12)


def test_non_integrable_tail():
    g = build_grid(2, 200, 50.0)
    f = RadialFunction(g, (1 + g.nodes ** 2) ** -1.0, -2.0)
    with pytest.raises(NonIntegrableError) as exc:
        integrate_radial(f, 2)
    assert exc.value.tail_exponent == -2.0


@given(st.floats(-12.0, -3.0))
def test_tail_exponent_fit(e):
    r = np.linspace(50, 500, 50)
    assert fit_tail_exponent(r, 3.0 * r ** e) == pytest.approx(e, abs=1e-8)


def test_derivative_of_barenblatt(p22, grid22):
    B = barenblatt(p22, p22.mass, 1.0, grid22)
    dB = differentiate(B)
    # B_1 = (1 + r^2)^-4, B_1'(1) = -8 * 2^-5
    assert float(evaluate_at(dB, np.array([1.0]))[0]) == pytest.approx(-0.25, abs=1e-6)
    fd = differentiate(B, method="fd2")
    assert np.max(np.abs(fd.values - dB.values)) < 1e-2
    with pytest.raises(DomainError):
        differentiate(B, method="nope")


@given(st.floats(0.0, 300.0))
def test_evaluate_at_matches_closed_form(p22, grid22, x):
    B = barenblatt(p22, p22.mass, 1.0, grid22)
    got = float(evaluate_at(B, np.array([x]))[0])
    assert got == pytest.approx((1 + x * x) ** -4, rel=1e-7)


def test_values_read_only(grid22):
    f = RadialFunction(grid22, np.ones(grid22.n))
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_arithmetic(grid22):
    f = RadialFunction(grid22, np.exp(-grid22.nodes))
    assert np.allclose((f + f).values, (f * 2.0).values)
    assert np.allclose((f - f).values, 0.0)


def test_csv_roundtrip(tmp_path, p22, grid22):
    B = barenblatt(p22, p22.mass, 1.0, grid22)
    path = tmp_path / "b.csv"
    write_profile_csv(path, B)
    r, v = read_profile_csv(path)
    assert np.array_equal(v, B.values)
    back = load_profile_csv(path, grid22)
    assert integrate_radial(back) == pytest.approx(integrate_radial(B), rel=1e-12)


def test_csv_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("r,u\n0,1\n1,abc\n2,1\n3,1\n")
    with pytest.raises(ProfileFormatError, match="line 3"):
        read_profile_csv(path)
    path.write_text("r,value\n0,1\n")
    with pytest.raises(ProfileFormatError, match="line 1"):
        read_profile_csv(path)
    path.write_text("r,u\n0,1\n1,0.5\n1,0.2\n2,0.1\n")
    with pytest.raises(ProfileFormatError, match="line 4"):
        read_profile_csv(path)
