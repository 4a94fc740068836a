"""Collocation node placement and basis evaluation tests."""

import numpy as np
import pytest

from splinecolloc import basis


def test_gauss_offsets_closed_forms():
    # Legendre roots mapped to [0,1]: k=1 -> {1/2}; k=2 -> 1/2 +- 1/(2*sqrt(3));
    # k=3 -> {1/2, 1/2 +- sqrt(3/5)/2}
    assert np.allclose(basis.gauss_legendre_offsets(1), [0.5], atol=1e-15)
    s3 = 0.5 / np.sqrt(3.0)
    assert np.allclose(basis.gauss_legendre_offsets(2),
                       [0.5 - s3, 0.5 + s3], atol=1e-15)
    s5 = 0.5 * np.sqrt(0.6)
    assert np.allclose(basis.gauss_legendre_offsets(3),
                       [0.5 - s5, 0.5, 0.5 + s5], atol=1e-15)


def test_gauss_offsets_symmetric_and_sorted():
    for k in range(1, 7):
        off = basis.gauss_legendre_offsets(k)
        assert len(off) == k
        assert np.all(np.diff(off) > 0)
        assert np.allclose(off + off[::-1], 1.0, atol=1e-15)


def test_gauss_offsets_range_checked():
    for bad in (0, 7):
        with pytest.raises(basis.BasisError):
            basis.gauss_legendre_offsets(bad)


def test_gauss_offsets_integrate_polynomials_exactly():
    # k nodes integrate degree 2k-1 exactly with the matching weights;
    # recover weights by solving the Vandermonde moment system
    for k in range(1, 7):
        nodes = basis.gauss_legendre_offsets(k)
        V = np.vander(nodes, k, increasing=True).T
        moments = 1.0 / np.arange(1, k + 1)
        w = np.linalg.solve(V, moments)
        for deg in range(2 * k):
            quad = w @ nodes**deg
            assert quad == pytest.approx(1.0 / (deg + 1), abs=1e-13)


def test_partition_grid_collocation_points():
    grid = basis.uniform_grid(0.0, 1.0, 3, 3)
    pts = grid.collocation_points()
    assert len(pts) == 3 * 2
    assert np.all(np.diff(pts) > 0)
    assert np.all((pts > 0) & (pts < 1))


def test_partition_grid_validation():
    with pytest.raises(basis.BasisError):
        basis.PartitionGrid((np.array([0.0, 1.0]),), 1, np.array([0.5]))
    with pytest.raises(basis.BasisError):
        basis.PartitionGrid((np.array([1.0, 0.0]),), 3, np.array([0.5]))
    with pytest.raises(basis.BasisError):
        basis.PartitionGrid((np.array([0.0, 1.0]),), 3, np.array([0.0, 0.5]))


def test_monomial_eval_derivatives():
    coeffs = [1.0, -2.0, 3.0, 0.5]  # 1 - 2x + 3x^2 + 0.5x^3
    x = 0.7
    assert basis.monomial_eval(coeffs, x) == pytest.approx(
        1 - 2 * x + 3 * x**2 + 0.5 * x**3)
    assert basis.monomial_eval(coeffs, x, 1) == pytest.approx(
        -2 + 6 * x + 1.5 * x**2)
    assert basis.monomial_eval(coeffs, x, 2) == pytest.approx(6 + 3 * x)
    with pytest.raises(basis.BasisError):
        basis.monomial_eval(coeffs, x, 3)


def test_hermite_cardinal_properties():
    b = basis.HermiteBasis1D(np.array([0.0, 0.4, 1.0]))
    for j in range(b.node_count):
        xj = b.breakpoints[j]
        for i in range(b.node_count):
            want_v = 1.0 if i == j else 0.0
            assert basis.hermite_eval(b, i, "value", xj) == pytest.approx(
                want_v, abs=1e-14)
            assert basis.hermite_eval(b, i, "slope", xj, 1) == pytest.approx(
                want_v, abs=1e-12)
            assert basis.hermite_eval(b, i, "value", xj, 1) == pytest.approx(
                0.0, abs=1e-12)
            assert basis.hermite_eval(b, i, "slope", xj) == pytest.approx(
                0.0, abs=1e-14)


def test_hermite_c1_across_breakpoints():
    b = basis.HermiteBasis1D(np.array([0.0, 0.3, 0.8, 1.0]))
    eps = 1e-9
    for j in range(b.node_count):
        for kind in ("value", "slope"):
            for x in b.breakpoints[1:-1]:
                for d in (0, 1):
                    left = basis.hermite_eval(b, j, kind, x - eps, d)
                    right = basis.hermite_eval(b, j, kind, x + eps, d)
                    assert left == pytest.approx(right, abs=1e-6)


def test_hermite_out_of_domain():
    b = basis.HermiteBasis1D(np.array([0.0, 1.0]))
    with pytest.raises(basis.OutOfDomainError):
        b.locate(1.5)
    with pytest.raises(basis.BasisError):
        basis.hermite_eval(b, 0, "curvature", 0.5)


def test_hermite_cell_eval_scaling():
    # slope shape functions scale with the cell width
    b = basis.HermiteBasis1D(np.array([0.0, 2.0]))
    vals = b.cell_eval(0, 1.0)  # midpoint, s = 0.5
    assert vals[0] == pytest.approx(0.5)
    assert vals[2] == pytest.approx(0.5)
    assert vals[1] == pytest.approx(0.125 * 2.0)
    assert vals[3] == pytest.approx(-0.125 * 2.0)
