"""2D tensor-product Hermite surface fitting tests."""

import numpy as np
import pytest

from splinecolloc import osc2d
from splinecolloc.basis import OutOfDomainError


def tensor_field(fn, n_cells_x, n_cells_y, domain=(0.0, 1.0)):
    """Uniform sample grid with 2 interior points per cell plus boundaries."""
    lo, hi = domain
    xs = np.linspace(lo, hi, 2 * n_cells_x + 2)
    ys = np.linspace(lo, hi, 2 * n_cells_y + 2)
    gx, gy = np.meshgrid(xs, ys)
    return osc2d.CollocationField(xs, ys, fn(gx, gy))


def test_bilinear_field_is_exact():
    def fn(x, y):
        return 2.0 + 3.0 * x - 1.5 * y + 0.7 * x * y

    field = tensor_field(fn, 3, 2)
    s = osc2d.fit_surface(field)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.0, 1.0, (50, 2))
    got = osc2d.evaluate_surface_many(s, pts)
    assert np.max(np.abs(got - fn(pts[:, 0], pts[:, 1]))) < 1e-11


def test_bicubic_field_is_exact():
    def fn(x, y):
        return (x**3 - 2 * x**2 + x) * (2 * y**3 + y - 1) + x * y**2

    field = tensor_field(fn, 2, 3)
    s = osc2d.fit_surface(field)
    rng = np.random.default_rng(1)
    pts = rng.uniform(0.0, 1.0, (80, 2))
    got = osc2d.evaluate_surface_many(s, pts)
    assert np.max(np.abs(got - fn(pts[:, 0], pts[:, 1]))) < 1e-11
    # the nodal derivative dofs must also be exact
    for dv, dfn in (((1, 0), lambda x, y: (3 * x**2 - 4 * x + 1)
                     * (2 * y**3 + y - 1) + y**2),
                    ((0, 1), lambda x, y: (x**3 - 2 * x**2 + x)
                     * (6 * y**2 + 1) + 2 * x * y)):
        got = osc2d.evaluate_surface_many(s, pts, dv)
        assert np.max(np.abs(got - dfn(pts[:, 0], pts[:, 1]))) < 1e-10


def test_tensor_fit_matches_dense_oracle():
    def fn(x, y):
        return np.sin(2 * x) * np.cos(y) + 0.3 * x * y

    field = tensor_field(fn, 3, 3)
    s = osc2d.fit_surface(field)
    dense = osc2d.fit_surface_dense(field.points(), field.values.ravel(),
                                    s.basis_x, s.basis_y)
    assert np.allclose(s.coeffs, dense.coeffs, atol=1e-9)


def test_fit_interpolates_samples():
    rng = np.random.default_rng(2)
    xs = np.linspace(0.0, 1.0, 8)
    ys = np.linspace(0.0, 1.0, 6)
    field = osc2d.CollocationField(xs, ys, rng.standard_normal((6, 8)))
    s = osc2d.fit_surface(field)
    got = osc2d.evaluate_surface_many(s, field.points())
    assert np.allclose(got, field.values.ravel(), atol=1e-10)


def test_c1_continuity_across_breakpoints():
    def fn(x, y):
        return np.exp(-x) * np.sin(3 * y)

    field = tensor_field(fn, 3, 3)
    s = osc2d.fit_surface(field)
    eps = 1e-9
    for bx in s.basis_x.breakpoints[1:-1]:
        for y in (0.13, 0.5, 0.91):
            for dv in ((0, 0), (1, 0), (0, 1)):
                left = osc2d.evaluate_surface(s, bx - eps, y, dv)
                right = osc2d.evaluate_surface(s, bx + eps, y, dv)
                assert left == pytest.approx(right, abs=1e-7)
    for by in s.basis_y.breakpoints[1:-1]:
        for x in (0.21, 0.66):
            for dv in ((0, 0), (1, 0), (0, 1)):
                below = osc2d.evaluate_surface(s, x, by - eps, dv)
                above = osc2d.evaluate_surface(s, x, by + eps, dv)
                assert below == pytest.approx(above, abs=1e-7)


def test_surface_eval_matrix_matches_pointwise():
    def fn(x, y):
        return x**2 * y + np.cos(x + y)

    field = tensor_field(fn, 2, 2)
    s = osc2d.fit_surface(field)
    rng = np.random.default_rng(3)
    pts = rng.uniform(0.0, 1.0, (30, 2))
    for dv in ((0, 0), (1, 0), (0, 1)):
        E = osc2d.surface_eval_matrix(s.basis_x, s.basis_y, pts, dv)
        assert np.allclose(E @ s.coeffs.ravel(),
                           osc2d.evaluate_surface_many(s, pts, dv), atol=1e-12)


def test_dense_fit_handles_scattered_interior_points():
    # jitter the interior points off the tensor grid; the dense path
    # must still reproduce a bicubic field exactly
    def fn(x, y):
        return x**3 * y + y**3 - x * y

    field = tensor_field(fn, 2, 2)
    s0 = osc2d.fit_surface(field)
    pts = field.points().copy()
    rng = np.random.default_rng(4)
    interior = ((pts[:, 0] > 0.01) & (pts[:, 0] < 0.99)
                & (pts[:, 1] > 0.01) & (pts[:, 1] < 0.99))
    pts[interior] += rng.uniform(-0.03, 0.03, (interior.sum(), 2))
    s = osc2d.fit_surface_dense(pts, fn(pts[:, 0], pts[:, 1]),
                                s0.basis_x, s0.basis_y)
    check = rng.uniform(0.0, 1.0, (40, 2))
    got = osc2d.evaluate_surface_many(s, check)
    assert np.max(np.abs(got - fn(check[:, 0], check[:, 1]))) < 1e-9


def test_layout_validation():
    xs = np.linspace(0.0, 1.0, 5)  # odd count: no Hermite layout
    ys = np.linspace(0.0, 1.0, 6)
    field = osc2d.CollocationField(xs, ys, np.zeros((6, 5)))
    with pytest.raises(osc2d.CountMismatchError):
        osc2d.fit_surface(field)
    with pytest.raises(osc2d.CountMismatchError):
        osc2d.fit_surface(tensor_field(lambda x, y: x, 2, 2), r=4)
    with pytest.raises(osc2d.CountMismatchError):
        osc2d.CollocationField(xs, ys, np.zeros((5, 6)))
    with pytest.raises(osc2d.CountMismatchError):
        osc2d.CollocationField(xs[::-1], ys, np.zeros((6, 5)))


def test_evaluate_rejects_out_of_domain():
    field = tensor_field(lambda x, y: x + y, 1, 1)
    s = osc2d.fit_surface(field)
    with pytest.raises(OutOfDomainError):
        osc2d.evaluate_surface(s, 1.5, 0.5)
