"""Baseline interpolators and the collocation comparison table."""

import numpy as np
import pytest

from splinecolloc import baselines


def test_nearest_1d():
    xs = np.array([0.0, 1.0, 2.0])
    v = np.array([10.0, 20.0, 30.0])
    got = baselines.interp_nearest((xs, v), np.array([0.1, 0.9, 1.6]))
    assert np.array_equal(got, [10.0, 20.0, 30.0])


def test_linear_1d_exact_on_lines():
    xs = np.linspace(0.0, 1.0, 5)
    v = 3.0 * xs - 1.0
    q = np.array([0.11, 0.5, 0.93])
    assert np.allclose(baselines.interp_linear((xs, v), q), 3.0 * q - 1.0,
                       atol=1e-14)


def test_cubic_1d_reproduces_lines_and_samples():
    # the natural spline is exact on straight lines and interpolates
    xs = np.linspace(0.0, 1.0, 9)

    def fn(x):
        return x**3 - 1.5 * x**2 + 0.5 * x

    q = np.linspace(0.0, 1.0, 57)
    line = baselines.interp_cubic((xs, 2.0 - xs), q)
    assert np.allclose(line, 2.0 - q, atol=1e-12)
    samp = baselines.interp_cubic((xs, fn(xs)), xs)
    assert np.allclose(samp, fn(xs), atol=1e-12)


def test_2d_methods_exact_on_bilinear():
    xs = np.linspace(0.0, 1.0, 6)
    ys = np.linspace(0.0, 1.0, 7)
    gx, gy = np.meshgrid(xs, ys)
    v = 1.0 + 2.0 * gx - gy + 0.5 * gx * gy
    rng = np.random.default_rng(0)
    q = rng.uniform(0.0, 1.0, (40, 2))
    truth = 1.0 + 2.0 * q[:, 0] - q[:, 1] + 0.5 * q[:, 0] * q[:, 1]
    assert np.allclose(baselines.interp_linear(((xs, ys), v), q), truth,
                       atol=1e-12)
    assert np.allclose(baselines.interp_cubic(((xs, ys), v), q), truth,
                       atol=1e-10)


def test_hull_checks():
    xs = np.linspace(0.0, 1.0, 5)
    v = xs.copy()
    for f in (baselines.interp_nearest, baselines.interp_linear,
              baselines.interp_cubic):
        with pytest.raises(baselines.OutOfHullError):
            f((xs, v), np.array([1.01]))
    gx, gy = np.meshgrid(xs, xs)
    with pytest.raises(baselines.OutOfHullError):
        baselines.interp_linear(((xs, xs), gx + gy),
                                np.array([[0.5, -0.1]]))


def test_compare_methods_linear_fields_hit_machine_zero():
    # polynomial fields of degree <= fit order: cubic and collocation both
    # reproduce them to rounding noise
    for problem in ("1d-linear", "2d-linear"):
        errors = baselines.compare_methods(problem, 16)
        assert set(errors) == set(baselines.METHODS)
        assert errors["osc"] < 1e-20
        assert errors["cubic"] < 1e-16 or problem == "1d-linear"


def test_compare_methods_ranking_on_all_fields():
    # at resolution 16 every field orders osc < cubic < linear < nearest
    for problem in ("1d-linear", "1d-nonlinear", "2d-linear", "2d-nonlinear"):
        e = baselines.compare_methods(problem, 16)
        assert e["osc"] < e["cubic"] < e["linear"] < e["nearest"], (problem, e)


def test_nonlinear_magnitudes_near_reference():
    # reference MSE magnitudes for the nonlinear fields; some resolution
    # in the sweep must land within one order of magnitude
    targets = {"1d-nonlinear": 4.1948e-8, "2d-nonlinear": 3.4462e-5}
    for problem, target in targets.items():
        best = min(abs(np.log10(e["osc"] / target))
                   for _, e in baselines.sweep_resolutions(problem))
        assert best <= 1.0, (problem, best)


def test_sweep_errors_decrease():
    rows = baselines.sweep_resolutions("1d-nonlinear", (8, 16, 32))
    osc_err = [e["osc"] for _, e in rows]
    assert osc_err[0] > osc_err[1] > osc_err[2]


def test_unknown_problem_rejected():
    with pytest.raises(Exception, match="unknown problem"):
        baselines.compare_methods("3d-linear", 8)
