"""Reverse-mode tape tests: finite-difference gradchecks and adjoints."""

import numpy as np
import pytest

from splinecolloc import abd, autodiff as ad


def fd_grad(fn, x, h=1e-6):
    """Central-difference gradient of a scalar function of a flat array."""
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp.flat[i] += h
        xm = x.copy()
        xm.flat[i] -= h
        g.flat[i] = (fn(xp) - fn(xm)) / (2 * h)
    return g


def gradcheck(build, x0, atol=1e-6):
    """build(tape, tensor) -> scalar tensor; compares tape grad with FD."""
    tape = ad.Tape()
    xt = tape.tensor(x0)
    loss = build(tape, xt)
    ad.backward(tape, loss)

    def scalar(x):
        t = ad.Tape()
        return float(build(t, t.tensor(x)).value)

    fd = fd_grad(scalar, x0.astype(np.float64))
    assert np.allclose(xt.grad, fd, atol=atol), (xt.grad, fd)


def test_elementwise_and_matmul_chain():
    rng = np.random.default_rng(0)
    W = rng.standard_normal((4, 5))
    b = rng.standard_normal((4, 1))

    def build(tape, x):
        h = ad.add(ad.matmul(tape.tensor(W), x), b)
        h = ad.mul(h, h)
        return ad.sum_squares(ad.scale(h, 0.5))

    gradcheck(build, rng.standard_normal((5, 1)), atol=1e-5)


def test_relu_sub_total():
    rng = np.random.default_rng(1)

    def build(tape, x):
        # offset keeps entries away from the kink for clean FD
        y = ad.relu(ad.sub(x, 0.05))
        return ad.total(ad.mul(y, y))

    gradcheck(build, rng.standard_normal(12) + 0.5)


def test_plumbing_primitives():
    rng = np.random.default_rng(2)

    def build(tape, x):
        m = ad.reshape(x, (3, 4))
        m = ad.transpose(m)
        picked = ad.gather_rows(m, [0, 2, 2, 3])
        both = ad.concat([picked, picked], axis=1)
        return ad.sum_squares(both)

    gradcheck(build, rng.standard_normal(12))


def test_broadcast_gradients_unbroadcast():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((5, 3))

    def build(tape, x):
        # x is a length-3 row broadcast against a 5x3 matrix
        return ad.sum_squares(ad.mul(tape.tensor(M), x))

    gradcheck(build, rng.standard_normal(3))


def test_gather_repeated_rows_accumulates():
    tape = ad.Tape()
    x = tape.tensor(np.array([[1.0], [2.0]]))
    y = ad.gather_rows(x, [0, 0, 1])
    loss = ad.total(y)
    ad.backward(tape, loss)
    assert np.array_equal(x.grad, [[2.0], [1.0]])


def test_abd_solve_adjoint_matches_fd():
    rng = np.random.default_rng(4)
    structure = abd.uniform_chain_structure(12, 4)
    m = abd.random_abd(structure, rng, dominance=4.0)
    fac = abd.factorize(m)
    w = rng.standard_normal(12)

    def build(tape, f):
        a = ad.abd_solve(fac, f)
        return ad.sum_squares(ad.mul(a, w))

    gradcheck(build, rng.standard_normal(12), atol=1e-5)


def test_dense_solve_adjoint_matches_fd():
    rng = np.random.default_rng(5)
    E = rng.standard_normal((6, 6)) + 4.0 * np.eye(6)
    op = ad.DenseSolveOperator(E)

    def build(tape, f):
        return ad.sum_squares(op.solve(f))

    gradcheck(build, rng.standard_normal(6), atol=1e-5)
    # solve_array agrees with the taped forward value
    f = rng.standard_normal(6)
    assert np.allclose(op.solve_array(f), np.linalg.solve(E, f), atol=1e-12)


def test_dense_solve_rejects_non_square():
    with pytest.raises(ad.AutodiffError):
        ad.DenseSolveOperator(np.zeros((3, 4)))


def test_tape_consumed_once():
    tape = ad.Tape()
    x = tape.tensor(np.array([1.0, 2.0]))
    loss = ad.sum_squares(x)
    ad.backward(tape, loss)
    with pytest.raises(ad.TapeConsumedError):
        ad.backward(tape, loss)


def test_non_scalar_loss_rejected():
    tape = ad.Tape()
    x = tape.tensor(np.array([1.0, 2.0]))
    with pytest.raises(ad.AutodiffError):
        ad.backward(tape, ad.mul(x, x))


def test_cross_tape_loss_rejected():
    t1 = ad.Tape()
    t2 = ad.Tape()
    x = t2.tensor(np.array(1.0))
    with pytest.raises(ad.AutodiffError):
        ad.backward(t1, x)


def test_shared_subexpression_accumulates():
    # d/dx of (x@x) with x used twice
    tape = ad.Tape()
    x = tape.tensor(np.array([1.0, -2.0, 3.0]))
    loss = ad.total(ad.mul(x, x))
    ad.backward(tape, loss)
    assert np.allclose(x.grad, 2.0 * x.value)
