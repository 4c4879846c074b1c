import csv
import io
import math

import numpy as np
import pytest

from htype.yamabe import (DomainError, TorusGrid, conformal_curvature_field, heisenberg_model_quotient,
                          minimize, random_positive_grid, yamabe_gradient, yamabe_quotient)

C_H1 = 8.0


def smooth_field(grid):
    x, y, t = grid.nodes().T.reshape(3, *grid.resolution)
    s = np.sin(2 * np.pi * x) + 0.5 * np.cos(2 * np.pi * (y - t)) + 0.3 * np.sin(2 * np.pi * t)
    return np.exp(0.3 * s)


def test_constant_field_has_zero_quotient(h1, k2):
    for G in (h1, k2):
        grid = TorusGrid(G, 6)
        assert yamabe_quotient(grid, np.ones(grid.resolution), 3.0) == 0.0


def test_scale_invariance(h1):
    grid = TorusGrid(h1, 12)
    u = random_positive_grid(grid, 1)
    q = yamabe_quotient(grid, u, C_H1)
    for c in (1e-3, 0.5, 40.0):
        assert yamabe_quotient(grid, c * u, C_H1) == pytest.approx(q, rel=1e-12)


def test_gradient_matches_differences(h1):
    grid = TorusGrid(h1, 6)
    u = random_positive_grid(grid, 2)
    g = yamabe_gradient(grid, u, C_H1, K=0.7)
    rng = np.random.default_rng(0)
    d = rng.normal(size=u.shape)
    h = 1e-6
    fd = (yamabe_quotient(grid, u + h * d, C_H1, 0.7) - yamabe_quotient(grid, u - h * d, C_H1, 0.7)) / (2 * h)
    assert abs(np.sum(g * d) - fd) <= 1e-7 * abs(fd)


def test_refinement_order(h1):
    q = [yamabe_quotient(TorusGrid(h1, n), smooth_field(TorusGrid(h1, n)), C_H1) for n in (8, 16, 32)]
    order = math.log2(abs(q[1] - q[0]) / abs(q[2] - q[1]))
    assert order >= 1.8


def test_vertical_shift_invariance(h1):
    # a shift along t is a left translation, and it maps grid nodes to grid nodes
    grid = TorusGrid(h1, 10)
    u = random_positive_grid(grid, 3)
    shifted = np.roll(u, 3, axis=2)
    assert yamabe_quotient(grid, shifted, C_H1) == pytest.approx(yamabe_quotient(grid, u, C_H1), rel=1e-12)


def test_minimizer_is_monotone_and_converges(h1):
    grid = TorusGrid(h1, 8)
    res = minimize(grid, random_positive_grid(grid, 0), C_H1, max_iters=2000, tol=1e-6)
    assert res.converged and res.reason == "tolerance"
    assert np.all(np.diff(res.history) <= 0)
    assert res.quotient <= 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_quotient_is_conformally_covariant(h1, seed):
    grid = TorusGrid(h1, 16, stencil=4)
    u = random_positive_grid(grid, seed, max_wavenumber=1)
    v = random_positive_grid(grid, seed + 100, amplitude=0.1, max_wavenumber=1)
    f = v**2  # v^{4/(Q-2)} with Q = 4
    K = conformal_curvature_field(grid, v, C_H1)
    lhs = yamabe_quotient(grid, u, C_H1, K, metric=f)
    rhs = yamabe_quotient(grid, u * v, C_H1)
    assert abs(lhs - rhs) <= 1e-3 * abs(rhs)


def test_model_quotient(h1):
    m = heisenberg_model_quotient(C_H1)
    assert m.value == pytest.approx(8 * np.pi, rel=1e-10)
    assert m.tail == pytest.approx(abs(m.value - m.box_value))
    assert m.box_value < m.value


def test_domain_errors(h1):
    grid = TorusGrid(h1, 4)
    u = np.ones(grid.resolution)
    u[0, 0, 0] = 0.0
    with pytest.raises(DomainError):
        yamabe_quotient(grid, u, C_H1)
    u[0, 0, 0] = np.nan
    with pytest.raises(DomainError):
        minimize(grid, u, C_H1)


def test_csv_log_format(h1):
    grid = TorusGrid(h1, 6)
    res = minimize(grid, random_positive_grid(grid, 5), C_H1, max_iters=5, tol=0.0)
    text = res.csv_log()
    assert "\r" not in text
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["iter", "quotient", "step"]
    assert len(rows) == len(res.history) + 1
    assert [float(r[1]) for r in rows[1:]] == res.history
