import numpy as np
import pytest

from capa_multicast.field import Aperture, make_grid
from capa_multicast.quadrature import interval_rule, legendre_nodes_weights


@pytest.mark.parametrize("order", [1, 2, 3, 5, 8, 20, 40])
def test_matches_reference_rule(order):
    x, w = legendre_nodes_weights(order)
    xr, wr = np.polynomial.legendre.leggauss(order)
    idx = np.argsort(x)
    assert np.max(np.abs(x[idx] - xr)) < 1e-13
    assert np.max(np.abs(w[idx] - wr)) < 1e-13


def test_nodes_are_mirror_symmetric_bitwise():
    x, w = legendre_nodes_weights(20)
    assert np.array_equal(x, -x[::-1])
    assert np.array_equal(w, w[::-1])


def test_grid_weights_sum_to_area():
    grid = make_grid(Aperture(0.5, 0.5), 20)
    assert abs(grid.weights.sum() - 0.25) <= 1e-12 * 0.25
    grid2 = make_grid(Aperture(0.7, 1.3), 15)
    assert abs(grid2.weights.sum() - 0.91) <= 1e-12 * 0.91


def test_grid_nodes_inside_aperture():
    ap = Aperture(0.5, 0.5)
    grid = make_grid(ap, 20)
    assert grid.size == 400
    assert np.all(np.abs(grid.nodes[:, 0]) < ap.len_x / 2)
    assert np.all(np.abs(grid.nodes[:, 1]) < ap.len_y / 2)
    assert np.all(grid.nodes[:, 2] == 0)
    assert np.all(grid.weights > 0)


@pytest.mark.parametrize("seed", range(5))
def test_polynomial_exactness_up_to_2m_minus_1(seed):
    # Degree <= 2M-1 per axis must integrate exactly over the rectangle.
    m = 7
    rng = np.random.default_rng(seed)
    ax, ay = 0.31, 0.47
    grid = make_grid(Aperture(2 * ax, 2 * ay), m)
    deg = 2 * m - 1
    cx = rng.normal(size=deg + 1)
    cy = rng.normal(size=deg + 1)

    def moment(c, half):
        # integral over [-half, half] of sum_k c_k x^k
        total = 0.0
        for k, ck in enumerate(c):
            if k % 2 == 0:
                total += ck * 2 * half ** (k + 1) / (k + 1)
        return total

    exact = moment(cx, ax) * moment(cy, ay)
    values = np.polyval(cx[::-1], grid.nodes[:, 0]) * np.polyval(cy[::-1], grid.nodes[:, 1])
    numeric = float(np.sum(grid.weights * values))
    assert abs(numeric - exact) <= 1e-10 * max(1.0, abs(exact))


def test_interval_rule_scaling():
    x, w = interval_rule(10, 0.25)
    assert np.all(np.abs(x) < 0.25)
    assert abs(w.sum() - 0.5) < 1e-13


def test_rejects_non_positive_order():
    with pytest.raises(ValueError):
        legendre_nodes_weights(0)
