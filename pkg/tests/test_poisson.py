import math

import numpy as np
import pytest

from twoweight.geometry import Cube, DyadicGrid, GoodnessParams, UpperHalfPoint, cube_contains
from twoweight.haar import build_haar
from twoweight.measures import AtomicMeasure
from twoweight.poisson import (Region, UpstairsMeasure, comparability_constant, dual_poisson,
                               energy_measure, mu_hat_direct, poisson, poisson_direct,
                               poisson_extension, poisson_repro, poisson_sum)

G1 = DyadicGrid(1, (0.0,), 0, 8)
TOP = Cube(0, (0,))


def delta(x, m=1.0):
    return AtomicMeasure(np.atleast_2d(np.asarray(x, float)), np.array([m]))


def random_measure(seed, n=1, k=10, spread=3.0):
    rng = np.random.default_rng(seed)
    return AtomicMeasure(spread * rng.random((k, n)) - 1.0, rng.lognormal(0, 1, k))


class TestCubePoisson:
    def test_single_far_atom(self):
        assert poisson(G1, TOP, delta([2.0]), 0.0) == pytest.approx(0.16, rel=1e-15)
        assert poisson_repro(G1, TOP, delta([2.0]), 0.0) == pytest.approx(0.16, rel=1e-15)

    def test_atom_at_centre(self):
        Q = Cube(1, (0,))
        assert poisson(G1, Q, delta([0.25], 1.0), 0.0) == pytest.approx(2.0, rel=1e-15)
        g2 = DyadicGrid(2, (0.0, 0.0), 0, 4)
        Q2 = Cube(2, (1, 1))
        c = g2.center(Q2)
        assert poisson(g2, Q2, delta(c), 0.5) == pytest.approx(0.25 ** -1.5, rel=1e-14)
        assert poisson_repro(g2, Q2, delta(c), 0.5) == pytest.approx(0.25 ** -1.5, rel=1e-14)

    @pytest.mark.parametrize("seed,n,alpha,m", [(0, 1, 0.0, 1.0), (1, 2, 0.7, 1.0), (2, 2, 1.5, 2.5),
                                                (3, 3, 0.0, 0.5)])
    def test_batched_matches_loop(self, seed, n, alpha, m):
        g = DyadicGrid(n, (0.0,) * n, 0, 5)
        mu = random_measure(seed, n)
        for Q in [Cube(0, (0,) * n), Cube(2, (1,) * n), Cube(4, (3,) * n)]:
            assert poisson(g, Q, mu, alpha, m) == pytest.approx(poisson_direct(g, Q, mu, alpha, m), rel=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_two_kernels_agree_on_the_line(self, seed):
        mu = random_measure(seed)
        for Q in [TOP, Cube(3, (2,)), Cube(6, (40,))]:
            assert poisson(G1, Q, mu, 0.0) == pytest.approx(poisson_repro(G1, Q, mu, 0.0), rel=1e-14)

    def test_empty_measure(self):
        empty = AtomicMeasure.empty(1)
        assert poisson(G1, TOP, empty, 0.0) == 0.0
        assert poisson_sum(G1, [], delta([0.3]), 1, 2).shape == (0,)

    def test_regions(self):
        mu = AtomicMeasure(np.array([[0.1], [0.6], [2.5]]), np.ones(3))
        inside = Region.of(inside=TOP)
        holed = Region.of(inside=TOP, minus=Cube(1, (1,)))
        full = poisson(G1, TOP, mu, 0.0)
        a = poisson(G1, TOP, mu, 0.0, region=inside)
        b = poisson(G1, TOP, mu, 0.0, region=holed)
        assert b == pytest.approx(poisson(G1, TOP, delta([0.1]), 0.0), rel=1e-15)
        assert b < a < full

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            poisson(G1, TOP, delta([0.2]), 1.0)


class TestUpstairs:
    def test_extension_at_atom(self):
        for t in (0.1, 1.0, 3.0):
            assert poisson_extension(delta([0.4, 0.2]), 0.5, UpperHalfPoint((0.4, 0.2), t)) == \
                pytest.approx(t ** (0.5 - 2), rel=1e-14)

    @pytest.mark.parametrize("seed,n,alpha", [(0, 1, 0.0), (1, 2, 0.3), (2, 2, 1.2)])
    def test_extension_comparable_to_cube_integral(self, seed, n, alpha):
        g = DyadicGrid(n, (0.0,) * n, 0, 6)
        mu = random_measure(seed, n)
        for Q in [Cube(0, (0,) * n), Cube(3, (2,) * n)]:
            P = poisson(g, Q, mu, alpha)
            E = poisson_extension(mu, alpha, UpperHalfPoint(tuple(g.center(Q)), g.side(Q)))
            assert P * (1 - 1e-14) <= E <= 2 ** ((n + 1 - alpha) / 2) * P * (1 + 1e-14)

    def test_empty_and_bad_height(self):
        assert poisson_extension(AtomicMeasure.empty(1), 0.0, UpperHalfPoint((0.0,), 1.0)) == 0.0
        with pytest.raises(ValueError):
            poisson_extension(delta([0.0]), 0.0, UpperHalfPoint((0.0,), 0.0))

    def test_dual_single_atom(self):
        nu = UpstairsMeasure(np.array([[0.3]]), np.array([0.5]), np.array([2.0]))
        assert dual_poisson(nu, 0.0, [0.3]) == pytest.approx(2.0 * 0.5 ** (1 + 0 - 1), rel=1e-15)
        nu2 = UpstairsMeasure(np.array([[0.3, 0.3]]), np.array([0.5]), np.array([2.0]))
        assert dual_poisson(nu2, 0.5, [0.3, 0.3]) == pytest.approx(2.0 * 0.5 ** (1 + 0.5 - 2), rel=1e-14)

    def test_dual_empty_and_linear(self):
        empty = UpstairsMeasure(np.zeros((0, 1)), np.zeros(0), np.zeros(0))
        assert dual_poisson(empty, 0.0, [0.1]) == 0.0
        rng = np.random.default_rng(0)
        xs, ts = rng.random((6, 1)), rng.random(6) + 0.1
        a, b = rng.random(6), rng.random(6)
        A = UpstairsMeasure(xs, ts, a)
        B = UpstairsMeasure(xs, ts, b)
        AB = UpstairsMeasure(xs, ts, 2 * a + 3 * b)
        assert dual_poisson(AB, 0.0, [0.4]) == pytest.approx(
            2 * dual_poisson(A, 0.0, [0.4]) + 3 * dual_poisson(B, 0.0, [0.4]), rel=1e-14)

    def test_bar_roundtrip(self):
        nu = UpstairsMeasure(np.array([[0.1], [0.2]]), np.array([0.5, 0.25]), np.array([1.0, 2.0]))
        np.testing.assert_allclose(nu.bar().weights, [4.0, 32.0])
        np.testing.assert_allclose(nu.bar().unbar().weights, nu.weights)


class TestEnergyMeasure:
    p = GoodnessParams(r=3, eps=0.7, tau=4, rho=8)

    def _setup(self, seed):
        rng = np.random.default_rng(seed)
        g = DyadicGrid(1, (0.0,), 0, 12)
        w = AtomicMeasure(rng.random((60, 1)), rng.lognormal(0, 1, 60))
        H = build_haar(w, g)
        collection = [TOP, Cube(2, (1,)), Cube(2, (2,))]
        return g, H, collection

    def test_single_atom_gives_zero_measure(self):
        g = DyadicGrid(1, (0.0,), 0, 12)
        H = build_haar(delta([0.4]), g)
        assert len(energy_measure(g, [TOP], H, self.p)) == 0

    @pytest.mark.parametrize("seed", range(3))
    def test_tent_identity(self, seed):
        g, H, collection = self._setup(seed)
        nu = energy_measure(g, collection, H, self.p, "mu_bar")
        assert len(nu) > 0 and np.all(nu.weights >= 0)
        for I in [c for lev in range(0, 8) for c in g.cubes_at(lev)]:
            assert nu.t2_integral(g, I) == pytest.approx(mu_hat_direct(g, nu, I), rel=1e-12, abs=1e-300)

    def test_labels_inside_their_stopping_cube(self):
        g, H, collection = self._setup(4)
        nu = energy_measure(g, collection, H, self.p)
        for F, J in nu.labels:
            assert cube_contains(F, J) and J != F


def test_comparability_constant():
    assert comparability_constant(1, 0.0) == pytest.approx(9.0)
    assert comparability_constant(2, 1.0) == pytest.approx((2 + math.sqrt(2)) ** 2)
