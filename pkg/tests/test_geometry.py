import itertools

import numpy as np
import pytest

from twoweight.geometry import (Box, Cube, DyadicGrid, GoodnessParams, QuasiMap, UpperHalfPoint,
                                alternates_containing, are_neighbours, as_box, children,
                                containing_cube, cube_contains, dilate_contained, good_mask,
                                grid_family, is_deeply_embedded, is_good, m_deep, neighbour_pairs,
                                overlap_beta, qdist, rel_bounds, tau_good_mask, tent_contains,
                                tent_point)
from twoweight.harness.suites import better_good_counterexamples, max_overlap

P_SMALL = GoodnessParams(r=2, eps=0.5, tau=3, rho=6)


def grid1(bottom=6, top=0, lo=0, hi=None):
    return DyadicGrid(1, (0.0,), top, bottom, (lo,), (lo if hi is None else hi,))


def interval(c):
    lo, hi = rel_bounds(c)
    return float(lo[0]), float(hi[0])


class TestContainingCube:
    def test_half_open_levels(self):
        g = grid1()
        assert interval(containing_cube(g, [0.3], 2)) == (0.25, 0.5)
        assert interval(containing_cube(g, [0.5], 1)) == (0.5, 1.0)

    def test_two_dimensional(self):
        g = DyadicGrid(2, (0.0, 0.0), 0, 4)
        c = containing_cube(g, [0.3, 0.7], 2)
        lo, hi = rel_bounds(c)
        assert lo.tolist() == [0.25, 0.5] and hi.tolist() == [0.5, 0.75]
        # brute force: the unique level-2 cube whose box holds the point
        hits = [Cube(2, (i, j)) for i in range(4) for j in range(4)
                if all(a <= x < b for a, b, x in zip(*rel_bounds(Cube(2, (i, j))), (0.3, 0.7)))]
        assert hits == [c]

    def test_outside_grid_rejected(self):
        with pytest.raises(ValueError):
            containing_cube(grid1(), [1.5], 2)
        with pytest.raises(ValueError):
            containing_cube(grid1(bottom=3), [0.5], 5)


class TestNeighbours:
    def test_adjacent_unit_intervals(self):
        g = grid1(bottom=2, lo=0, hi=2)
        pairs = neighbour_pairs(g, [0])
        assert (Cube(0, (0,)), Cube(0, (1,))) in pairs
        assert (Cube(0, (0,)), Cube(0, (2,))) not in pairs
        assert not are_neighbours(Cube(0, (0,)), Cube(0, (2,)))

    def test_eight_neighbours_in_the_plane(self):
        g = DyadicGrid(2, (0.0, 0.0), 0, 1, (-1, -1), (1, 1))
        pairs = neighbour_pairs(g, [0])
        centre = Cube(0, (0, 0))
        touching = {b if a == centre else a for a, b in pairs if centre in (a, b)}
        stencil = {Cube(0, e) for e in itertools.product((-1, 0, 1), repeat=2) if any(e)}
        assert touching == stencil


class TestDistance:
    def test_identity_gap(self):
        g = grid1(bottom=2, lo=0, hi=3)
        assert qdist(g, Cube(0, (0,)), Cube(0, (2,))) == pytest.approx(1.0)

    def test_spiral_matches_inverse_map(self):
        q = QuasiMap("log_spiral", spiral=0.3)
        g = DyadicGrid(2, (0.0, 0.0), 0, 4, qmap=q)
        rng = np.random.default_rng(4)
        a, b = rng.random((5, 2)) + 0.1, rng.random((4, 2)) + 0.1
        ia, ib = q.inverse(a), q.inverse(b)
        oracle = min(np.hypot(*(x - y)) for x in ia for y in ib)
        assert qdist(g, a, b) == pytest.approx(oracle, rel=1e-14)
        assert np.allclose(q.forward(ia), a, atol=1e-14)


class TestDeepEmbedding:
    K = Cube(0, (0,))

    def test_example_at_threshold(self):
        assert is_deeply_embedded(Cube(2, (1,)), self.K, 2, 0.5)

    def test_touching_boundary(self):
        assert not is_deeply_embedded(Cube(2, (0,)), self.K, 2, 0.5)
        assert not is_deeply_embedded(Cube(5, (31,)), self.K, 2, 0.5)

    def test_too_large(self):
        assert not is_deeply_embedded(Cube(1, (0,)), self.K, 2, 0.5)


def _brute_m_deep(g, K, r, eps):
    deep = [c for lev in range(K.level + 1, g.bottom_level + 1) for c in g.cubes_at(lev)
            if cube_contains(K, c) and is_deeply_embedded(c, K, r, eps)]
    s = set(deep)
    return sorted(c for c in deep
                  if not any(Cube(l, tuple(i >> (c.level - l) for i in c.index)) in s
                             for l in range(K.level + 1, c.level)))


class TestMaximalDeep:
    def test_unit_interval_members(self):
        g = grid1(bottom=6)
        fam = m_deep(g, Cube(0, (0,)), P_SMALL)
        side4 = sorted(interval(c) for c in fam if c.level == 2)
        assert side4 == [(0.25, 0.5), (0.5, 0.75)]
        left16 = sorted(interval(c) for c in fam if c.level == 4 and interval(c)[1] <= 0.25)
        assert left16 == [(0.125, 0.1875), (0.1875, 0.25)]

    @pytest.mark.parametrize("n,bottom", [(1, 7), (2, 5)])
    def test_matches_enumeration_and_disjoint(self, n, bottom):
        g = DyadicGrid(n, (0.0,) * n, 0, bottom)
        K = Cube(0, (0,) * n)
        fam = sorted(m_deep(g, K, P_SMALL))
        assert fam == _brute_m_deep(g, K, P_SMALL.r, P_SMALL.eps)
        for a, b in itertools.combinations(fam, 2):
            assert not cube_contains(a, b) and not cube_contains(b, a)


class TestAlternatesAndTents:
    def test_alternate_example(self):
        assert Box(0, (1,)) in alternates_containing(Cube(1, (1,)))
        lo, hi = rel_bounds(Box(0, (1,)))
        assert (lo[0], hi[0]) == (0.5, 1.5)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_two_to_the_n_alternates(self, n):
        c = Cube(3, (5,) * n)
        alts = alternates_containing(c)
        assert len(set(alts)) == 2**n
        for b in alts:
            lo, hi = rel_bounds(b)
            clo, chi = rel_bounds(c)
            assert np.all(lo <= clo) and np.all(chi <= hi)

    def test_dyadic_cube_is_alternate(self):
        c = Cube(2, (1,))
        assert any(as_box(c) == b for b in alternates_containing(children(c)[0]))

    def test_tent_iff_containment(self):
        g = grid1(bottom=4)
        cubes = [c for lev in range(5) for c in g.cubes_at(lev)]
        for I in cubes:
            for J in cubes:
                assert tent_contains(g, I, tent_point(g, J)) == cube_contains(I, J)

    def test_tent_top_and_deep_tent(self):
        g = grid1(bottom=4)
        K = Cube(1, (1,))
        p = tent_point(g, K)
        assert tent_contains(g, K, p)
        assert not tent_contains(g, K, p, mode="tau_deep", tau=1)

    def test_below_cone_excluded(self):
        g = grid1(bottom=4)
        K = Cube(0, (0,))
        # the cone over [0,1) at x=0.1 reaches height 0.2
        assert tent_contains(g, K, UpperHalfPoint((0.1,), 0.19))
        assert not tent_contains(g, K, UpperHalfPoint((0.1,), 0.21))


class TestGoodness:
    def test_tau_good_inside_good(self):
        g = grid1(bottom=12)
        p = GoodnessParams(r=3, eps=0.7, tau=4, rho=8)
        for lev in range(13):
            idx = np.arange(2**lev)[:, None]
            tg = tau_good_mask(lev, idx, g, p)
            gd = good_mask(lev, idx, g, p.r, p.eps)
            assert not np.any(tg & ~gd)

    def test_face_sharing_is_bad(self):
        g = grid1(bottom=10)
        # touches the left face of [0,1) at depth 6 > r
        assert not is_good(g, Cube(6, (0,)), P_SMALL)

    def test_central_cube_good(self):
        g = grid1(bottom=10)
        p = GoodnessParams(r=3, eps=0.7, tau=4, rho=8)
        # brute force over every ancestor at depth >= r
        goods = [c for c in g.cubes_at(6)
                 if all(is_deeply_embedded(c, Cube(l, (c.index[0] >> (6 - l),)), p.r, p.eps)
                        for l in range(0, 6 - p.r + 1))]
        assert goods
        for c in goods:
            assert is_good(g, c, p)

    def test_better_good_exhaustive(self):
        bad, checked, good, delta = better_good_counterexamples(1, 12, 5, 0.6, 6)
        assert good > 0 and bad == []
        assert delta == pytest.approx(0.2 / 1.1)


class TestOverlap:
    @pytest.mark.parametrize("n,p,bottom", [(1, GoodnessParams(r=3, eps=0.5, tau=4, rho=8), 9),
                                            (2, GoodnessParams(r=3, eps=0.5, tau=4, rho=8), 6)])
    def test_dilates_inside_and_bounded(self, n, p, bottom):
        g = DyadicGrid(n, (0.0,) * n, 0, bottom)
        K = Cube(0, (0,) * n)
        fam = m_deep(g, K, p)
        assert all(dilate_contained(J, p.gamma, K) for J in fam)
        assert max_overlap(fam, p.gamma, n) <= overlap_beta(n, p.r, p.eps, p.gamma)

    def test_overlap_count_matches_sampling(self):
        g = grid1(bottom=8)
        fam = m_deep(g, Cube(0, (0,)), GoodnessParams(r=3, eps=0.5, tau=4, rho=8))
        fine = max(J.level for J in fam) + 2
        xs = (np.arange(2**fine) + 0.5) / 2**fine
        counts = np.zeros_like(xs)
        for J in fam:
            lo, hi = rel_bounds(J)
            c, h = (lo + hi)[0] / 2, (hi - lo)[0]
            counts += (xs >= c - h) & (xs < c + h)
        assert max_overlap(fam, 2.0, 1) == int(counts.max())


def test_grid_family_seeded():
    a = grid_family(2, 0, 4, [0, 0], [0, 0], QuasiMap(), 3, 11)
    b = grid_family(2, 0, 4, [0, 0], [0, 0], QuasiMap(), 3, 11)
    assert [x.origin_shift for x in a] == [x.origin_shift for x in b]
    assert a[0].origin_shift == (0.0, 0.0) and len(a) == 4


def test_parameter_constraints():
    with pytest.raises(ValueError):
        GoodnessParams(r=4, tau=4, rho=10)
    with pytest.raises(ValueError):
        GoodnessParams(r=4, tau=5, rho=9)
    with pytest.raises(ValueError):
        GoodnessParams(eps=1.0)
