import numpy as np
import pytest

from twoweight.geometry import Cube, DyadicGrid
from twoweight.measures import (AtomicMeasure, GridMeasure, common_points, cube_mass, generate,
                                greedy_split, punctured_mass)


def atoms(*pairs, n=1):
    return AtomicMeasure.from_literal([{"point": [p] if n == 1 else list(p), "mass": m} for p, m in pairs], n)


G = DyadicGrid(1, (0.0,), -1, 6)


class TestCubeMass:
    mu = atoms((0.25, 1.0), (0.75, 3.0))

    def test_examples(self):
        assert cube_mass(G, self.mu, Cube(0, (0,))) == 4.0
        assert cube_mass(G, self.mu, Cube(1, (0,))) == 1.0

    def test_boundary_goes_right(self):
        mu = atoms((0.5, 2.0))
        assert cube_mass(G, mu, Cube(1, (0,))) == 0.0
        assert cube_mass(G, mu, Cube(1, (1,))) == 2.0

    def test_grid_measure_agrees(self):
        gm = GridMeasure(G, self.mu)
        for Q in gm.all_occupied():
            assert gm.mass(Q) == cube_mass(G, self.mu, Q)


class TestPunctured:
    def test_example(self):
        w = atoms((0.0, 1.0), (1.0, 2.0))
        P = common_points(w, w)
        assert punctured_mass(G, w, Cube(-1, (0,)), P) == 1.0

    def test_no_common_points(self):
        w = atoms((0.0, 1.0), (1.0, 2.0))
        P = common_points(w, atoms((0.3, 1.0)))
        assert punctured_mass(G, w, Cube(-1, (0,)), P) == 3.0

    def test_tie_subtracts_one_copy(self):
        w = atoms((0.1, 2.0), (0.6, 2.0), (0.8, 1.0))
        P = common_points(w, w)
        brute = w.masses.sum() - max(w.masses)
        assert punctured_mass(G, w, Cube(0, (0,)), P) == brute == 3.0

    def test_bounded_by_cube_mass(self):
        s, w = generate(3, {"kind": "pair_with_common", "count": 8, "common_fraction": 0.5})
        P = common_points(s, w)
        for Q in GridMeasure(G, w).all_occupied():
            assert punctured_mass(G, w, Q, P) <= cube_mass(G, w, Q)


class TestCommonPoints:
    def test_disjoint(self):
        assert len(common_points(atoms((0.1, 1)), atoms((0.2, 1)))) == 0

    def test_singleton(self):
        P = common_points(atoms((0.1, 1), (0.3, 1)), atoms((0.3, 5)))
        assert P.as_set() == {(0.3,)}

    def test_near_coincident_not_common(self):
        assert len(common_points(atoms((0.1, 1)), atoms((0.1 + 1e-15, 1)))) == 0


class TestGreedySplit:
    pts = [0.1, 0.3, 0.5, 0.7]

    def test_alternating_example(self):
        s = atoms(*zip(self.pts, [4.0, 3.0, 2.0, 1.0]))
        w = atoms(*zip(self.pts, [1.0, 2.0, 3.0, 4.0]))
        Q = Cube(0, (0,))
        st, wt, rec = greedy_split(G, s, w, Q)
        assert rec.order == [(0.1,), (0.7,), (0.3,), (0.5,)]
        assert st.total == 7.0 and wt.total == 7.0
        P = common_points(s, w)
        assert st.total >= 0.5 * s.total
        assert wt.total >= 0.5 * punctured_mass(G, w, Q, P) == 3.0
        assert len(common_points(st, wt)) == 0

    def test_no_common_unchanged(self):
        s, w = atoms((0.1, 1.0), (0.6, 2.0)), atoms((0.2, 3.0))
        st, wt, _ = greedy_split(G, s, w, Cube(0, (0,)))
        assert st.total == 3.0 and wt.total == 3.0

    def test_single_common_point_leaves_omega(self):
        s, w = atoms((0.1, 1.0), (0.6, 2.0)), atoms((0.6, 3.0), (0.9, 1.0))
        st, wt, _ = greedy_split(G, s, w, Cube(0, (0,)))
        assert st.total == 3.0
        assert wt.keys() == [(0.9,)]

    @pytest.mark.parametrize("seed", range(10))
    def test_bounds_random(self, seed):
        s, w = generate(seed, {"kind": "pair_with_common", "count": 9, "n": 2, "common_fraction": 0.6,
                               "mass_law": "lognormal"})
        g = DyadicGrid(2, (0.0, 0.0), 0, 4)
        P = common_points(s, w)
        for Q in GridMeasure(g, s).all_occupied():
            st, wt, _ = greedy_split(g, s, w, Q)
            assert 2 * st.total >= cube_mass(g, s, Q)
            assert 2 * wt.total >= punctured_mass(g, w, Q, P)
            assert len(st) == 0 or len(wt) == 0 or len(common_points(st, wt)) == 0


class TestGenerators:
    def test_deterministic(self):
        spec = {"kind": "uniform_box", "count": 6, "n": 2, "mass_law": "lognormal"}
        assert generate(5, spec).to_literal() == generate(5, spec).to_literal()

    def test_common_fraction_extremes(self):
        s, w = generate(1, {"kind": "pair_with_common", "count": 5, "common_fraction": 0.0})
        assert len(common_points(s, w)) == 0
        s, w = generate(1, {"kind": "pair_with_common", "count": 5, "common_fraction": 1.0})
        assert len(common_points(s, w)) == 5

    def test_line_supported(self):
        mu = generate(2, {"kind": "line_supported", "count": 7, "n": 3})
        assert np.all(mu.points[:, 1:] == 0.5)

    def test_literal_roundtrip(self):
        mu = generate(9, {"count": 4, "n": 2})
        back = AtomicMeasure.from_literal(mu.to_literal(), 2)
        assert np.array_equal(back.points, mu.points) and np.array_equal(back.masses, mu.masses)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            generate(0, {"kind": "nope"})
