import numpy as np
import pytest

from twoweight import corona as C
from twoweight import energy as E
from twoweight.geometry import Cube, DyadicGrid, GoodnessParams, cube_contains
from twoweight.haar import HaarSystem
from twoweight.measures import AtomicMeasure, GridMeasure

SIZE = GoodnessParams(r=3, eps=0.7, tau=4, rho=8)
TOP = Cube(0, (0,))


def sigma_grid(seed, k=16, bottom=8):
    rng = np.random.default_rng(seed)
    mu = AtomicMeasure(rng.random((k, 1)), rng.lognormal(0, 1, k))
    return GridMeasure(DyadicGrid(1, (0.0,), 0, bottom), mu), rng


def context(seed, bottom=12, ns=32, nw=128):
    rng = np.random.default_rng(seed)
    s = AtomicMeasure(rng.random((ns, 1)), rng.lognormal(0, 1, ns))
    w = AtomicMeasure(rng.random((nw, 1)), rng.lognormal(0, 1, nw))
    return E.EnergyContext(DyadicGrid(1, (0.0,), 0, bottom), s, w, 0.0, SIZE), rng


class TestCalderonZygmund:
    def test_constant_function(self):
        gs, _ = sigma_grid(0)
        tree = C.cz_stopping(np.full(16, 3.0), gs, TOP, 2.0)
        assert tree.cubes == [TOP] and tree.data[TOP] == pytest.approx(3.0)

    def test_spike(self):
        mu = AtomicMeasure(np.array([[0.1], [0.3], [0.6], [0.9]]), np.ones(4))
        gs = GridMeasure(DyadicGrid(1, (0.0,), 0, 6), mu)
        f = np.array([100.0, 0.0, 0.0, 0.0])
        tree = C.cz_stopping(f, gs, TOP, 2.0)
        # averages along the branch of 0.1: 25 at the top, 50 on [0, 1/2), 100 below
        assert tree.cubes == [TOP, Cube(2, (0,))]
        assert tree.data[Cube(2, (0,))] == 100.0

    def test_rejections(self):
        gs, _ = sigma_grid(1)
        with pytest.raises(ValueError):
            C.cz_stopping(np.ones(16), gs, TOP, 1.0)
        empty = GridMeasure(DyadicGrid(1, (0.0,), 0, 4, (0,), (1,)), AtomicMeasure(np.array([[0.5]]), np.ones(1)))
        with pytest.raises(ValueError):
            C.cz_stopping(np.ones(1), empty, Cube(0, (1,)), 2.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_stopping_data_properties(self, seed):
        gs, rng = sigma_grid(seed, k=24)
        f = rng.standard_cauchy(24)
        tree = C.cz_stopping(f, gs, TOP, 2.0)
        for chk in tree.validate(gs, f):
            assert chk.passed, chk

    def test_iterated_with_trivial_inner_trees(self):
        gs, rng = sigma_grid(3)
        f = rng.normal(size=16)
        outer = C.cz_stopping(f, gs, TOP, 2.0)
        inner = {F: C.StoppingTree(F, [F], {F: 0.0}) for F in outer.cubes}
        merged = C.iterate_coronas(outer, inner)
        assert merged.cubes == outer.cubes
        assert merged.data == outer.data
        with pytest.raises(ValueError):
            C.iterate_coronas(outer, {})

    @pytest.mark.parametrize("seed", range(3))
    def test_iterated_contains_outer(self, seed):
        gs, rng = sigma_grid(seed + 5, k=20)
        f = rng.standard_cauchy(20)
        outer = C.cz_stopping(f, gs, TOP, 2.0)
        it = C.iterated_cz(f, HaarSystem(gs), outer, 2.0)
        assert set(outer.cubes) <= set(it.cubes)
        assert all(it.data[F] >= outer.data[F] for F in outer.cubes)

    def test_tree_navigation(self):
        tree = C.StoppingTree(TOP, [TOP, Cube(1, (0,)), Cube(3, (1,))])
        assert tree.owner(Cube(4, (2,))) == Cube(3, (1,))
        assert tree.parent(Cube(3, (1,))) == Cube(1, (0,))
        assert tree.depth(Cube(3, (1,))) == 2
        assert tree.children_of(TOP) == [Cube(1, (0,))]
        with pytest.raises(ValueError):
            C.StoppingTree(TOP, [Cube(1, (0,))])


class TestEnergyCorona:
    def test_single_atom_omega_has_no_stops(self):
        rng = np.random.default_rng(0)
        s = AtomicMeasure(rng.random((8, 1)), np.ones(8))
        w = AtomicMeasure(np.array([[0.4]]), np.ones(1))
        ctx = E.EnergyContext(DyadicGrid(1, (0.0,), 0, 10), s, w, 0.0, SIZE)
        assert C.energy_corona(ctx, TOP).cubes == [TOP]

    @pytest.mark.parametrize("seed,start", [(0, 1.0), (1, 1.0), (2, 2.0**-20), (3, 2.0**-20)])
    def test_carleson_and_halving(self, seed, start):
        ctx, _ = context(seed)
        tree = C.energy_corona(ctx, TOP, start=start)
        assert tree.info["converged"]
        assert tree.carleson_check(ctx.gs, 2.0).passed
        masses = C.generation_masses(tree, ctx.gs)
        assert all(b <= 0.5 * a * (1 + 1e-12) for a, b in zip(masses, masses[1:]))

    @pytest.mark.parametrize("seed", range(3))
    def test_stopping_energy_below_threshold(self, seed):
        ctx, _ = context(seed + 7)
        tree = C.energy_corona(ctx, TOP, start=2.0**-20)
        thr = tree.info["C_energy"] * tree.info["bracket"]
        universe = list(ctx.gs.all_occupied())
        for S in tree.cubes:
            corona = [I for I in tree.corona(S, universe) if I != S]
            v, _ = E.stopping_energy(ctx, S, corona)
            assert v < thr * (1 + 1e-12)


class TestSizeSplit:
    def _pairs(self):
        for seed in range(10):
            ctx, rng = context(seed)
            tree = C.energy_corona(ctx, TOP)
            P = C.admissible_pairs(ctx, tree, TOP)
            if len(P) >= 4:
                return ctx, tree, P, rng
        raise AssertionError("no instance with pairs")

    def test_admissible_and_discarded(self):
        ctx, tree, P, _ = self._pairs()
        assert P.violation(ctx.grid, ctx.params) is None
        raw = C.admissible_pairs(ctx, tree, TOP, reduce=False)
        assert set(P.pairs) <= set(raw.pairs)
        assert C.reduce_pairs(ctx, raw).pairs == P.pairs

    def test_shifted_overlap_bounded(self):
        ctx, tree, _, _ = self._pairs()
        ov, _ = C.shifted_overlap(tree, sorted(ctx.haar.bases), ctx.params.tau, ctx.params.eps)
        assert ov <= ctx.params.tau

    @pytest.mark.parametrize("eps", [0.1, 0.5])
    def test_split_partitions_and_small_bound(self, eps):
        ctx, _, P, _ = self._pairs()
        sp = C.bottom_up_split(ctx, P, eps)
        together = sorted(sp.big + [q for v in sp.small.values() for q in v])
        assert together == sorted(P.pairs)
        for L, pairs in sp.small.items():
            assert cube_contains(P.A, L)
            assert E.size_functional(ctx, P.subset(pairs), validate=False).value <= eps * sp.size2 * (1 + 1e-12)
        assert all(c.passed for c in sp.checks)

    def test_empty_collection(self):
        ctx, _ = context(0)
        sp = C.bottom_up_split(ctx, E.AdmissiblePairs(TOP, [], True), 0.5)
        assert sp.size2 == 0.0 and sp.big == [] and sp.small == {} and sp.levels == []

    def test_split_validation(self):
        ctx, _, P, _ = self._pairs()
        with pytest.raises(ValueError):
            C.bottom_up_split(ctx, P, 1.0)
        with pytest.raises(ValueError):
            C.bottom_up_split(ctx, E.AdmissiblePairs(P.A, P.pairs, False), 0.5)


class TestStopForms:
    def test_zero_g(self):
        for seed in range(10):
            ctx, rng = context(seed)
            P = C.admissible_pairs(ctx, C.energy_corona(ctx, TOP), TOP)
            if len(P):
                break
        f = rng.normal(size=len(ctx.sigma))
        forms = C.sublinear_stop_form(ctx, P, f, np.zeros(len(ctx.omega)))
        assert forms.one == 0.0 and forms.one_plus_delta == 0.0
        assert forms.phi_bound.passed
        const = C.sublinear_stop_form(ctx, P, np.full(len(ctx.sigma), 2.0), rng.normal(size=len(ctx.omega)))
        assert const.one == pytest.approx(0.0, abs=1e-12) and const.one_plus_delta == pytest.approx(0.0, abs=1e-12)

    def test_phi_sublinear(self):
        for seed in range(10):
            ctx, rng = context(seed)
            P = C.admissible_pairs(ctx, C.energy_corona(ctx, TOP), TOP)
            if len(P) >= 2:
                break
        f = rng.normal(size=len(ctx.sigma))
        assert C.phi_sublinearity(ctx, P, P.pairs[::2], f).passed
