"""Seeded verification suites, one per acceptance property.

Each suite draws its instances from sub-seeds of one master seed and returns
aggregated checks: a check passes when it passes on every instance, and its
witness names the worst instance so it can be re-run alone.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .. import corona as C
from .. import energy as E
from ..checks import Check
from ..geometry import (Cube, DyadicGrid, GoodnessParams, QuasiMap, cube_json, dilate_contained,
                        good_mask, grid_family, m_deep, overlap_beta, tau_good_mask)
from ..haar import HaarSystem, average_and_telescope
from ..measures import AtomicMeasure, GridMeasure, common_points, generate, greedy_split, punctured_mass
from ..muckenhoupt import (CubeFamily, energy_A2, offset_A2, plugged_energy_A2, punctured_A2,
                           separation_floor, tailed_A2)
from ..operator import (KernelSpec, mono_ratio, op_norm, pivotal_ratio, testing_constant,
                        wbp_constant)
from .config import instance_seed

# parameters at which tau-good cubes are plentiful on grids of depth about ten
SIZE_PARAMS = GoodnessParams(r=3, eps=0.7, tau=4, rho=8, gamma=2.0)
DP_PARAMS = GoodnessParams(r=2, eps=0.5, tau=3, rho=6, gamma=2.0)
C_NEC_LIMIT = 64.0


@dataclass
class SuiteResult:
    name: str
    checks: list
    info: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def pmap(fn, items, threads: int = 1):
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _badness(c: Check) -> float:
    if c.rhs > 0:
        return c.lhs / c.rhs
    return c.lhs - c.rhs


def aggregate(name: str, per_instance: list, constant=None) -> Check:
    """Fold [(instance, seed, Check)] into one check keyed on the worst instance."""
    if not per_instance:
        return Check(name, 0.0, 0.0, constant, True, {"instances": 0})
    fails = [t for t in per_instance if not t[2].passed]
    i, seed, worst = fails[0] if fails else max(per_instance, key=lambda t: _badness(t[2]))
    wit = {"instance": i, "seed": seed, "instances": len(per_instance), "failures": len(fails)}
    wit.update(worst.witness)
    return Check(name, worst.lhs, worst.rhs, constant if constant is not None else worst.constant,
                 not fails, wit)


def _fold(results: list, names: list | None = None) -> list[Check]:
    """results: list of (index, seed, [Check, ...]) with matching check names."""
    by: dict = {}
    for i, seed, checks in results:
        for c in checks:
            by.setdefault(c.name, []).append((i, seed, c))
    order = names or list(by)
    return [aggregate(n, by.get(n, [])) for n in order]


def _seeds(seed: int, salt: int, count: int):
    return [(i, instance_seed(seed, salt * 100_000 + i)) for i in range(count)]


def _timed(name, fn):
    t0 = time.perf_counter()
    res = fn()
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# Haar identities


def _haar_instance(args):
    i, seed = args
    rng = np.random.default_rng(seed)
    n = 1 + i % 2
    k = int(rng.integers(1, 17))
    mu = AtomicMeasure(rng.random((k, n)), rng.lognormal(0.0, 1.0, k))
    g0 = DyadicGrid(n, (0.0,) * n, 0, 1)
    floor = separation_floor(g0, [g0.rel_pre(mu.points)])
    g = DyadicGrid(n, (0.0,) * n, 0, max(floor, 1))
    H = HaarSystem(GridMeasure(g, mu))
    gm = H.gm
    f = rng.normal(size=k)
    top = Cube(0, (0,) * n)

    gram = 0.0
    for Q in H.bases:
        V = H.function_values(Q)
        G = (V * mu.masses) @ V.T
        gram = max(gram, float(np.abs(G - np.eye(G.shape[0])).max()))
    norm2 = float((mu.masses * f**2).sum())
    mean = float((mu.masses * f).sum()) / mu.total
    pars = mean**2 * mu.total + sum(float((H.delta_coeffs(Q, f) ** 2).sum()) for Q in H.bases)
    parseval = abs(pars - norm2) / norm2

    tele = 0.0
    for Q1 in gm.all_occupied():
        if Q1.level >= g.bottom_level:
            continue
        for Q0 in gm.occupied(Q1.level + 1):
            if Q0.level == Q1.level + 1 and all(a >> 1 == b for a, b in zip(Q0.index, Q1.index)):
                tele = max(tele, average_and_telescope(H, f, Q0, Q1, top)[1])

    energy = 0.0
    for I in gm.all_occupied():
        ids = gm.ids(I)
        x, w = mu.points[ids], mu.masses[ids]
        m = (w[:, None] * x).sum(0) / w.sum()
        direct = float((w * ((x - m) ** 2).sum(1)).sum())
        energy = max(energy, abs(H.tree_energy(I) - direct) / max(direct, 1.0))
    tol = 1e-9
    return (i, seed, [Check.leq("gram_residual", gram, tol),
                      Check.leq("parseval_residual", parseval, tol),
                      Check.leq("telescoping_residual", tele, tol),
                      Check.leq("energy_identity_residual", energy, tol)])


def haar_suite(seed: int, count: int = 200, threads: int = 1) -> SuiteResult:
    def run():
        res = pmap(_haar_instance, _seeds(seed, 1, count), threads)
        return SuiteResult("haar_identities", _fold(res))
    return _timed("haar_identities", run)


# ---------------------------------------------------------------------------
# energy A2 bounds and the greedy split


def _common_pair(i, seed):
    rng = np.random.default_rng(seed)
    n = 1 + i % 2
    alpha = 0.5 * ((i // 2) % 2) * (n - 0.5)
    count = int(rng.integers(4, 11))
    s, w = generate(int(rng.integers(2**63)), {"kind": "pair_with_common", "count": count, "n": n,
                                               "common_fraction": 0.5, "mass_law": "lognormal"})
    grids = grid_family(n, 0, 4, [0] * n, [0] * n, QuasiMap(), 1, int(rng.integers(2**63)))
    return n, alpha, s, w, grids


def _a2_instance(args):
    i, seed = args
    n, alpha, s, w, grids = _common_pair(i, seed)
    fam = CubeFamily(s, w, grids)
    out = []
    for d in ("forward", "dual"):
        en = energy_A2(s, w, alpha, d, fam=fam)
        pu = punctured_A2(s, w, alpha, d, fam=fam)
        ta = tailed_A2(s, w, alpha, d, fam=fam)
        pl = plugged_energy_A2(s, w, alpha, d, fam=fam)
        k = max(n, 3)
        out.append(Check.leq(f"energy_A2_vs_punctured_{d}", en.value, k * pu.value, k,
                             {"energy_witness": en.witness}, rtol=1e-12))
        out.append(Check.leq(f"plugged_vs_tailed_plus_energy_{d}", pl.value, n * ta.value + en.value, n,
                             {"plugged_witness": pl.witness}))
    return (i, seed, out)


def energy_a2_suite(seed: int, count: int = 100, threads: int = 1) -> SuiteResult:
    def run():
        res = pmap(_a2_instance, _seeds(seed, 2, count), threads)
        return SuiteResult("energy_A2_bounds", _fold(res))
    return _timed("energy_A2_bounds", run)


def _greedy_instance(args):
    i, seed = args
    n, _, s, w, grids = _common_pair(i, seed)
    g = grids[0]
    P = common_points(s, w)
    gs, gw = GridMeasure(g, s), GridMeasure(g, w)
    worst_s = worst_w = (1.0, 0.0, None)
    overlap = 0
    cubes = sorted(set(gs.all_occupied()) | set(gw.all_occupied()))
    for Q in cubes:
        st, wt, _ = greedy_split(g, s, w, Q)
        ms, mw = gs.mass(Q), punctured_mass(g, w, Q, P)
        a, b = st.total, wt.total
        # keep the cube where the kept share is smallest
        if worst_s[2] is None or a * worst_s[1] < worst_s[0] * ms:
            worst_s = (a, ms, Q)
        if worst_w[2] is None or b * worst_w[1] < worst_w[0] * mw:
            worst_w = (b, mw, Q)
        overlap = max(overlap, len(common_points(st, wt)) if len(st) and len(wt) else 0)
    return (i, seed, [
        Check.leq("sigma_tilde_keeps_half", 0.5 * worst_s[1], worst_s[0], 0.5,
                  {"cube": cube_json(worst_s[2])}),
        Check.leq("omega_tilde_keeps_half_punctured", 0.5 * worst_w[1], worst_w[0], 0.5,
                  {"cube": cube_json(worst_w[2])}),
        Check.leq("no_common_atom", overlap, 0),
    ])


def greedy_suite(seed: int, count: int = 100, threads: int = 1) -> SuiteResult:
    def run():
        res = pmap(_greedy_instance, _seeds(seed, 3, count), threads)
        return SuiteResult("greedy_split", _fold(res))
    return _timed("greedy_split", run)


# ---------------------------------------------------------------------------
# energy dynamic programme and monotone chains


def _dp_instance(args):
    i, seed = args
    rng = np.random.default_rng(seed)
    g = DyadicGrid(1, (0.0,), 0, 4)
    s = AtomicMeasure(rng.random((6, 1)), rng.uniform(0.1, 1.0, 6))
    w = AtomicMeasure(rng.random((8, 1)), rng.uniform(0.1, 1.0, 8))
    p = DP_PARAMS
    ctx = E.EnergyContext(g, s, w, 0.0, p)
    diff, arg = 0.0, None
    for I in ctx.gs.all_occupied():
        for var in (E.DEEP, E.PARTIAL, E.PLUGGED, E.STRONG):
            v, _ = E.max_partition(ctx, I, E.contributions(ctx, I, var))
            b, _ = E.brute_force_partition(ctx, I, var)
            if abs(v - b) > diff or arg is None:
                diff, arg = max(diff, abs(v - b)), (I, var.label)
    deep = [E.deep_energy(s, w, 0.0, p, [g], v).value for v in (E.DEEP, E.PARTIAL, E.PLUGGED)]
    ref = [E.refined_energy(s, w, 0.0, p, [g], v).value for v in (E.DEEP, E.PARTIAL, E.PLUGGED)]
    return (i, seed, [
        Check.leq("dp_equals_brute_force", diff, 0.0, None,
                  {"cube": cube_json(arg[0]), "variant": arg[1]} if arg else {}),
        Check.leq("deep_gamma_le_unit", deep[0], deep[1]),
        Check.leq("deep_unit_le_plugged", deep[1], deep[2]),
        Check.leq("refined_gamma_le_unit", ref[0], ref[1]),
        Check.leq("refined_unit_le_plugged", ref[1], ref[2]),
    ])


def energy_dp_suite(seed: int, count: int = 50, threads: int = 1) -> SuiteResult:
    def run():
        res = pmap(_dp_instance, _seeds(seed, 4, count), threads)
        return SuiteResult("energy_dp_and_chain", _fold(res))
    return _timed("energy_dp_and_chain", run)


# ---------------------------------------------------------------------------
# geometry


GEOMETRY_CASES = [
    (1, GoodnessParams(r=3, eps=0.5, tau=4, rho=8, gamma=2.0), 9),
    (1, GoodnessParams(r=4, eps=0.25, tau=5, rho=10, gamma=2.0), 9),
    (1, GoodnessParams(r=4, eps=0.5, tau=5, rho=10, gamma=4.0), 9),
    (2, GoodnessParams(r=3, eps=0.5, tau=4, rho=8, gamma=2.0), 6),
    (2, GoodnessParams(r=4, eps=0.25, tau=5, rho=10, gamma=3.0), 7),
]


def max_overlap(Js: list, gamma: float, n: int) -> int:
    """Largest number of dilates gamma*J covering one point (integer gamma)."""
    if not Js:
        return 0
    if abs(gamma - round(gamma)) > 0:
        raise ValueError("exact overlap counting needs an integer dilation")
    gam = int(round(gamma))
    fine = max(J.level for J in Js)
    # endpoints in units of half the finest side
    lows, highs = [], []
    for J in Js:
        s = 2 ** (fine - J.level)
        a = np.asarray(J.index, dtype=np.int64)
        lows.append((2 * a + 1 - gam) * s)
        highs.append((2 * a + 1 + gam) * s)
    lows, highs = np.array(lows), np.array(highs)
    off = lows.min(axis=0)
    lows, highs = lows - off, highs - off
    shape = tuple(int(v) + 1 for v in highs.max(axis=0))
    diff = np.zeros(shape, dtype=np.int64)
    for lo, hi in zip(lows, highs):
        for corner in np.ndindex(*(2,) * n):
            idx = tuple(int(hi[k] if c else lo[k]) for k, c in enumerate(corner))
            diff[idx] += (-1) ** sum(corner)
    for ax in range(n):
        diff = np.cumsum(diff, axis=ax)
    return int(diff.max())


def _geometry_case(args):
    i, (n, p, bottom) = args
    g = DyadicGrid(n, (0.0,) * n, 0, bottom)
    contained = True
    bad = None
    overlap = 0
    arg = None
    for lev in range(0, bottom - p.r + 1):
        for K in g.cubes_at(lev):
            Js = m_deep(g, K, p)
            for J in Js:
                if not dilate_contained(J, p.gamma, K):
                    contained, bad = False, (K, J)
                    break
            ov = max_overlap(Js, p.gamma, n)
            if ov > overlap:
                overlap, arg = ov, K
            if n == 2 and lev >= 1:
                break
    beta = overlap_beta(n, p.r, p.eps, p.gamma)
    tag = {"n": n, "r": p.r, "eps": p.eps, "gamma": p.gamma}
    return (i, 0, [
        Check("gamma_dilate_contained", 0.0 if contained else 1.0, 0.0, None, contained,
              dict(tag, **({} if bad is None else {"K": cube_json(bad[0]), "J": cube_json(bad[1])}))),
        Check.leq("bounded_overlap", overlap, beta, beta,
                  dict(tag, **({} if arg is None else {"K": cube_json(arg)}))),
    ])


BETTER_GOOD_CASES = [(4, 0.3, 5), (4, 0.5, 5), (5, 0.6, 6), (6, 0.8, 7)]


def better_good_counterexamples(n: int, bottom: int, r: int = 4, eps: float = 0.3, tau: int = 5):
    """Cubes that are (r-1, delta)-good but not tau-good for (r, eps), delta at the lemma's bound."""
    delta = (r * eps - 1) / (r + tau)
    p = GoodnessParams(r=r, eps=eps, tau=tau, rho=r + tau + 1, gamma=2.0)
    g = DyadicGrid(n, (0.0,) * n, 0, bottom)
    bad, checked, good = [], 0, 0
    for lev in range(0, bottom + 1):
        side = np.arange(2**lev)
        idx = np.stack(np.meshgrid(*([side] * n), indexing="ij"), -1).reshape(-1, n)
        a = good_mask(lev, idx, g, r - 1, delta)
        b = tau_good_mask(lev, idx, g, p)
        checked += idx.shape[0]
        good += int(a.sum())
        for row in np.nonzero(a & ~b)[0]:
            bad.append(Cube(lev, tuple(int(v) for v in idx[row])))
    return bad, checked, good, delta


def geometry_suite(seed: int = 0, threads: int = 1) -> SuiteResult:
    def run():
        res = pmap(_geometry_case, list(enumerate(GEOMETRY_CASES)), threads)
        checks = _fold(res)
        info = {"overlap": [{"n": n, "r": p.r, "eps": p.eps, "gamma": p.gamma,
                             "count": int(c[1].lhs), "beta": c[1].rhs}
                            for (n, p, _), (_, _, c) in zip(GEOMETRY_CASES, res)]}
        total_bad, total = 0, 0
        for r, eps, tau in BETTER_GOOD_CASES:
            for n, bottom in ((1, 14), (2, 7)):
                bad, checked, good, delta = better_good_counterexamples(n, bottom, r, eps, tau)
                total_bad += len(bad)
                total += checked
                info[f"better_good_r{r}_eps{eps}_tau{tau}_n{n}"] = {
                    "checked": checked, "good_in": good, "delta": delta,
                    "counterexamples": [cube_json(c) for c in bad[:5]]}
        checks.append(Check.leq("better_good_counterexamples", total_bad, 0, None, {"checked": total}))
        return SuiteResult("geometry", checks, info)
    return _timed("geometry", run)


# ---------------------------------------------------------------------------
# energy corona


def _corona_instance_measures(rng, n=1):
    s = AtomicMeasure(rng.random((20, n)), rng.lognormal(0.0, 1.0, 20))
    w = AtomicMeasure(rng.random((30, n)), rng.lognormal(0.0, 1.0, 30))
    return s, w


def _energy_corona_instance(args):
    i, seed = args
    rng = np.random.default_rng(seed)
    s, w = _corona_instance_measures(rng)
    g = DyadicGrid(1, (0.0,), 0, 8)
    p = SIZE_PARAMS
    ctx = E.EnergyContext(g, s, w, 0.0, p)
    top = Cube(0, (0,))
    B = C.energy_bracket(ctx)
    out = []
    for label, start in (("default", 1.0), ("stressed", 2.0**-20)):
        tree = C.energy_corona(ctx, top, "auto", bracket=B, start=start)
        car = tree.carleson_check(ctx.gs, 2.0)
        out.append(Check(f"carleson_le_2_{label}", car.lhs, car.rhs, 2.0, car.passed,
                         dict(car.witness, stopping_cubes=len(tree.cubes),
                              C_energy=tree.info["C_energy"])))
        gens = C.generation_masses(tree, ctx.gs)
        halving = all(b <= 0.5 * a * (1 + 1e-12) for a, b in zip(gens, gens[1:]))
        out.append(Check(f"generation_halving_{label}", 0.0 if halving else 1.0, 0.0, None, halving,
                         {"generation_masses": gens}))
        # cubes of each corona other than its top did not stop, so their stopping sums stay below
        worst, arg = 0.0, None
        thr = tree.info["C_energy"] * B
        for S in tree.cubes:
            for I in C._occupied_under(ctx.gs, S):
                if I == S or tree.owner(I) != S:
                    continue
                v = E.stop_sum(ctx, S, I) / (thr * ctx.gs.mass(I)) if thr > 0 else 0.0
                if v > worst:
                    worst, arg = v, (S, I)
        out.append(Check.leq(f"stopping_energy_bound_{label}", worst, 1.0, tree.info["C_energy"],
                             {} if arg is None else {"S": cube_json(arg[0]), "I": cube_json(arg[1])}))
    return (i, seed, out)


def energy_corona_suite(seed: int, count: int = 50, threads: int = 1) -> SuiteResult:
    def run():
        res = pmap(_energy_corona_instance, _seeds(seed, 7, count), threads)
        return SuiteResult("energy_corona", _fold(res))
    return _timed("energy_corona", run)


# ---------------------------------------------------------------------------
# size lemma


def size_instance(seed: int, bottom: int = 12, n_sigma: int = 32, n_omega: int = 128):
    rng = np.random.default_rng(seed)
    s = AtomicMeasure(rng.random((n_sigma, 1)), rng.lognormal(0.0, 1.0, n_sigma))
    w = AtomicMeasure(rng.random((n_omega, 1)), rng.lognormal(0.0, 1.0, n_omega))
    g = DyadicGrid(1, (0.0,), 0, bottom)
    ctx = E.EnergyContext(g, s, w, 0.0, SIZE_PARAMS)
    return ctx, rng


def size_pipeline(ctx: E.EnergyContext, eps_list, rng, rounds: int = 10, start: float = 1.0):
    """Energy corona, admissible pairs under its top, bottom-up splits and their checks."""
    top = Cube(ctx.grid.top_level, tuple(ctx.grid.root_lo))
    tree = C.energy_corona(ctx, top, start=start)
    P = C.admissible_pairs(ctx, tree, top, reduce=True)
    checks = []
    bad = P.violation(ctx.grid, ctx.params)
    checks.append(Check("pairs_admissible", 0.0 if bad is None else 1.0, 0.0, None, bad is None,
                        {} if bad is None else {"reason": bad[1], "pair": [cube_json(c) for c in bad[0]]}))
    universe = sorted(ctx.haar.bases)
    ov, J = C.shifted_overlap(tree, universe, ctx.params.tau, ctx.params.eps)
    checks.append(Check.leq("shifted_overlap_le_tau", ov, ctx.params.tau, ctx.params.tau,
                            {} if J is None else {"J": cube_json(J)}))
    info = {"pairs": len(P), "stopping_cubes": len(tree.cubes)}
    f = rng.normal(size=len(ctx.sigma))
    if not P.pairs:
        checks.append(Check("phi_bound", 0.0, 0.0, 2.0, True, {}))
        return P, tree, checks, info
    for eps in eps_list:
        sp = C.bottom_up_split(ctx, P, eps)
        small = [q for v in sp.small.values() for q in v]
        for c in sp.checks + [C.phi_sublinearity(ctx, P, small, f)]:
            checks.append(replace(c, name=f"{c.name}_eps{eps}"))
        info[f"eps{eps}"] = {"levels": [len(x) for x in sp.levels], "big": len(sp.big),
                             "small": len(small), "size_squared": sp.size2,
                             "rounds": C.size_rounds(ctx, P, eps, rounds) if rounds else []}
    forms = C.sublinear_stop_form(ctx, P, f, rng.normal(size=len(ctx.omega)))
    checks.append(forms.phi_bound)
    info["stop_forms"] = [forms.one, forms.one_plus_delta]
    return P, tree, checks, info


def _size_instance(args):
    i, seed = args
    ctx, rng = size_instance(seed)
    _, _, checks, info = size_pipeline(ctx, (0.1, 0.5), rng, rounds=0)
    return (i, seed, checks), info


def size_lemma_suite(seed: int, count: int = 50, threads: int = 1) -> SuiteResult:
    def run():
        res = pmap(_size_instance, _seeds(seed, 8, count), threads)
        checks = _fold([r[0] for r in res])
        info = {"pairs": [r[1]["pairs"] for r in res],
                "nontrivial_small": sum(any(r[1].get(f"eps{e}", {}).get("small", 0) > 0 for e in (0.1, 0.5))
                                        for r in res)}
        return SuiteResult("size_lemma", checks, info)
    return _timed("size_lemma", run)


# ---------------------------------------------------------------------------
# necessity and operator comparisons


NEC_KERNEL = KernelSpec(n=1, alpha=0.0, family="riesz_component", component=1)


def _nec_measures(i, seed, common: bool):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 11))
    if common:
        return generate(int(rng.integers(2**63)), {"kind": "pair_with_common", "count": k, "n": 1,
                                                   "common_fraction": 0.5, "mass_law": "lognormal"})
    s = AtomicMeasure(rng.random((k, 1)), rng.lognormal(0.0, 1.0, k))
    w = AtomicMeasure(rng.random((k, 1)), rng.lognormal(0.0, 1.0, k))
    return s, w


def _nec_instance(args):
    i, seed, common = args
    s, w = _nec_measures(i, seed, common)
    grids = grid_family(1, 0, 4, [0], [0], QuasiMap(), 1, seed)
    fam = CubeFamily(s, w, grids)
    N = op_norm(s, w, NEC_KERNEL)[0]
    if common:
        v = punctured_A2(s, w, 0.0, "forward", fam=fam).value
    else:
        v = offset_A2(s, w, 0.0, grids, fam).value
    return {"instance": i, "seed": seed, "norm": N, "a2": v,
            "ratio": math.sqrt(v) / N if N > 0 else (0.0 if v == 0 else math.inf)}


def necessity_ratios_suite(seed: int, count: int = 50, threads: int = 1) -> dict:
    plain = pmap(_nec_instance, [(i, s, False) for i, s in _seeds(seed, 9, count)], threads)
    common = pmap(_nec_instance, [(i, s, True) for i, s in _seeds(seed, 10, count)], threads)
    return {"offset": plain, "punctured": common}


def calibrate_C_nec(seed: int, count: int = 50, threads: int = 1) -> float:
    """Suite maximum of sqrt(offset A2) / N, rounded up to three significant digits."""
    rows = necessity_ratios_suite(seed, count, threads)["offset"]
    m = max(r["ratio"] for r in rows)
    if m <= 0:
        return 0.0
    e = math.floor(math.log10(m)) - 2
    return math.ceil(m / 10**e) * 10**e


def necessity_suite(seed: int, C_nec: float, count: int = 50, threads: int = 1) -> SuiteResult:
    def run():
        rows = necessity_ratios_suite(seed, count, threads)
        off = [(r["instance"], r["seed"], Check.leq("offset_A2_root_le_C_nec_norm", r["ratio"], C_nec, C_nec,
                                                   {"norm": r["norm"], "offset_A2": r["a2"]}))
               for r in rows["offset"]]
        bound = 2 * math.sqrt(C_nec)
        pun = [(r["instance"], r["seed"], Check.leq("punctured_A2_root_le_2sqrtC_nec_norm", r["ratio"], bound,
                                                   bound, {"norm": r["norm"], "punctured_A2": r["a2"]}))
               for r in rows["punctured"]]
        checks = [aggregate("offset_A2_root_le_C_nec_norm", off, C_nec),
                  aggregate("punctured_A2_root_le_2sqrtC_nec_norm", pun, bound),
                  Check.leq("C_nec_le_64", C_nec, C_NEC_LIMIT)]
        info = {"C_nec": C_nec,
                "max_offset_ratio": max(r["ratio"] for r in rows["offset"]),
                "max_punctured_ratio": max(r["ratio"] for r in rows["punctured"])}
        return SuiteResult("necessity", checks, info)
    return _timed("necessity", run)


def _ratio_instance(args):
    i, seed = args
    rng = np.random.default_rng(seed)
    n = 1 + i % 2
    alpha = [0.0, 0.5][(i // 2) % 2]
    out = []
    # homogeneity under coordinate doubling, untruncated kernels
    J = Cube(3, tuple(int(v) for v in rng.integers(2, 6, size=n)))
    g1 = DyadicGrid(n, (0.0,) * n, 0, 9)
    g2 = DyadicGrid(n, (0.0,) * n, -1, 8)
    J2 = Cube(J.level - 1, J.index)
    side = 2.0 ** -J.level
    lo = np.asarray(J.index) * side
    k = int(rng.integers(2, 9))
    om = AtomicMeasure(lo + side * rng.random((k, n)), rng.lognormal(0.0, 1.0, k))
    far = []
    while len(far) < 5:
        x = rng.random(n)
        if np.any(np.abs(x - (lo + side / 2)) >= 1.5 * side):
            far.append(x)
    mu = AtomicMeasure(np.array(far), rng.lognormal(0.0, 1.0, 5))
    spec = KernelSpec(n=n, alpha=alpha, truncation="none",
                      family="riesz_vector" if i % 3 == 0 else "riesz_component")
    r1 = mono_ratio(g1, J, om, mu, spec)
    r2 = mono_ratio(g2, J2, om.scaled(1.0, 2.0), mu.scaled(1.0, 2.0), spec)
    out.append(Check.leq("mono_ratio_doubling", abs(r1.ratio - r2.ratio), 1e-12 * max(1.0, r1.ratio),
                         None, {"ratio": r1.ratio}))
    H = HaarSystem(GridMeasure(g1, om))
    coef = {Q: rng.normal(size=b.values.shape[0]) for Q, b in H.bases.items()}
    psi = np.zeros(len(om))
    for Q, c in coef.items():
        psi += c @ H.function_values(Q)
    if np.any(psi):
        p1 = pivotal_ratio(g1, J, psi, om, mu, spec)
        p2 = pivotal_ratio(g2, J2, psi, om.scaled(1.0, 2.0), mu.scaled(1.0, 2.0), spec)
    else:
        p1 = p2 = 0.0
    out.append(Check.leq("pivotal_ratio_doubling", abs(p1 - p2), 1e-12 * max(1.0, p1), None,
                         {"ratio": p1}))
    # operator comparisons with the default tangent truncation
    s = AtomicMeasure(rng.random((6, n)), rng.lognormal(0.0, 1.0, 6))
    w = AtomicMeasure(rng.random((6, n)), rng.lognormal(0.0, 1.0, 6))
    grids = grid_family(n, 0, 4, [0] * n, [0] * n, QuasiMap(), 1, seed)
    fam = CubeFamily(s, w, grids)
    tspec = KernelSpec(n=n, alpha=alpha, family=spec.family)
    N = op_norm(s, w, tspec)[0]
    for label, cw in (("testing", testing_constant(s, w, tspec, "forward", fam=fam)),
                      ("testing_dual", testing_constant(s, w, tspec, "dual", fam=fam)),
                      ("testing_tripled", testing_constant(s, w, tspec, "forward", True, fam=fam)),
                      ("wbp", wbp_constant(s, w, tspec, 2.0, fam=fam))):
        out.append(Check.leq(f"{label}_le_norm", cw.value, N, 1.0, cw.witness, rtol=1e-12))
    return (i, seed, out)


def ratio_suite(seed: int, count: int = 30, threads: int = 1) -> SuiteResult:
    def run():
        res = pmap(_ratio_instance, _seeds(seed, 11, count), threads)
        return SuiteResult("ratios_and_testing", _fold(res))
    return _timed("ratios_and_testing", run)


def all_suites(seed: int, C_nec: float, threads: int = 1, count: int | None = None) -> list[SuiteResult]:
    """Every suite at its standard instance count, or at ``count`` instances each."""
    def k(v):
        return v if count is None else max(1, int(count))

    return [
        haar_suite(seed, k(200), threads),
        energy_a2_suite(seed, k(100), threads),
        greedy_suite(seed, k(100), threads),
        energy_dp_suite(seed, k(50), threads),
        geometry_suite(seed, threads),
        energy_corona_suite(seed, k(50), threads),
        size_lemma_suite(seed, k(50), threads),
        necessity_suite(seed, C_nec, k(50), threads),
        ratio_suite(seed, k(30), threads),
    ]
