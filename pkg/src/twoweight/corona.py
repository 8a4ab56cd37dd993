"""Stopping trees: Calderon-Zygmund and energy coronas, iterated stopping data,
shifted coronas, admissible pairs and the bottom-up size splitting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .checks import Check
from .energy import (AdmissiblePairs, EnergyContext, deep_energy, size_functional, stop_sum,
                     tent_energies, tent_mass)
from .geometry import (Cube, ancestor, children, cube_contains, cube_json, is_deeply_embedded,
                       is_good, sort_key)
from .haar import HaarSystem
from .measures import GridMeasure
from .muckenhoupt import punctured_A2, tailed_A2
from .poisson import Region, poisson_sum

_RTOL = 1e-12


# ---------------------------------------------------------------------------
# stopping trees


@dataclass
class StoppingTree:
    """Stopping cubes under a root, with optional stopping data.

    Property (1) of stopping data is checked as E_I|f| <= avg_factor * data(F);
    Calderon-Zygmund trees carry avg_factor = C.
    """

    root: Cube
    cubes: list
    data: dict | None = None
    C0: float = 4.0
    avg_factor: float = 1.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cubes = sorted(set(self.cubes), key=sort_key)
        if self.root not in self.cubes:
            raise ValueError("the root must be a stopping cube")
        self._set = set(self.cubes)

    def __contains__(self, c):
        return c in self._set

    def owner(self, I: Cube) -> Cube | None:
        """Minimal stopping cube containing I."""
        if not cube_contains(self.root, I):
            return None
        for lev in range(I.level, self.root.level - 1, -1):
            a = ancestor(I, lev)
            if a in self._set:
                return a
        return None

    def parent(self, F: Cube) -> Cube | None:
        if F == self.root:
            return None
        return self.owner(ancestor(F, F.level - 1))

    def children_of(self, F: Cube) -> list:
        return [G for G in self.cubes if G != F and self.parent(G) == F]

    def depth(self, F: Cube) -> int:
        d = 0
        while (F := self.parent(F)) is not None:
            d += 1
        return d

    def in_corona(self, F: Cube, I: Cube) -> bool:
        return self.owner(I) == F

    def corona(self, F: Cube, universe) -> list:
        return sorted((I for I in universe if self.owner(I) == F), key=sort_key)

    def carleson_sums(self, mass) -> dict:
        """{F: sum of |F'| over stopping F' inside F}."""
        m = {F: mass(F) for F in self.cubes}
        return {F: sum(m[G] for G in self.cubes if cube_contains(F, G)) for F in self.cubes}

    def carleson_check(self, gs: GridMeasure, bound: float) -> Check:
        """sum of |S| over stopping S inside I, against bound |I|, for every charged I."""
        m = {F: gs.mass(F) for F in self.cubes}
        worst, arg = 0.0, self.root
        for I in _occupied_under(gs, self.root):
            mi = gs.mass(I)
            r = sum(v for F, v in m.items() if cube_contains(I, F)) / mi
            if r > worst:
                worst, arg = r, I
        return Check.leq("carleson_all", worst, bound, bound, {"cube": cube_json(arg)}, _RTOL)

    # --- stopping-data properties
    def validate(self, gs: GridMeasure, f=None) -> list[Check]:
        checks = []
        mass = gs.mass
        sums = self.carleson_sums(mass)
        worst = max(self.cubes, key=lambda F: sums[F] / mass(F) if mass(F) > 0 else 0.0)
        ratio = sums[worst] / mass(worst) if mass(worst) > 0 else 0.0
        checks.append(Check.leq("carleson", ratio, self.C0, self.C0,
                                {"cube": cube_json(worst)}, _RTOL))
        if self.data is None or f is None:
            return checks
        absf = np.abs(np.asarray(f, float))
        worst1 = (0.0, None, 0.0)
        for I in _occupied_under(gs, self.root):
            ids = gs.ids(I)
            avg = float((gs.w[ids] * absf[ids]).sum() / gs.w[ids].sum())
            bound = self.avg_factor * self.data[self.owner(I)]
            excess = avg - bound
            if worst1[1] is None or excess > worst1[0]:
                worst1 = (excess, I, bound)
        ex, I, bound = worst1
        checks.append(Check.leq("average_bound", bound + ex, bound, self.avg_factor,
                                {"cube": cube_json(I)}, _RTOL))
        quasi = sum(self.data[F] ** 2 * mass(F) for F in self.cubes)
        norm2 = float((gs.w * absf**2).sum())
        checks.append(Check.leq("quasi_orthogonality", quasi, self.C0**2 * norm2, self.C0 ** 2,
                                {}, _RTOL))
        bad = None
        for F in self.cubes:
            P = self.parent(F)
            if P is not None and self.data[P] > self.data[F] * (1 + _RTOL):
                bad = (F, P)
                break
        checks.append(Check("monotone_data", 0.0 if bad is None else 1.0, 0.0, None, bad is None,
                            {} if bad is None else {"cube": cube_json(bad[0]),
                                                    "parent": cube_json(bad[1])}))
        return checks

    def to_json(self) -> dict:
        def node(F):
            out = {"cube": cube_json(F)}
            if self.data is not None:
                out["data"] = float(self.data[F])
            out["children"] = [node(G) for G in self.children_of(F)]
            return out

        return {"C0": self.C0, "avg_factor": self.avg_factor, "info": self.info,
                "tree": node(self.root)}


def _occupied_under(gm: GridMeasure, top: Cube) -> list:
    out, stack = [], [top]
    g = gm.grid
    while stack:
        Q = stack.pop()
        if Q not in gm.occupied(Q.level):
            continue
        out.append(Q)
        if Q.level < g.bottom_level:
            stack.extend(children(Q))
    return sorted(out, key=sort_key)


def _average(gm: GridMeasure, Q: Cube, values) -> float:
    ids = gm.ids(Q)
    return float((gm.w[ids] * values[ids]).sum() / gm.w[ids].sum())


def cz_constant(C: float) -> float:
    """Stopping-data constant for Calderon-Zygmund cubes with jump C.

    Children of a stopping cube carry less than 1/C of its mass, so the
    Carleson sums are at most C/(C-1); the weighted dyadic Carleson embedding
    then bounds the quasi-orthogonality sum by 4C/(C-1).
    """
    lam = C / (C - 1)
    return max(4.0, lam, 2 * math.sqrt(lam))


def cz_stopping(f, gs: GridMeasure, top: Cube, C: float) -> StoppingTree:
    if C <= 1:
        raise ValueError("the jump constant must exceed 1")
    if gs.mass(top) <= 0:
        raise ValueError(f"top cube {cube_json(top)} carries no sigma mass")
    absf = np.abs(np.asarray(f, float))
    g = gs.grid
    data = {top: _average(gs, top, absf)}
    queue = [top]
    while queue:
        F = queue.pop()
        a = data[F]
        stack = [c for c in children(F)] if F.level < g.bottom_level else []
        while stack:
            Q = stack.pop()
            if Q not in gs.occupied(Q.level):
                continue
            avg = _average(gs, Q, absf)
            if avg > C * a:
                data[Q] = avg
                queue.append(Q)
            elif Q.level < g.bottom_level:
                stack.extend(children(Q))
    return StoppingTree(top, list(data), data, cz_constant(C), C, {"kind": "calderon_zygmund", "C": C})


def corona_projection(H: HaarSystem, tree: StoppingTree, F: Cube, f) -> np.ndarray:
    """Values of the corona projection of f onto the Haar cubes in the corona of F."""
    out = np.zeros(len(H.mu))
    for Q in H.bases:
        if tree.owner(Q) == F:
            out += H.delta_values(Q, f)
    return out


def iterate_coronas(outer: StoppingTree, inner: dict) -> StoppingTree:
    """Merge inner stopping trees (one per outer cube, rooted there) into iterated data."""
    if outer.data is None:
        raise ValueError("outer tree needs stopping data")
    cubes, data = [], {}
    C0 = outer.C0
    for F in outer.cubes:
        K = inner.get(F)
        if K is None or K.root != F:
            raise ValueError(f"inner tree for {cube_json(F)} is missing or not rooted there")
        C0 = max(C0, K.C0)
        aF = outer.data[F]
        for Q in K.cubes:
            if Q == F:
                continue
            if outer.owner(Q) == F and K.data[Q] >= aF:
                cubes.append(Q)
                data[Q] = K.data[Q]
        cubes.append(F)
        data[F] = max(aF, K.data[F])
    return StoppingTree(outer.root, cubes, data, 2 * C0**2, outer.avg_factor,
                        {"kind": "iterated", "inner_constant": C0})


def iterated_cz(f, H: HaarSystem, outer: StoppingTree, C: float) -> StoppingTree:
    """Iterate a Calderon-Zygmund tree with inner CZ trees of each corona projection."""
    gs = H.gm
    inner = {}
    for F in outer.cubes:
        pf = corona_projection(H, outer, F, f)
        if np.abs(pf[gs.ids(F)]).sum() > 0:
            inner[F] = cz_stopping(pf, gs, F, C)
        else:
            inner[F] = StoppingTree(F, [F], {F: 0.0}, outer.C0, C)
    return iterate_coronas(outer, inner)


# ---------------------------------------------------------------------------
# energy corona


def energy_bracket(ctx: EnergyContext) -> float:
    """Squared deep energy plus the forward one-tailed and punctured constants."""
    s, w, a, p = ctx.sigma, ctx.omega, ctx.alpha, ctx.params
    e = deep_energy(s, w, a, p, [ctx.grid]).value
    t = tailed_A2(s, w, a, "forward", [ctx.grid]).value
    q = punctured_A2(s, w, a, "forward", [ctx.grid]).value
    return e + t + q


def _energy_stops(ctx: EnergyContext, S: Cube, threshold: float) -> list:
    """Maximal sigma-charged I strictly inside S whose stopping sum reaches threshold |I|."""
    gs, g = ctx.gs, ctx.grid
    out = []
    stack = children(S) if S.level < g.bottom_level else []
    while stack:
        Q = stack.pop()
        ms = gs.mass(Q)
        if ms <= 0:
            continue
        lhs = stop_sum(ctx, S, Q)
        if lhs > 0 and lhs >= threshold * ms:
            out.append(Q)
        elif Q.level < g.bottom_level:
            stack.extend(children(Q))
    return sorted(out, key=sort_key)


def _energy_tree(ctx, S0, threshold):
    cubes, gens = [S0], []
    frontier = [S0]
    halving = True
    worst = None
    while frontier:
        nxt = []
        for S in frontier:
            kids = _energy_stops(ctx, S, threshold)
            km = sum(ctx.gs.mass(K) for K in kids)
            if km > 0.5 * ctx.gs.mass(S) * (1 + _RTOL):
                halving = False
                worst = S
            nxt.extend(kids)
        if nxt:
            gens.append(nxt)
        cubes.extend(nxt)
        frontier = nxt
    return cubes, gens, halving, worst


def energy_corona(ctx: EnergyContext, S0: Cube, C_energy="auto", bracket: float | None = None,
                  max_doublings: int = 200, start: float = 1.0) -> StoppingTree:
    """Energy stopping cubes under S0.

    In auto mode the constant doubles from ``start`` until every stopping cube's
    stopping children carry at most half its sigma mass, which gives the
    Carleson bound 2.
    """
    if ctx.gs.mass(S0) <= 0:
        raise ValueError("S0 carries no sigma mass")
    B = energy_bracket(ctx) if bracket is None else bracket
    if C_energy != "auto":
        cubes, gens, halving, _ = _energy_tree(ctx, S0, float(C_energy) * B)
        return StoppingTree(S0, cubes, None, 2.0, 1.0,
                            {"kind": "energy", "C_energy": float(C_energy), "bracket": B,
                             "generations": len(gens), "halving": halving})
    C = float(start)
    for k in range(max_doublings + 1):
        cubes, gens, halving, worst = _energy_tree(ctx, S0, C * B)
        if halving:
            return StoppingTree(S0, cubes, None, 2.0, 1.0,
                                {"kind": "energy", "C_energy": C, "bracket": B, "doublings": k,
                                 "generations": len(gens), "converged": True})
        C *= 2
    return StoppingTree(S0, cubes, None, 2.0, 1.0,
                        {"kind": "energy", "C_energy": C / 2, "bracket": B, "doublings": max_doublings,
                         "generations": len(gens), "converged": False,
                         "worst": cube_json(worst) if worst else None})


def generation_masses(tree: StoppingTree, gs: GridMeasure) -> list[float]:
    by: dict = {}
    for F in tree.cubes:
        by.setdefault(tree.depth(F), 0.0)
        by[tree.depth(F)] += gs.mass(F)
    return [by[d] for d in sorted(by)]


# ---------------------------------------------------------------------------
# shifted coronas


def nearby(J: Cube, K: Cube, tau: int) -> bool:
    """J inside K with side larger than 2^-tau l(K)."""
    return cube_contains(K, J) and J.level - K.level < tau


def in_shifted_corona(tree: StoppingTree, B: Cube, J: Cube, tau: int, eps: float) -> bool:
    if not is_deeply_embedded(J, B, tau, eps):
        return False
    if tree.owner(J) == B:
        return True
    kids = tree.children_of(B)
    return any(nearby(J, Bc, tau) for Bc in kids)


def shifted_owners(tree: StoppingTree, J: Cube, tau: int, eps: float) -> list:
    """Tree cubes whose shifted corona contains J."""
    out = []
    for lev in range(J.level, tree.root.level - 1, -1):
        B = ancestor(J, lev)
        if B in tree and in_shifted_corona(tree, B, J, tau, eps):
            out.append(B)
    return out


def shifted_overlap(tree: StoppingTree, universe, tau: int, eps: float) -> tuple[int, Cube | None]:
    worst, arg = 0, None
    for J in universe:
        k = len(shifted_owners(tree, J, tau, eps))
        if k > worst:
            worst, arg = k, J
    return worst, arg


# ---------------------------------------------------------------------------
# admissible pairs


def admissible_pairs(ctx: EnergyContext, tree: StoppingTree, A: Cube, reduce: bool = True) -> AdmissiblePairs:
    """Pairs (I, J) with I in the corona of A other than A, J a tau-good omega Haar
    cube in the shifted corona of A, and J deeply embedded in I at depth rho - 1."""
    p, g = ctx.params, ctx.grid
    pairs = []
    for J in sorted(ctx.haar.bases, key=sort_key):
        if not cube_contains(A, J) or J == A:
            continue
        if not in_shifted_corona(tree, A, J, p.tau, p.eps):
            continue
        if not is_good(g, J, p, "tau_good"):
            continue
        Is = []
        for lev in range(J.level - 1, A.level, -1):
            I = ancestor(J, lev)
            if tree.owner(I) == A and is_deeply_embedded(J, I, p.rho - 1, p.eps):
                Is.append(I)
        if reduce:
            good = [I for I in Is if is_good(g, I, p)]
            if not good:
                continue
            top = min(good, key=lambda c: c.level)
            Is = [I for I in Is if cube_contains(top, I)]
        pairs.extend((I, J) for I in Is)
    return AdmissiblePairs(A, sorted(pairs, key=lambda q: (sort_key(q[0]), sort_key(q[1]))), reduce)


def reduce_pairs(ctx: EnergyContext, P: AdmissiblePairs) -> AdmissiblePairs:
    by: dict = {}
    for I, J in P.pairs:
        by.setdefault(J, []).append(I)
    out = []
    for J, Is in by.items():
        good = [I for I in Is if is_good(ctx.grid, I, ctx.params)]
        if not good:
            continue
        top = min(good, key=lambda c: c.level)
        out.extend((I, J) for I in Is if cube_contains(top, I))
    return AdmissiblePairs(P.A, sorted(out, key=lambda q: (sort_key(q[0]), sort_key(q[1]))), True)


# ---------------------------------------------------------------------------
# bottom-up size splitting


@dataclass
class SizeSplit:
    levels: list
    final: list
    big: list
    small: dict
    size2: float
    small_size2: dict
    eps: float
    checks: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "size_squared": self.size2,
            "eps": self.eps,
            "levels": [[cube_json(L) for L in lev] for lev in self.levels],
            "final_level": [cube_json(L) for L in self.final],
            "big": len(self.big),
            "small": [{"L": cube_json(L), "pairs": len(v), "size_squared": self.small_size2[L]}
                      for L, v in sorted(self.small.items(), key=lambda kv: sort_key(kv[0]))],
            "checks": [c.to_json() for c in self.checks],
        }


def _goodbelow_ancestors(ctx, K, tops):
    """Good strict ancestors of K lying inside some cube of tops."""
    out = []
    for lev in range(K.level - 1, ctx.grid.top_level - 1, -1):
        L = ancestor(K, lev)
        if not any(cube_contains(T, L) for T in tops):
            break
        if ctx.haar.is_good(L, ctx.params.r, ctx.params.eps):
            out.append(L)
    return out


def _minimal(cubes) -> list:
    s = set(cubes)
    return sorted((K for K in s if not any(L != K and cube_contains(K, L) for L in s)), key=sort_key)


def _maximal(cubes) -> list:
    s = set(cubes)
    return sorted((K for K in s if not any(L != K and cube_contains(L, K) for L in s)), key=sort_key)


def bottom_up_split(ctx: EnergyContext, P: AdmissiblePairs, eps_split: float) -> SizeSplit:
    if not 0 < eps_split < 1:
        raise ValueError("eps_split must lie in (0, 1)")
    if P.pairs and not P.reduced:
        raise ValueError("the bottom-up split needs a reduced collection")
    p = ctx.params
    tau = p.tau
    size2 = size_functional(ctx, P).value
    energies = tent_energies(ctx, P)
    from .energy import psi2, size_candidates
    tops = P.cubes()
    levels: list = []
    if P.pairs and size2 > 0:
        l0 = []
        for K in size_candidates(ctx, P):
            ms = ctx.sigma_mass(K)
            if ms > 0 and psi2(ctx, K, P.A, K, energies) / ms >= eps_split * size2:
                l0.append(K)
        levels.append(_minimal(l0))
    rho_split = 1 + eps_split
    seen = set(c for lev in levels for c in lev)
    while levels and levels[-1]:
        earlier = sorted(seen, key=sort_key)
        cands = set()
        for K in earlier:
            cands.update(L for L in _goodbelow_ancestors(ctx, K, tops) if L not in seen)
        hits = []
        for L in cands:
            inner = [Lp for Lp in earlier if cube_contains(L, Lp) and Lp != L]
            if not inner:
                continue
            union = sum(e for J, e in energies.items()
                        if any(cube_contains(Lp, J) and J.level - Lp.level >= tau for Lp in inner))
            if tent_mass(energies, L, tau) >= rho_split * union:
                hits.append(L)
        new = _minimal(hits)
        if not new:
            break
        levels.append(new)
        seen.update(new)
    final = [K for K in _maximal(tops) if K not in seen]
    tree_cubes = sorted(seen | set(final), key=sort_key)

    split = SizeSplit(levels, final, [], {}, size2, {}, eps_split)
    if not P.pairs:
        return split
    final_set = set(final)
    roots = _maximal(tree_cubes)
    trees = {R: StoppingTree(R, [c for c in tree_cubes if cube_contains(R, c)]) for R in roots}

    def tree_of(c):
        for R, T in trees.items():
            if cube_contains(R, c):
                return T
        raise ValueError(f"cube {cube_json(c)} lies outside the stopping tree")

    for I, J in P.pairs:
        T = tree_of(I)
        LI = T.owner(I)
        owners = shifted_owners(T, J, tau, p.eps)
        if len(owners) != 1:
            raise ValueError(f"second cube {cube_json(J)} has {len(owners)} shifted-corona owners")
        LJ = owners[0]
        if not cube_contains(LI, LJ):
            raise ValueError(f"pair ({cube_json(I)}, {cube_json(J)}) has its J owner outside L_I")
        t = T.depth(LJ) - T.depth(LI)
        if t >= 1 or (LI not in final_set and I == LI):
            split.big.append((I, J))
        else:
            split.small.setdefault(LI, []).append((I, J))

    # audit: exact multiset conservation and the smallness bound
    out = sorted(split.big + [q for v in split.small.values() for q in v],
                 key=lambda q: (sort_key(q[0]), sort_key(q[1])))
    split.checks.append(Check("pair_conservation", float(len(out)), float(len(P.pairs)), None,
                              out == list(P.pairs), {}))
    worst, arg = 0.0, None
    for L, pairs in split.small.items():
        s = size_functional(ctx, P.subset(pairs), validate=False).value
        split.small_size2[L] = s
        if s > worst or arg is None:
            worst, arg = s, L
    split.checks.append(Check.leq("small_size", worst, eps_split * size2, eps_split,
                                  {"L": cube_json(arg)} if arg is not None else {}, _RTOL))
    return split


def size_rounds(ctx: EnergyContext, P: AdmissiblePairs, eps_split: float, rounds: int = 10) -> list:
    """Max squared size per round of the recursive splitting (small families are
    reduced before the next round)."""
    history = [size_functional(ctx, P).value]
    current = [P]
    for _ in range(rounds):
        nxt = []
        for Q in current:
            if not Q.pairs:
                continue
            sp = bottom_up_split(ctx, Q, eps_split)
            for pairs in sp.small.values():
                R = reduce_pairs(ctx, Q.subset(pairs))
                if R.pairs:
                    nxt.append(R)
        if not nxt:
            break
        history.append(max(size_functional(ctx, Q, validate=False).value for Q in nxt))
        current = nxt
    return history


# ---------------------------------------------------------------------------
# sublinear stopping forms


def phi_values(ctx: EnergyContext, Hs: HaarSystem, P: AdmissiblePairs, J: Cube, f) -> np.ndarray:
    """phi_J at every sigma atom: sum over pairs (I, J) of E_I(Delta_{pi I} f) 1_{A \\ I}."""
    gs = ctx.gs
    out = np.zeros(len(ctx.sigma))
    inA = gs.mask(P.A)
    for I, JJ in P.pairs:
        if JJ != J:
            continue
        ids = gs.ids(I)
        if ids.size == 0:
            continue
        d = Hs.delta_values(ancestor(I, I.level - 1), f)
        avg = float((gs.w[ids] * d[ids]).sum() / gs.w[ids].sum())
        out += avg * (inA & ~gs.mask(I))
    return out


def smallest_first(P: AdmissiblePairs, J: Cube) -> Cube:
    return max((I for I, JJ in P.pairs if JJ == J), key=lambda c: c.level)


@dataclass
class StopForms:
    one: float
    one_plus_delta: float
    phi_bound: Check


def sublinear_stop_form(ctx: EnergyContext, P: AdmissiblePairs, f, g, delta: float = 1.0,
                        alpha_A: float | None = None) -> StopForms:
    gs = ctx.gs
    Hs = HaarSystem(gs)
    Hw = ctx.haar
    n = ctx.grid.n
    f = np.asarray(f, float)
    g = np.asarray(g, float)
    if alpha_A is None:
        absf = np.abs(f)
        alpha_A = max((_average(gs, I, absf) for I in _occupied_under(gs, P.A)), default=0.0)
    one = opd = 0.0
    worst = (0.0, None)
    for J in P.second():
        phi = phi_values(ctx, Hs, P, J, f)
        Imin = smallest_first(P, J)
        allowed = gs.mask(P.A) & ~gs.mask(Imin)
        # phi must vanish off A minus the smallest I; report that as an infinite excess
        peak = float(np.abs(phi[allowed]).max()) if allowed.any() else 0.0
        if np.any(phi[~allowed] != 0):
            peak = math.inf
        if worst[1] is None or peak > worst[0]:
            worst = (peak, J)
        w = np.abs(phi) * allowed * gs.w
        reg = Region.of(inside=P.A, minus=Imin)
        p1 = poisson_sum(ctx.grid, [J], gs, 1.0, n + 1 - ctx.alpha, reg, w)[0]
        pd = poisson_sum(ctx.grid, [J], gs, 1.0 + delta, n + 1 + delta - ctx.alpha, reg, w)[0]
        ell = ctx.grid.side(J)
        dg = math.sqrt(float((Hw.delta_coeffs(J, g) ** 2).sum()))
        one += p1 / ell * math.sqrt(Hw.x_energy(J)) * dg
        opd += pd / ell * math.sqrt(Hw.tree_energy(J)) * dg
    peak, J = worst
    chk = Check.leq("phi_bound", peak, 2 * alpha_A, 2.0,
                    {"J": cube_json(J)} if J is not None else {}, _RTOL)
    return StopForms(float(one), float(opd), chk)


def phi_sublinearity(ctx: EnergyContext, P: AdmissiblePairs, part: list, f) -> Check:
    """|phi_J(P)| <= |phi_J(P1)| + |phi_J(P2)| at every atom for the split P = P1 + P2
    (excess reported relative to max(1, max |phi_J(P)|))."""
    Hs = HaarSystem(ctx.gs)
    chosen = set(part)
    P1 = P.subset([q for q in P.pairs if q in chosen])
    P2 = P.subset([q for q in P.pairs if q not in chosen])
    worst, arg = -np.inf, None
    for J in P.second():
        whole = np.abs(phi_values(ctx, Hs, P, J, f))
        pieces = np.abs(phi_values(ctx, Hs, P1, J, f)) + np.abs(phi_values(ctx, Hs, P2, J, f))
        if whole.size:
            ex = float(np.max(whole - pieces)) / max(1.0, float(whole.max()))
            if ex > worst:
                worst, arg = ex, J
    if arg is None:
        return Check("phi_sublinear", 0.0, 0.0, None, True, {})
    return Check("phi_sublinear", worst, 0.0, None, worst <= 1e-12, {"J": cube_json(arg)})
