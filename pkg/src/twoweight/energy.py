"""Energy constants of a weight pair, computed by dynamic programming over the
dyadic tree, together with stopping energies, the functional energy sum and
the size functional of an admissible pair collection."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import (Box, Cube, DyadicGrid, GoodnessParams, alternates_containing, ancestor,
                       as_box, box_children, boundary_gap, children, cube_contains, cube_json,
                       is_deeply_embedded, is_good, m_deep, m_deep_occupied, points_in_box, sort_key)
from .haar import HaarSystem
from .measures import AtomicMeasure, GridMeasure
from .muckenhoupt import ConstantWitness
from .poisson import Region, localized_projection_energy, localized_shift_family, poisson_sum

HOLES = ("gamma_hole", "unit_hole", "plugged")
PROJECTIONS = ("subgood", "good", "full")


@dataclass(frozen=True)
class EnergyVariant:
    hole: str = "gamma_hole"
    projection: str = "subgood"

    def __post_init__(self):
        if self.hole not in HOLES:
            raise ValueError(f"unknown hole {self.hole!r}")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"unknown projection {self.projection!r}")

    @property
    def label(self) -> str:
        return f"{self.hole}/{self.projection}"


DEEP = EnergyVariant("gamma_hole", "subgood")
PARTIAL = EnergyVariant("unit_hole", "subgood")
PLUGGED = EnergyVariant("plugged", "subgood")
STRONG = EnergyVariant("plugged", "full")


class EnergyContext:
    """A weight pair seen through one grid: grid measures, the omega Haar system
    and cached projection energies."""

    def __init__(self, grid: DyadicGrid, sigma: AtomicMeasure, omega: AtomicMeasure,
                 alpha: float, params: GoodnessParams):
        if not 0 <= alpha < grid.n:
            raise ValueError("alpha must lie in [0, n)")
        self.grid, self.sigma, self.omega = grid, sigma, omega
        self.alpha, self.params = alpha, params
        self._proj: dict = {}
        self._deep: dict = {}

    @cached_property
    def gs(self) -> GridMeasure:
        return GridMeasure(self.grid, self.sigma)

    @cached_property
    def gw(self) -> GridMeasure:
        return GridMeasure(self.grid, self.omega)

    @cached_property
    def haar(self) -> HaarSystem:
        return HaarSystem(self.gw)

    def sigma_mass(self, K) -> float:
        if isinstance(K, Cube):
            return self.gs.mass(K)
        return float(self.gs.w[points_in_box(self.grid, K, self.gs.rel)].sum())

    def projection(self, J: Cube, kind: str) -> float:
        key = (J, kind)
        if key not in self._proj:
            H = self.haar
            if kind == "subgood":
                v = H.subgood_energy(J, self.params)
            elif kind == "good":
                v = H.good_energy(J, self.params)
            elif kind == "full":
                v = H.tree_energy(J)
            else:
                raise ValueError(f"unknown projection {kind!r}")
            self._proj[key] = float(v)
        return self._proj[key]

    def deep_family(self, K, depth: int | None = None) -> list[Cube]:
        """omega-occupied members of the maximal deep family of K."""
        depth = self.params.r if depth is None else depth
        key = (K, depth)
        if key not in self._deep:
            if len(self.omega) == 0:
                self._deep[key] = []
            else:
                fam = m_deep_occupied(self.grid, K, self.gw.rel, depth, self.params.eps)
                self._deep[key] = list(fam)
        return self._deep[key]

    def region(self, J: Cube, hole: str, top) -> Region:
        if hole == "plugged":
            return Region.of(inside=top)
        if hole == "unit_hole":
            return Region.of(inside=top, minus=J)
        return Region.of(inside=top, minus=J, gamma=self.params.gamma)

    def poisson_ratio2(self, cubes: list[Cube], regions, weights=None) -> np.ndarray:
        """(P(J, region sigma) / l(J))^2 for a batch."""
        if not cubes:
            return np.zeros(0)
        n = self.grid.n
        p = poisson_sum(self.grid, cubes, self.gs, 1.0, n + 1 - self.alpha, regions, weights)
        sides = np.array([self.grid.side(J) for J in cubes])
        return (p / sides) ** 2


def _contexts(sigma, omega, alpha, params, grids, direction):
    if direction == "dual":
        sigma, omega = omega, sigma
    elif direction != "forward":
        raise ValueError(f"unknown direction {direction!r}")
    return [EnergyContext(g, sigma, omega, alpha, params) for g in grids]


def _family_spec(grids, extra=None) -> dict:
    spec = {"relative_to": "enumerated family", "grids": len(grids),
            "levels": [[g.top_level, g.bottom_level] for g in grids]}
    if extra:
        spec.update(extra)
    return spec


# ---------------------------------------------------------------------------
# deep energy: partition supremum by tree dynamic programming


def contributions(ctx: EnergyContext, I: Cube, variant: EnergyVariant) -> dict:
    """{node: contribution(node; I)} over the omega-occupied subtree of I."""
    nodes = ctx.haar.subtree(I)
    items = []
    for N in nodes:
        for J in ctx.deep_family(N):
            e = ctx.projection(J, variant.projection)
            if e > 0:
                items.append((N, J, e))
    out = {N: 0.0 for N in nodes}
    if not items:
        return out
    # a cube J may sit in several families; its Poisson factor depends only on (I, J)
    uniq = sorted({J for _, J, _ in items}, key=sort_key)
    vals = ctx.poisson_ratio2(uniq, [ctx.region(J, variant.hole, I) for J in uniq])
    pj = dict(zip(uniq, vals))
    for N, J, e in items:
        out[N] += float(pj[J]) * e
    return out


def max_partition(ctx: EnergyContext, I: Cube, contrib: dict) -> tuple[float, list[Cube]]:
    """Best sum of contributions over pairwise disjoint subcubes of I."""
    value: dict = {}
    choice: dict = {}
    for N in sorted(contrib, key=lambda c: -c.level):
        kids = [c for c in children(N) if c in value]
        below = sum(value[c] for c in kids)
        if contrib[N] >= below:
            value[N], choice[N] = contrib[N], None
        else:
            value[N], choice[N] = below, kids
    parts, stack = [], [I]
    while stack:
        N = stack.pop()
        if N not in choice:
            continue
        if choice[N] is None:
            if contrib[N] > 0:
                parts.append(N)
        else:
            stack.extend(choice[N])
    return value.get(I, 0.0), sorted(parts, key=sort_key)


def deep_energy(sigma, omega, alpha, params, grids, variant: EnergyVariant = DEEP,
                direction: str = "forward") -> ConstantWitness:
    """Squared deep energy constant: sup over sigma-charged dyadic I of the best
    partition sum divided by |I|_sigma."""
    best = None
    for gi, ctx in enumerate(_contexts(sigma, omega, alpha, params, grids, direction)):
        if len(ctx.omega) < 2 or len(ctx.sigma) == 0:
            continue
        for I in ctx.gs.all_occupied():
            ms = ctx.gs.mass(I)
            if ms <= 0 or ctx.gw.ids(I).size < 2:
                continue
            v, parts = max_partition(ctx, I, contributions(ctx, I, variant))
            v /= ms
            if best is None or v > best[0]:
                best = (v, {"kind": "partition", "grid": gi, "cube": cube_json(I),
                            "parts": [cube_json(p) for p in parts]})
    name = f"deep_energy_{variant.hole}_{variant.projection}_{direction}"
    spec = _family_spec(grids, {"variant": variant.label, "squared": True})
    if best is None:
        return ConstantWitness(name, 0.0, {"kind": "none"}, spec)
    return ConstantWitness(name, float(best[0]), best[1], spec)


def partition_value(ctx: EnergyContext, I: Cube, parts, variant: EnergyVariant) -> float:
    """Direct evaluation of one partition's sum (plain loops, full deep families)."""
    w_rel, s_rel = ctx.gw.rel, ctx.gs.rel
    n = ctx.grid.n
    total = 0.0
    for N in parts:
        for J in m_deep(ctx.grid, N, ctx.params):
            if not points_in_box(ctx.grid, J, w_rel).any():
                continue
            e = ctx.projection(J, variant.projection)
            if e <= 0:
                continue
            keep = ctx.region(J, variant.hole, I).mask(s_rel)
            ell = ctx.grid.side(J)
            c = ctx.grid.center(J)
            p = 0.0
            for y, m, k in zip(ctx.sigma.points, ctx.sigma.masses, keep):
                if k:
                    p += m * ell / (ell + float(np.linalg.norm(y - c))) ** (n + 1 - ctx.alpha)
            total += (p / ell) ** 2 * e
    return total


def brute_force_partition(ctx: EnergyContext, I: Cube, variant: EnergyVariant) -> tuple[float, list]:
    """Exhaustive maximum over antichains of the omega-occupied subtree of I."""
    occupied = set(ctx.haar.subtree(I))

    def antichains(N):
        out = [[N]]
        kids = [c for c in children(N) if c in occupied]
        options = [[[]] + antichains(c) for c in kids]
        for combo in itertools.product(*options):
            out.append([q for part in combo for q in part])
        return out

    node_value: dict = {}
    best = (0.0, [])
    for chain in antichains(I):
        for N in chain:
            if N not in node_value:
                node_value[N] = partition_value(ctx, I, [N], variant)
        v = sum(node_value[N] for N in chain)
        if v > best[0]:
            best = (v, chain)
    return best


# ---------------------------------------------------------------------------
# refined energy over alternate cubes


def refined_family(ctx: EnergyContext, I, ell: int) -> list[Cube]:
    """omega-occupied members of M^ell(I): deep cubes of the ell-th ancestors of
    the children of I that lie inside some deep cube of I."""
    b = as_box(I)
    r, eps = ctx.params.r, ctx.params.eps
    out = set()
    for kc in box_children(b):
        if kc.level - ell < ctx.grid.top_level:
            continue
        anc = ancestor(kc, kc.level - ell)
        for J in ctx.deep_family(anc):
            if J in out:
                continue
            lev = J.level
            while lev >= b.level + max(r, 1):
                if is_deeply_embedded(ancestor(J, lev), b, r, eps):
                    out.add(J)
                    break
                lev -= 1
    return sorted(out, key=sort_key)


def _alternate_tops(ctx: EnergyContext) -> list[Box]:
    g = ctx.grid
    tops = set()
    for k in range(g.top_level, g.bottom_level):
        for c in ctx.gs.occupied(k + 1):
            for b in alternates_containing(c):
                if all(g.is_enumerated(q) for q in box_children(b)):
                    tops.add(b)
    return sorted(tops, key=sort_key)


def refined_sum(ctx: EnergyContext, I, ell: int, variant: EnergyVariant) -> float:
    fam = [(J, ctx.projection(J, variant.projection)) for J in refined_family(ctx, I, ell)]
    fam = [(J, e) for J, e in fam if e > 0]
    if not fam:
        return 0.0
    cubes = [J for J, _ in fam]
    vals = ctx.poisson_ratio2(cubes, [ctx.region(J, variant.hole, I) for J in cubes])
    return float(sum(v * e for v, (_, e) in zip(vals, fam)))


def refined_energy(sigma, omega, alpha, params, grids, variant: EnergyVariant = DEEP,
                   direction: str = "forward", ell_max: int | None = None) -> ConstantWitness:
    ell_max = params.tau if ell_max is None else ell_max
    best = None
    for gi, ctx in enumerate(_contexts(sigma, omega, alpha, params, grids, direction)):
        if len(ctx.omega) < 2 or len(ctx.sigma) == 0:
            continue
        for I in _alternate_tops(ctx):
            ms = ctx.sigma_mass(I)
            if ms <= 0:
                continue
            for ell in range(ell_max + 1):
                v = refined_sum(ctx, I, ell, variant) / ms
                if best is None or v > best[0]:
                    best = (v, {"kind": "refined", "grid": gi, "cube": cube_json(I), "ell": ell})
    name = f"refined_energy_{variant.hole}_{variant.projection}_{direction}"
    spec = _family_spec(grids, {"variant": variant.label, "ell_max": ell_max, "squared": True})
    if best is None:
        return ConstantWitness(name, 0.0, {"kind": "none"}, spec)
    return ConstantWitness(name, float(best[0]), best[1], spec)


def strong_energy(sigma, omega, alpha, params, grids, direction: str = "forward") -> ConstantWitness:
    """Squared strong constant: plugged deep plus plugged refined, full projections."""
    d = deep_energy(sigma, omega, alpha, params, grids, STRONG, direction)
    r = refined_energy(sigma, omega, alpha, params, grids, STRONG, direction)
    return ConstantWitness(f"strong_energy_{direction}", d.value + r.value,
                           {"kind": "sum", "deep": d.witness, "refined": r.witness},
                           _family_spec(grids, {"squared": True, "parts": [d.name, r.name]}))


# ---------------------------------------------------------------------------
# stopping energy


def stop_sum(ctx: EnergyContext, S: Cube, I: Cube) -> float:
    """Sum over the tau-deep family of I, Poisson hole gamma J inside S, subgood projections."""
    fam = [(J, ctx.projection(J, "subgood")) for J in ctx.deep_family(I, ctx.params.tau)]
    fam = [(J, e) for J, e in fam if e > 0]
    if not fam:
        return 0.0
    cubes = [J for J, _ in fam]
    vals = ctx.poisson_ratio2(cubes, [ctx.region(J, "gamma_hole", S) for J in cubes])
    return float(sum(v * e for v, (_, e) in zip(vals, fam)))


def stopping_energy(ctx: EnergyContext, S: Cube, corona) -> tuple[float, Cube | None]:
    """Squared stopping energy of a corona with top S, with the maximising cube."""
    best, arg = 0.0, None
    for I in sorted(corona, key=sort_key):
        ms = ctx.sigma_mass(I)
        if ms <= 0:
            continue
        v = stop_sum(ctx, S, I) / ms
        if v > best:
            best, arg = v, I
    return best, arg


# ---------------------------------------------------------------------------
# functional energy


@dataclass
class FunctionalEnergy:
    lhs: float
    h_norm: float
    terms: list = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return self.lhs / self.h_norm if self.h_norm > 0 else 0.0


def carleson_violation(ctx: EnergyContext, collection, C: float):
    """First cube F whose collection-Carleson sum exceeds C |F|_sigma, or None."""
    coll = sorted(set(collection), key=sort_key)
    mass = {F: ctx.gs.mass(F) for F in coll}
    for F in coll:
        tot = sum(mass[G] for G in coll if cube_contains(F, G))
        if tot > C * mass[F] * (1 + 1e-12):
            return F, tot
    return None


def functional_energy_lhs(ctx: EnergyContext, collection, h, carleson_C: float = 4.0) -> FunctionalEnergy:
    h = np.asarray(h, float)
    bad = carleson_violation(ctx, collection, carleson_C)
    if bad is not None:
        raise ValueError(f"collection is not Carleson with constant {carleson_C}: "
                         f"cube {cube_json(bad[0])} carries {bad[1]:.6g}")
    H = ctx.haar
    weights = ctx.sigma.masses * h if len(ctx.sigma) else None
    total, terms = 0.0, []
    for F in sorted(set(collection), key=sort_key):
        fam = localized_shift_family(H, collection, F, ctx.params)
        if not fam:
            continue
        items = [(J, localized_projection_energy(H, fam, J)) for J in ctx.deep_family(F)]
        items = [(J, e) for J, e in items if e > 0]
        if not items:
            continue
        cubes = [J for J, _ in items]
        vals = ctx.poisson_ratio2(cubes, Region(), weights)
        for (J, e), v in zip(items, vals):
            total += float(v) * e
            terms.append((F, J, float(v) * e))
    norm = float(np.sqrt((ctx.sigma.masses * h**2).sum())) if len(ctx.sigma) else 0.0
    return FunctionalEnergy(total, norm, terms)


# ---------------------------------------------------------------------------
# admissible pairs and the size functional


@dataclass
class AdmissiblePairs:
    A: Cube
    pairs: list = field(default_factory=list)
    reduced: bool = False

    def __len__(self):
        return len(self.pairs)

    def first(self) -> list[Cube]:
        return sorted({I for I, _ in self.pairs}, key=sort_key)

    def second(self) -> list[Cube]:
        return sorted({J for _, J in self.pairs}, key=sort_key)

    def cubes(self) -> list[Cube]:
        return sorted(set(self.first()) | set(self.second()), key=sort_key)

    def subset(self, pairs) -> "AdmissiblePairs":
        return AdmissiblePairs(self.A, sorted(pairs, key=_pair_key), self.reduced)

    def violation(self, grid: DyadicGrid, params: GoodnessParams):
        """First pair breaking admissibility, with the reason, or None."""
        A = self.A
        by_j: dict = {}
        for I, J in self.pairs:
            if not (cube_contains(A, I) and I != A):
                return (I, J), "first cube not strictly inside A"
            if not is_deeply_embedded(J, I, params.rho - 1, params.eps):
                return (I, J), "second cube not deeply embedded in first"
            if not is_good(grid, J, params, "tau_good"):
                return (I, J), "second cube not tau-good"
            by_j.setdefault(J, []).append(I)
        for J, Is in by_j.items():
            levels = sorted(I.level for I in Is)
            if levels != list(range(levels[0], levels[-1] + 1)):
                return (Is[0], J), "not tree-connected in the first component"
            if self.reduced and not is_good(grid, min(Is, key=lambda c: c.level), params):
                return (min(Is, key=lambda c: c.level), J), "maximal first cube not good"
        return None

    def to_json(self) -> dict:
        return {"A": cube_json(self.A), "reduced": self.reduced,
                "pairs": [[cube_json(I), cube_json(J)] for I, J in self.pairs]}


def _pair_key(p):
    return (sort_key(p[0]), sort_key(p[1]))


def tent_energies(ctx: EnergyContext, P: AdmissiblePairs) -> dict:
    """{J: ||Delta_J x||^2} for the second components: the upstairs measure of P."""
    return {J: ctx.haar.x_energy(J) for J in P.second()}


def tent_mass(energies: dict, K: Cube, tau: int) -> float:
    """Mass of the tau-deep tent over K: cubes J inside K at least tau levels down."""
    return float(sum(e for J, e in energies.items()
                     if J.level - K.level >= tau and cube_contains(K, J)))


def size_candidates(ctx: EnergyContext, P: AdmissiblePairs) -> list[Cube]:
    """Good subcubes of cubes of P that can carry tent mass (ancestors of second
    components at least tau levels up)."""
    tau = ctx.params.tau
    tops = P.cubes()
    out = set()
    for J in P.second():
        for lev in range(J.level - tau, ctx.grid.top_level - 1, -1):
            K = ancestor(J, lev)
            if K in out:
                continue
            if not any(cube_contains(T, K) for T in tops):
                break
            if ctx.haar.is_good(K, ctx.params.r, ctx.params.eps):
                out.add(K)
    return sorted(out, key=sort_key)


def psi2(ctx: EnergyContext, K: Cube, hole_top: Cube, hole: Cube, energies: dict) -> float:
    """(P(K, 1_{top minus hole} sigma) / l(K))^2 times the tau-deep tent mass over K."""
    m = tent_mass(energies, K, ctx.params.tau)
    if m <= 0:
        return 0.0
    v = ctx.poisson_ratio2([K], Region.of(inside=hole_top, minus=hole))[0]
    return float(v) * m


def size_functional(ctx: EnergyContext, P: AdmissiblePairs, localized: Cube | None = None,
                    validate: bool = True) -> ConstantWitness:
    """Squared size functional (localized to S when given, with hole A minus S)."""
    if validate:
        bad = P.violation(ctx.grid, ctx.params)
        if bad is not None:
            (I, J), why = bad
            raise ValueError(f"pairs not admissible at ({cube_json(I)}, {cube_json(J)}): {why}")
    energies = tent_energies(ctx, P)
    if localized is None:
        cands = size_candidates(ctx, P)
    else:
        cands = localized_candidates(ctx, P, localized)
    best = None
    for K in cands:
        ms = ctx.sigma_mass(K)
        if ms <= 0:
            continue
        hole = K if localized is None else localized
        v = psi2(ctx, K, P.A, hole, energies) / ms
        if best is None or v > best[0]:
            best = (v, K)
    name = "size_functional" if localized is None else "size_functional_localized"
    spec = {"pairs": len(P), "A": cube_json(P.A)}
    if localized is not None:
        spec["S"] = cube_json(localized)
    if best is None:
        return ConstantWitness(name, 0.0, {"kind": "none"}, spec)
    return ConstantWitness(name, best[0], {"kind": "cube", "cube": cube_json(best[1])}, spec)


def localized_candidates(ctx: EnergyContext, P: AdmissiblePairs, S: Cube) -> list[Cube]:
    """Good cubes nearby in S (fewer than rho - tau levels down) together with the
    maximal good cubes K of S with 3K inside S, restricted to those meeting P."""
    p = ctx.params
    good = lambda K: ctx.haar.is_good(K, p.r, p.eps)  # noqa: E731
    out = set()
    for J in P.second():
        if not cube_contains(S, J):
            continue
        for lev in range(S.level, J.level + 1):
            K = ancestor(J, lev)
            if lev - S.level < p.rho - p.tau and good(K):
                out.add(K)
        for lev in range(S.level + 1, J.level + 1):
            K = ancestor(J, lev)
            if boundary_gap(K, S) >= 1 and good(K):
                out.add(K)
                break
    return sorted(out, key=sort_key)
