"""Muckenhoupt-type constants of a weight pair over an enumerated cube family.

Each supremum runs over the dyadic cubes and alternate cubes of every grid
in a family, from the top level down to two levels below the separation
floor (the first level at which no cube holds two atoms of one measure).
Shrink-to-atom limits are added as explicit candidates where they are not
trivially zero.  Every result carries the cube (or pair, or atom) where it
is attained.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Box, Cube, DyadicGrid, cube_json
from .measures import AtomicMeasure, common_points
from .poisson import Region, poisson_sum


@dataclass
class ConstantWitness:
    name: str
    value: float
    witness: dict = field(default_factory=dict)
    family_spec: dict = field(default_factory=dict)

    @property
    def infinite(self) -> bool:
        return math.isinf(self.value)

    def to_json(self) -> dict:
        v = "+inf" if self.infinite else float(self.value)
        return {"name": self.name, "value": v, "witness": self.witness,
                "family_spec": self.family_spec}


def _better(best, value, witness):
    if best is None or value > best[0]:
        return (value, witness)
    return best


# ---------------------------------------------------------------------------
# enumeration


def separation_floor(grid: DyadicGrid, rels: list[np.ndarray]) -> int:
    """First level at which every dyadic cube holds at most one atom of each measure."""
    level = grid.top_level
    for rel in rels:
        if rel.shape[0] < 2:
            continue
        k = level
        while True:
            idx = grid.indices_at(rel, k)
            if len({tuple(r) for r in idx.tolist()}) == rel.shape[0]:
                break
            k += 1
            if k > 200:
                raise ValueError("atoms too close to separate")
        level = max(level, k)
    return level


@dataclass
class FamilyCube:
    grid: int
    box: Box
    s_ids: np.ndarray
    w_ids: np.ndarray

    def witness(self, kind="cube") -> dict:
        return {"kind": kind, "grid": self.grid, "cube": cube_json(self.box)}


class CubeFamily:
    """Enumerated dyadic and alternate cubes of a grid family that meet either measure."""

    def __init__(self, sigma: AtomicMeasure, omega: AtomicMeasure, grids: list[DyadicGrid],
                 alternates: bool = True, extra_levels: int = 2):
        self.sigma, self.omega = sigma, omega
        self.grids = []
        self.alternates = alternates
        self.cubes: list[FamilyCube] = []
        self.floors = []
        n = grids[0].n
        for gi, g in enumerate(grids):
            rs = g.rel_pre(sigma.points) if len(sigma) else np.zeros((0, n))
            rw = g.rel_pre(omega.points) if len(omega) else np.zeros((0, n))
            floor = separation_floor(g, [rs, rw])
            bottom = max(g.bottom_level, floor + extra_levels + 1)
            g = replace(g, bottom_level=bottom)
            self.grids.append(g)
            self.floors.append(floor)
            for k in range(g.top_level, floor + extra_levels + 1):
                self.cubes.extend(self._level(gi, g, rs, rw, k))

    def _level(self, gi, g, rs, rw, k):
        def occ(rel):
            d: dict = {}
            if rel.shape[0]:
                for i, row in enumerate(map(tuple, g.indices_at(rel, k + 1).tolist())):
                    d.setdefault(row, []).append(i)
            return d

        cs, cw = occ(rs), occ(rw)
        corners = set()
        for idx in itertools.chain(cs, cw):
            for e in itertools.product((0, 1), repeat=g.n):
                c = tuple(a - b for a, b in zip(idx, e))
                if self.alternates or all(v % 2 == 0 for v in c):
                    corners.add(c)
        out = []
        for c in sorted(corners):
            kids = [tuple(a + b for a, b in zip(c, e)) for e in itertools.product((0, 1), repeat=g.n)]
            if not all(g.is_enumerated(Cube(k + 1, kid)) for kid in kids):
                continue
            s = [i for kid in kids for i in cs.get(kid, ())]
            w = [i for kid in kids for i in cw.get(kid, ())]
            out.append(FamilyCube(gi, Box(k, c), np.asarray(sorted(s), int), np.asarray(sorted(w), int)))
        return out

    def spec(self) -> dict:
        return {
            "relative_to": "enumerated family",
            "grids": len(self.grids),
            "alternates": self.alternates,
            "levels": [[g.top_level, f + 2] for g, f in zip(self.grids, self.floors)],
        }

    def find(self, gi: int, box: Box) -> FamilyCube | None:
        for c in self.cubes:
            if c.grid == gi and c.box == box:
                return c
        return None


def _family(sigma, omega, grids, fam):
    return fam if fam is not None else CubeFamily(sigma, omega, grids)


def _roles(fam: CubeFamily, direction: str):
    """(density measure, energy/tail-side ids getter) for a direction."""
    if direction == "forward":
        return fam.sigma, fam.omega, (lambda c: c.s_ids), (lambda c: c.w_ids)
    if direction == "dual":
        return fam.omega, fam.sigma, (lambda c: c.w_ids), (lambda c: c.s_ids)
    raise ValueError(f"unknown direction {direction!r}")


def _scale(c: FamilyCube, n, alpha) -> float:
    """|Q|^{1 - alpha/n} = l^{n - alpha}."""
    return (2.0 ** (-c.box.level)) ** (n - alpha)


def _finish(name, best, fam, extra=None) -> ConstantWitness:
    spec = fam.spec()
    if extra:
        spec.update(extra)
    if best is None:
        return ConstantWitness(name, 0.0, {"kind": "none"}, spec)
    return ConstantWitness(name, float(best[0]), best[1], spec)


# ---------------------------------------------------------------------------
# constants


def offset_A2(sigma, omega, alpha, grids, fam: CubeFamily | None = None) -> ConstantWitness:
    fam = _family(sigma, omega, grids, fam)
    n = fam.grids[0].n
    by_key = {(c.grid, c.box): c for c in fam.cubes}
    offs = [e for e in itertools.product((-1, 0, 1), repeat=n) if any(e)]
    best = None
    for c in fam.cubes:
        if c.s_ids.size == 0:
            continue
        ms = float(sigma.masses[c.s_ids].sum())
        for e in offs:
            corner = tuple(a + 2 * b for a, b in zip(c.box.corner, e))
            o = by_key.get((c.grid, Box(c.box.level, corner)))
            if o is None or o.w_ids.size == 0:
                continue
            v = ms * float(omega.masses[o.w_ids].sum()) / _scale(c, n, alpha) ** 2
            best = _better(best, v, {"kind": "pair", "grid": c.grid, "cube": cube_json(c.box),
                                     "partner": cube_json(o.box)})
    return _finish("offset_A2", best, fam)


def _tail_repro(fam: CubeFamily, density: AtomicMeasure, cubes, alpha, gi):
    g = fam.grids[gi]
    s = g.n - alpha
    regions = [Region.of(minus=c.box) for c in cubes]
    return poisson_sum(g, [c.box for c in cubes], density, s, 2 * s, regions)


def tailed_A2(sigma, omega, alpha, direction="forward", grids=None,
              fam: CubeFamily | None = None) -> ConstantWitness:
    """One-tailed constant: reproducing Poisson tail of one measure off Q times the
    other's density on Q, plus shrink limits at each atom of the second measure."""
    fam = _family(sigma, omega, grids, fam)
    tail_mu, dens_mu, _, dens_ids = _roles(fam, direction)
    n = fam.grids[0].n
    best = None
    for gi in range(len(fam.grids)):
        cubes = [c for c in fam.cubes if c.grid == gi and dens_ids(c).size]
        if not cubes or len(tail_mu) == 0:
            continue
        tails = _tail_repro(fam, tail_mu, cubes, alpha, gi)
        for c, t in zip(cubes, tails):
            v = float(t) * float(dens_mu.masses[dens_ids(c)].sum()) / _scale(c, n, alpha)
            best = _better(best, v, c.witness())
    for p, v in shrink_limits(tail_mu, dens_mu, alpha):
        best = _better(best, v, {"kind": "shrink", "point": p})
    return _finish(f"tailed_A2_{direction}", best, fam, {"shrink_limits": True})


def shrink_limits(tail_mu: AtomicMeasure, dens_mu: AtomicMeasure, alpha: float):
    """Limit of the one-tailed product as a cube shrinks to an atom p of the density measure."""
    out = []
    if len(tail_mu) == 0:
        return out
    s = tail_mu.n - alpha
    for p, m in zip(dens_mu.points, dens_mu.masses):
        d = np.sqrt(((tail_mu.points - p) ** 2).sum(axis=1))
        keep = d > 0
        out.append(([float(v) for v in p], float(m * (tail_mu.masses[keep] * d[keep] ** (-2 * s)).sum())))
    return out


def _punctured(mu: AtomicMeasure, ids: np.ndarray, common: set) -> float:
    if ids.size == 0:
        return 0.0
    m = mu.masses[ids]
    best = 0.0
    for i, w in zip(ids, m):
        if tuple(mu.points[i]) in common:
            best = max(best, float(w))
    return float(m.sum()) - best


def punctured_A2(sigma, omega, alpha, direction="forward", grids=None,
                 fam: CubeFamily | None = None) -> ConstantWitness:
    """Forward: omega(Q, common points) |Q|_sigma / |Q|^{2(1 - alpha/n)}; dual swaps.

    Shrink limits are zero here: a cube holding a single atom of the punctured
    measure either punctures it away or holds no atom of the other measure.
    """
    fam = _family(sigma, omega, grids, fam)
    dens_mu, punct_mu, dens_ids, punct_ids = _roles(fam, direction)
    common = common_points(sigma, omega).as_set()
    n = fam.grids[0].n
    best = None
    for c in fam.cubes:
        if dens_ids(c).size == 0 or punct_ids(c).size == 0:
            continue
        v = _punctured(punct_mu, punct_ids(c), common) * float(dens_mu.masses[dens_ids(c)].sum())
        best = _better(best, v / _scale(c, n, alpha) ** 2, c.witness())
    return _finish(f"punctured_A2_{direction}", best, fam)


def _energy(mu: AtomicMeasure, ids: np.ndarray) -> float:
    """int_Q |x - m_Q|^2 dmu, equal to ||P_Q x||^2 for the full Haar projection."""
    if ids.size < 2:
        return 0.0
    x, w = mu.points[ids], mu.masses[ids]
    m = (w[:, None] * x).sum(axis=0) / w.sum()
    return float((w * ((x - m) ** 2).sum(axis=1)).sum())


def energy_A2(sigma, omega, alpha, direction="forward", grids=None,
              fam: CubeFamily | None = None) -> ConstantWitness:
    fam = _family(sigma, omega, grids, fam)
    dens_mu, en_mu, dens_ids, en_ids = _roles(fam, direction)
    n = fam.grids[0].n
    best = None
    for c in fam.cubes:
        if en_ids(c).size < 2 or dens_ids(c).size == 0:
            continue
        ell = 2.0 ** (-c.box.level)
        e = _energy(en_mu, en_ids(c)) / ell**2
        v = e * float(dens_mu.masses[dens_ids(c)].sum()) / _scale(c, n, alpha) ** 2
        best = _better(best, v, c.witness())
    return _finish(f"energy_A2_{direction}", best, fam)


def plugged_energy_A2(sigma, omega, alpha, direction="forward", grids=None,
                      fam: CubeFamily | None = None) -> ConstantWitness:
    """Energy over Q times the full reproducing Poisson integral of the other measure."""
    fam = _family(sigma, omega, grids, fam)
    dens_mu, en_mu, _, en_ids = _roles(fam, direction)
    n = fam.grids[0].n
    best = None
    for gi, g in enumerate(fam.grids):
        cubes = [c for c in fam.cubes if c.grid == gi and en_ids(c).size >= 2]
        if not cubes or len(dens_mu) == 0:
            continue
        s = n - alpha
        full = poisson_sum(g, [c.box for c in cubes], dens_mu, s, 2 * s)
        for c, p in zip(cubes, full):
            ell = 2.0 ** (-c.box.level)
            v = _energy(en_mu, en_ids(c)) / ell**2 / _scale(c, n, alpha) * float(p)
            best = _better(best, v, c.witness())
    return _finish(f"plugged_energy_A2_{direction}", best, fam)


def classical_A2_diagnostic(sigma, omega, alpha, grids=None,
                            fam: CubeFamily | None = None) -> ConstantWitness:
    fam = _family(sigma, omega, grids, fam)
    common = common_points(sigma, omega)
    if len(common):
        return ConstantWitness("classical_A2", math.inf,
                               {"kind": "common_point", "point": [float(v) for v in common.points[0]]}, fam.spec())
    n = fam.grids[0].n
    best = None
    for c in fam.cubes:
        if c.s_ids.size == 0 or c.w_ids.size == 0:
            continue
        v = float(sigma.masses[c.s_ids].sum()) * float(omega.masses[c.w_ids].sum())
        best = _better(best, v / _scale(c, n, alpha) ** 2, c.witness())
    return _finish("classical_A2", best, fam)


# ---------------------------------------------------------------------------
# per-cube candidates and witness re-evaluation


def candidates(fam: CubeFamily, c: FamilyCube, alpha: float, direction: str = "forward") -> dict:
    """Every per-cube quantity at one family cube (used for re-evaluation and the
    per-cube decomposition checks)."""
    dens_mu, other, dens_ids, other_ids = _roles(fam, direction)
    g = fam.grids[c.grid]
    n = g.n
    s = n - alpha
    sc = _scale(c, n, alpha)
    ell = 2.0 ** (-c.box.level)
    md = float(dens_mu.masses[dens_ids(c)].sum())
    mo = float(other.masses[other_ids(c)].sum())
    tail = float(poisson_sum(g, [c.box], dens_mu, s, 2 * s, Region.of(minus=c.box))[0])
    full = float(poisson_sum(g, [c.box], dens_mu, s, 2 * s)[0])
    e = _energy(other, other_ids(c)) / ell**2
    common = common_points(fam.sigma, fam.omega).as_set()
    return {
        "tailed": tail * mo / sc,
        "punctured": _punctured(other, other_ids(c), common) * md / sc**2,
        "energy": e * md / sc**2,
        "plugged": e / sc * full,
        "classical": md * mo / sc**2,
    }


def reevaluate(cw: ConstantWitness, fam: CubeFamily, alpha: float) -> float:
    """Recompute a constant from its witness alone."""
    w = cw.witness
    kind = w.get("kind")
    if kind == "none":
        return 0.0
    if kind == "common_point":
        return math.inf
    name = cw.name
    direction = "dual" if name.endswith("_dual") else "forward"
    if kind == "shrink":
        tail_mu, dens_mu, _, _ = _roles(fam, direction)
        p = np.asarray(w["point"])
        for q, v in shrink_limits(tail_mu, dens_mu, alpha):
            if np.array_equal(np.asarray(q), p):
                return v
        raise KeyError("shrink witness not an atom")
    box = _box(w["cube"])
    c = fam.find(w["grid"], box)
    n = fam.grids[0].n
    if kind == "pair":
        o = fam.find(w["grid"], _box(w["partner"]))
        return (float(fam.sigma.masses[c.s_ids].sum()) * float(fam.omega.masses[o.w_ids].sum())
                / _scale(c, n, alpha) ** 2)
    vals = candidates(fam, c, alpha, direction)
    for key in ("plugged", "punctured", "energy", "tailed", "classical"):
        if name.startswith(key):
            return vals[key]
    raise KeyError(name)


def _box(d: dict) -> Box:
    if "alt_corner" in d:
        return Box(d["level"], tuple(d["alt_corner"]))
    return Box(d["level"], tuple(2 * a for a in d["index"]))


def all_constants(sigma, omega, alpha, grids) -> list[ConstantWitness]:
    fam = CubeFamily(sigma, omega, grids)
    out = [offset_A2(sigma, omega, alpha, grids, fam)]
    for d in ("forward", "dual"):
        out.append(tailed_A2(sigma, omega, alpha, d, fam=fam))
        out.append(punctured_A2(sigma, omega, alpha, d, fam=fam))
        out.append(energy_A2(sigma, omega, alpha, d, fam=fam))
        out.append(plugged_energy_A2(sigma, omega, alpha, d, fam=fam))
    out.append(classical_A2_diagnostic(sigma, omega, alpha, fam=fam))
    return out
