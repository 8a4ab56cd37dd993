"""Atomic measures, cube masses, common point masses and puncturing."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import Box, Cube, DyadicGrid, as_box, box_children, points_in_box


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite sum of point masses in R^n."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        if p.ndim == 1:
            # a flat list is read as n = 1 atoms
            p = p.reshape(-1, 1)
        if p.shape[0] != m.shape[0]:
            raise ValueError("points and masses disagree in length")
        if np.any(~(m > 0)) or np.any(~np.isfinite(m)):
            raise ValueError("masses must be positive and finite")
        if len({tuple(r) for r in p}) != p.shape[0]:
            raise ValueError("atom locations must be pairwise distinct")
        p.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "masses", m)

    @classmethod
    def empty(cls, n: int) -> "AtomicMeasure":
        return cls(np.zeros((0, n)), np.zeros(0))

    @classmethod
    def from_literal(cls, atoms, n: int | None = None) -> "AtomicMeasure":
        if not atoms:
            if n is None:
                raise ValueError("empty measure literal needs a dimension")
            return cls.empty(n)
        pts = np.array([a["point"] for a in atoms], dtype=float)
        return cls(pts, np.array([a["mass"] for a in atoms], dtype=float))

    def to_literal(self) -> list:
        return [{"point": [float(v) for v in p], "mass": float(m)}
                for p, m in zip(self.points, self.masses)]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.masses.shape[0]

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def restrict(self, mask) -> "AtomicMeasure":
        mask = np.asarray(mask, dtype=bool)
        return AtomicMeasure(self.points[mask], self.masses[mask])

    def scaled(self, mass_factor: float = 1.0, coord_factor: float = 1.0) -> "AtomicMeasure":
        return AtomicMeasure(self.points * coord_factor, self.masses * mass_factor)

    def with_masses(self, masses) -> "AtomicMeasure":
        keep = np.asarray(masses) > 0
        return AtomicMeasure(self.points[keep], np.asarray(masses, float)[keep])

    def keys(self) -> list[tuple]:
        return [tuple(r) for r in self.points]


@dataclass(frozen=True)
class CommonPointSet:
    points: tuple = ()

    def __len__(self):
        return len(self.points)

    def as_set(self) -> set:
        return set(self.points)


def common_points(sigma: AtomicMeasure, omega: AtomicMeasure) -> CommonPointSet:
    """Points carried by both measures (exact coordinate equality)."""
    shared = set(sigma.keys()) & set(omega.keys())
    return CommonPointSet(tuple(sorted(shared)))


def _in(grid: DyadicGrid, mu: AtomicMeasure, Q) -> np.ndarray:
    if len(mu) == 0:
        return np.zeros(0, dtype=bool)
    return points_in_box(grid, Q, grid.rel_pre(mu.points))


def cube_mass(grid: DyadicGrid, mu: AtomicMeasure, Q) -> float:
    return float(mu.masses[_in(grid, mu, Q)].sum())


def punctured_mass(grid: DyadicGrid, mu: AtomicMeasure, Q, P: CommonPointSet) -> float:
    """|Q|_mu minus the largest mu-mass sitting at a common point inside Q."""
    inside = _in(grid, mu, Q)
    total = float(mu.masses[inside].sum())
    pset = P.as_set()
    best = 0.0
    for key, m, ins in zip(mu.keys(), mu.masses, inside):
        if ins and key in pset:
            best = max(best, float(m))
    return total - best


@dataclass
class SplitRecord:
    order: list = field(default_factory=list)
    padded: bool = False


def greedy_split(grid: DyadicGrid, sigma: AtomicMeasure, omega: AtomicMeasure, Q):
    """Alternating selection of common points inside Q.

    Odd picks maximise the sigma mass among the remaining common points,
    even picks maximise the omega mass.  sigma loses its mass at even picks
    and omega at odd picks, so no common point keeps mass in both.
    Returns (sigma_tilde, omega_tilde, record), both restricted to Q.
    """
    s_in = _in(grid, sigma, Q)
    w_in = _in(grid, omega, Q)
    s_mass = {k: float(m) for k, m, i in zip(sigma.keys(), sigma.masses, s_in) if i}
    w_mass = {k: float(m) for k, m, i in zip(omega.keys(), omega.masses, w_in) if i}
    remaining = sorted(set(s_mass) & set(w_mass))
    rec = SplitRecord()
    drop_s, drop_w = set(), set()
    turn = 0
    while remaining:
        src = s_mass if turn % 2 == 0 else w_mass
        # ties go to the lexicographically first point
        pick = max(remaining, key=lambda k: (src[k], tuple(-v for v in k)))
        remaining.remove(pick)
        rec.order.append(pick)
        (drop_w if turn % 2 == 0 else drop_s).add(pick)
        turn += 1
    rec.padded = len(rec.order) % 2 == 1
    st = sigma.restrict(s_in)
    wt = omega.restrict(w_in)
    st = st.restrict(np.array([k not in drop_s for k in st.keys()], dtype=bool))
    wt = wt.restrict(np.array([k not in drop_w for k in wt.keys()], dtype=bool))
    return st, wt, rec


# ---------------------------------------------------------------------------
# generators


def _distinct_uniform(rng, count, n, scale):
    pts = rng.uniform(0.0, scale, size=(count, n))
    while len({tuple(r) for r in pts}) < count:
        pts = rng.uniform(0.0, scale, size=(count, n))
    return pts


def _masses(rng, count, law):
    if law == "unit":
        return np.ones(count)
    if law == "exponential":
        return rng.exponential(1.0, size=count) + 1e-3
    if law == "lognormal":
        return rng.lognormal(0.0, 1.0, size=count)
    return rng.uniform(0.1, 1.0, size=count)


def generate(seed: int, spec: dict):
    """Seeded measure generators.

    spec kinds: uniform_box(count, n, mass_law, scale), line_supported(count,
    n, scale), pair_with_common(count, n, common_fraction, mass_law, scale).
    The last returns a (sigma, omega) pair.
    """
    rng = np.random.default_rng(seed)
    kind = spec.get("kind", "uniform_box")
    count = int(spec.get("count", 8))
    n = int(spec.get("n", 1))
    scale = float(spec.get("scale", 1.0))
    law = spec.get("mass_law", "uniform")
    if kind == "uniform_box":
        if count == 0:
            return AtomicMeasure.empty(n)
        return AtomicMeasure(_distinct_uniform(rng, count, n, scale), _masses(rng, count, law))
    if kind == "line_supported":
        if count == 0:
            return AtomicMeasure.empty(n)
        t = np.sort(_distinct_uniform(rng, count, 1, scale)[:, 0])
        pts = np.zeros((count, n))
        pts[:, 0] = t
        if n > 1:
            pts[:, 1:] = 0.5 * scale
        return AtomicMeasure(pts, _masses(rng, count, law))
    if kind == "pair_with_common":
        frac = float(spec.get("common_fraction", 0.5))
        if count == 0:
            return AtomicMeasure.empty(n), AtomicMeasure.empty(n)
        k = int(round(frac * count))
        pts = _distinct_uniform(rng, 2 * count - k, n, scale)
        s_pts = pts[:count]
        w_pts = np.concatenate([pts[:k], pts[count:]]) if k < count else pts[:count]
        return (AtomicMeasure(s_pts, _masses(rng, count, law)),
                AtomicMeasure(w_pts, _masses(rng, count, law)))
    raise ValueError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# grid-indexed view used by the heavier modules


class GridMeasure:
    """A measure seen through one grid: preimage coordinates and occupied cubes."""

    def __init__(self, grid: DyadicGrid, mu: AtomicMeasure):
        self.grid = grid
        self.mu = mu
        self._levels: dict[int, dict] = {}

    @cached_property
    def rel(self) -> np.ndarray:
        if len(self.mu) == 0:
            return np.zeros((0, self.grid.n))
        return self.grid.rel_pre(self.mu.points)

    @property
    def img(self) -> np.ndarray:
        return self.mu.points

    @property
    def w(self) -> np.ndarray:
        return self.mu.masses

    def occupied(self, level: int) -> dict:
        """{cube: atom ids} for the enumerated cubes at a level holding atoms."""
        if level not in self._levels:
            out: dict = {}
            if len(self.mu):
                idx = self.grid.indices_at(self.rel, level)
                for i, row in enumerate(map(tuple, idx.tolist())):
                    out.setdefault(row, []).append(i)
            d = {}
            for k in sorted(out):
                c = Cube(level, k)
                if self.grid.is_enumerated(c):
                    d[c] = np.asarray(out[k])
            self._levels[level] = d
        return self._levels[level]

    def ids(self, Q) -> np.ndarray:
        if isinstance(Q, Cube):
            return self.occupied(Q.level).get(Q, np.zeros(0, dtype=int))
        parts = [self.ids(c) for c in box_children(as_box(Q)) if self.grid.in_range(c.level)]
        if not parts:
            return np.nonzero(points_in_box(self.grid, Q, self.rel))[0]
        return np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=int)

    def mass(self, Q) -> float:
        return float(self.w[self.ids(Q)].sum())

    def mask(self, Q) -> np.ndarray:
        m = np.zeros(len(self.mu), dtype=bool)
        m[self.ids(Q)] = True
        return m

    def all_occupied(self) -> list:
        out = []
        for k in range(self.grid.top_level, self.grid.bottom_level + 1):
            out.extend(self.occupied(k))
        return out
