"""Dyadic grids, quasicubes, goodness and deeply embedded families.

Cubes are integer objects: a dyadic cube is ``Cube(level, index)`` and
covers the half-open preimage box ``shift + 2^-level * [index, index+1)``.
Alternate cubes (unions of 2^n dyadic cubes of half the side) are
``Box(level, corner)`` with the corner measured in units of the half side,
so a dyadic cube is the box with an even corner.

All membership and distance decisions are made in preimage coordinates,
where the half-open arithmetic is exact on dyadic rationals.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _backend

# relative slack used when comparing a gap against 2^{d(1-eps)}/2
_DEEP_RTOL = 1e-12


class Cube(NamedTuple):
    level: int
    index: tuple


class Box(NamedTuple):
    level: int
    corner: tuple


class UpperHalfPoint(NamedTuple):
    x: tuple
    t: float


# ---------------------------------------------------------------------------
# biLipschitz maps


@dataclass(frozen=True)
class QuasiMap:
    """Globally biLipschitz map used to bend the dyadic grid.

    kind is ``identity``, ``shear`` or ``log_spiral``.  A shear moves
    coordinate i >= 2 by ``sum_k a_k sin(b_k x_1)`` with the (a, b) pairs in
    ``shear[i-2]``.  The spiral is ``z -> z |z|^{2 i s}`` in the plane.
    """

    kind: str = "identity"
    shear: tuple = ()
    spiral: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "shear", "log_spiral"):
            raise ValueError(f"unknown quasimap kind {self.kind!r}")

    def _psi(self, x1, n):
        out = np.zeros((x1.shape[0], n - 1))
        for i, terms in enumerate(self.shear[: n - 1]):
            for a, b in terms:
                out[:, i] += a * np.sin(b * x1)
        return out

    def forward(self, pts) -> np.ndarray:
        p = np.array(pts, dtype=float)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        if self.kind == "shear" and p.shape[1] > 1:
            p = p.copy()
            p[:, 1:] += self._psi(p[:, 0], p.shape[1])
        elif self.kind == "log_spiral":
            p = _spiral(p, self.spiral)
        return p[0] if single else p

    def inverse(self, pts) -> np.ndarray:
        p = np.array(pts, dtype=float)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        if self.kind == "shear" and p.shape[1] > 1:
            p = p.copy()
            p[:, 1:] -= self._psi(p[:, 0], p.shape[1])
        elif self.kind == "log_spiral":
            p = _spiral(p, -self.spiral)
        return p[0] if single else p

    def lipschitz(self) -> tuple[float, float]:
        """Upper bounds for the Lipschitz constants of the map and its inverse."""
        if self.kind == "shear":
            lip = math.sqrt(sum(sum(abs(a * b) for a, b in t) ** 2 for t in self.shear))
            return 1.0 + lip, 1.0 + lip
        if self.kind == "log_spiral":
            return 1.0 + 2 * abs(self.spiral), 1.0 + 2 * abs(self.spiral)
        return 1.0, 1.0

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "shear":
            d["shear"] = [[list(ab) for ab in t] for t in self.shear]
        if self.kind == "log_spiral":
            d["spiral"] = self.spiral
        return d

    @classmethod
    def from_json(cls, d) -> "QuasiMap":
        if d is None:
            return cls()
        shear = tuple(tuple(tuple(float(v) for v in ab) for ab in t) for t in d.get("shear", []))
        return cls(d.get("kind", "identity"), shear, float(d.get("spiral", 0.0)))


def _spiral(p, s):
    if p.shape[1] != 2:
        raise ValueError("log_spiral map is only defined for n=2")
    r2 = p[:, 0] ** 2 + p[:, 1] ** 2
    with np.errstate(divide="ignore"):
        theta = np.where(r2 > 0, s * np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
    c, si = np.cos(theta), np.sin(theta)
    return np.column_stack([c * p[:, 0] - si * p[:, 1], si * p[:, 0] + c * p[:, 1]])


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class GoodnessParams:
    r: int = 4
    eps: float = 0.25
    tau: int = 5
    rho: int = 10
    gamma: float = 2.0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be a positive integer")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.tau <= self.r:
            raise ValueError("tau must exceed r")
        if self.rho <= self.r + self.tau:
            raise ValueError("rho must exceed r + tau")
        if self.gamma < 2:
            raise ValueError("gamma must be at least 2")

    @classmethod
    def defaults(cls, n: int, alpha: float, **over) -> "GoodnessParams":
        r = over.pop("r", 4)
        tau = over.pop("tau", r + 1)
        kw = dict(r=r, eps=1.0 / (2 * (n + 1 - alpha)), tau=tau, rho=r + tau + 1, gamma=2.0)
        kw.update(over)
        return cls(**kw)

    def containment_ok(self) -> bool:
        return self.gamma <= 2 ** (self.r * (1 - self.eps))


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class DyadicGrid:
    """Truncated dyadic grid.

    ``roots`` bounds the top-level indices (inclusive lo, hi); cubes are
    enumerated only beneath those roots.
    """

    n: int
    origin_shift: tuple = ()
    top_level: int = 0
    bottom_level: int = 8
    root_lo: tuple = ()
    root_hi: tuple = ()
    qmap: QuasiMap = field(default_factory=QuasiMap)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if not self.origin_shift:
            object.__setattr__(self, "origin_shift", (0.0,) * self.n)
        if not self.root_lo:
            object.__setattr__(self, "root_lo", (0,) * self.n)
        if not self.root_hi:
            object.__setattr__(self, "root_hi", tuple(self.root_lo))
        if self.top_level > self.bottom_level:
            raise ValueError("top_level must not exceed bottom_level")
        if len(self.origin_shift) != self.n:
            raise ValueError("origin_shift has wrong length")

    # --- basic cube arithmetic
    def side(self, c) -> float:
        return 2.0 ** (-c.level)

    def shift(self) -> np.ndarray:
        return np.asarray(self.origin_shift, dtype=float)

    def box_bounds(self, K) -> tuple[np.ndarray, np.ndarray]:
        """Preimage lower and upper corners of a cube or box."""
        b = as_box(K)
        h = 2.0 ** (-(b.level + 1))
        lo = self.shift() + np.asarray(b.corner, dtype=float) * h
        return lo, lo + 2 * h

    def center_pre(self, K) -> np.ndarray:
        lo, hi = self.box_bounds(K)
        return 0.5 * (lo + hi)

    def center(self, K) -> np.ndarray:
        """Image-coordinate center Omega(c_Q)."""
        return self.qmap.forward(self.center_pre(K))

    def in_range(self, level: int) -> bool:
        return self.top_level <= level <= self.bottom_level

    def root_of(self, c: Cube) -> tuple:
        return tuple(a >> (c.level - self.top_level) for a in c.index)

    def is_enumerated(self, c: Cube) -> bool:
        if not self.in_range(c.level):
            return False
        rt = self.root_of(c)
        return all(lo <= a <= hi for a, lo, hi in zip(rt, self.root_lo, self.root_hi))

    def level_index_range(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        s = 2 ** (level - self.top_level)
        lo = np.asarray(self.root_lo) * s
        hi = (np.asarray(self.root_hi) + 1) * s - 1
        return lo, hi

    def cubes_at(self, level: int) -> list[Cube]:
        lo, hi = self.level_index_range(level)
        rng = [range(int(a), int(b) + 1) for a, b in zip(lo, hi)]
        return [Cube(level, idx) for idx in itertools.product(*rng)]

    def rel_pre(self, points) -> np.ndarray:
        """Preimage coordinates relative to the grid origin."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return self.qmap.inverse(p) - self.shift()

    def indices_at(self, rel: np.ndarray, level: int) -> np.ndarray:
        return _backend.dyadic_index(rel, level)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "origin_shift": list(self.origin_shift),
            "top_level": self.top_level,
            "bottom_level": self.bottom_level,
            "root_lo": list(self.root_lo),
            "root_hi": list(self.root_hi),
            "map": self.qmap.to_json(),
        }


def as_box(K) -> Box:
    if isinstance(K, Box):
        return K
    return Box(K.level, tuple(2 * a for a in K.index))


def box_is_dyadic(b: Box) -> bool:
    return all(c % 2 == 0 for c in b.corner)


def box_to_cube(b: Box) -> Cube:
    return Cube(b.level, tuple(c // 2 for c in b.corner))


def children(c: Cube) -> list[Cube]:
    return [
        Cube(c.level + 1, tuple(2 * a + e for a, e in zip(c.index, eps)))
        for eps in itertools.product((0, 1), repeat=len(c.index))
    ]


def box_children(b: Box) -> list[Cube]:
    """The 2^n dyadic cubes of half the side that make up a box."""
    return [
        Cube(b.level + 1, tuple(a + e for a, e in zip(b.corner, eps)))
        for eps in itertools.product((0, 1), repeat=len(b.corner))
    ]


def parent(c: Cube) -> Cube:
    return Cube(c.level - 1, tuple(a >> 1 for a in c.index))


def ancestor(c: Cube, level: int) -> Cube:
    d = c.level - level
    if d < 0:
        raise ValueError("ancestor level below cube level")
    return Cube(level, tuple(a >> d for a in c.index))


def cube_contains(big, small: Cube) -> bool:
    """Containment of a dyadic cube in a cube or box (same grid)."""
    b = as_box(big)
    d = small.level - b.level
    if d < 0:
        return False
    if d == 0:
        return box_is_dyadic(b) and tuple(c // 2 for c in b.corner) == small.index
    s = 2 ** (d - 1)
    return all(c * s <= a < c * s + 2 * s for a, c in zip(small.index, b.corner))


def boundary_gap(small: Cube, big) -> int:
    """Distance from ``small`` to the boundary of ``big``, in units of l(small).

    Requires small inside big and strictly finer.
    """
    b = as_box(big)
    d = small.level - b.level
    s = 2 ** (d - 1)
    g = None
    for a, c in zip(small.index, b.corner):
        lo = c * s
        v = min(a - lo, lo + 2 * s - a - 1)
        g = v if g is None else min(g, v)
    return g


def deep_threshold(d: int, eps: float) -> float:
    return 0.5 * 2.0 ** (d * (1 - eps))


def is_deeply_embedded(J: Cube, K, r: int, eps: float) -> bool:
    """J inside K, l(J) <= 2^-r l(K) and qdist(J, boundary K) >= l(J)^eps l(K)^(1-eps) / 2."""
    b = as_box(K)
    d = J.level - b.level
    if d < r or d < 1 or not cube_contains(b, J):
        return False
    return boundary_gap(J, b) >= deep_threshold(d, eps) * (1 - _DEEP_RTOL)


def qdist(grid: DyadicGrid, A, B) -> float:
    """Distance between the preimages of two sets (cubes, boxes or point arrays)."""
    def as_set(S):
        if isinstance(S, (Cube, Box)):
            lo, hi = grid.box_bounds(S)
            return ("box", lo, hi)
        return ("pts", grid.qmap.inverse(np.atleast_2d(np.asarray(S, float))))

    a, b = as_set(A), as_set(B)
    if a[0] == "box" and b[0] == "box":
        gap = np.maximum(0.0, np.maximum(a[1] - b[2], b[1] - a[2]))
        return float(np.sqrt(np.sum(gap**2)))
    if a[0] == "box":
        a, b = b, a
    if b[0] == "box":
        p = a[1]
        gap = np.maximum(0.0, np.maximum(b[1] - p, p - b[2]))
        return float(np.min(np.sqrt(np.sum(gap**2, axis=1))))
    diff = a[1][:, None, :] - b[1][None, :, :]
    return float(np.min(np.sqrt(np.sum(diff**2, axis=2))))


def qdist_to_boundary(grid: DyadicGrid, J, K) -> float:
    """qdist(J, boundary of K) for a cube J contained in K."""
    jl, jh = grid.box_bounds(J)
    kl, kh = grid.box_bounds(K)
    return float(min(np.min(jl - kl), np.min(kh - jh)))


# ---------------------------------------------------------------------------
# containing cube and neighbours


def containing_cube(grid: DyadicGrid, point, level: int) -> Cube:
    if not grid.in_range(level):
        raise ValueError(f"level {level} outside [{grid.top_level}, {grid.bottom_level}]")
    rel = grid.rel_pre(np.asarray(point, float).reshape(1, -1))
    if not np.all(np.isfinite(rel)):
        raise ValueError("point is not finite")
    c = Cube(level, tuple(int(v) for v in grid.indices_at(rel, level)[0]))
    if not grid.is_enumerated(c):
        raise ValueError("point lies outside the enumerated extent of the grid")
    return c


def neighbour_offsets(n: int) -> list[tuple]:
    return [e for e in itertools.product((-1, 0, 1), repeat=n) if any(e)]


def neighbour_pairs(grid: DyadicGrid, levels: Iterable[int]) -> list[tuple[Cube, Cube]]:
    """Unordered neighbour pairs (K < K') of enumerated cubes, equal sides."""
    out = []
    offs = neighbour_offsets(grid.n)
    for k in levels:
        cubes = set(grid.cubes_at(k))
        for c in sorted(cubes):
            for e in offs:
                o = Cube(k, tuple(a + b for a, b in zip(c.index, e)))
                if o in cubes and c < o:
                    out.append((c, o))
    return out


def are_neighbours(K: Cube, L: Cube) -> bool:
    """K inside 3L minus L and L inside 3K minus K (equal levels)."""
    if K.level != L.level or K == L:
        return False
    return all(abs(a - b) <= 1 for a, b in zip(K.index, L.index))


# ---------------------------------------------------------------------------
# goodness


def good_mask(level: int, idx: np.ndarray, grid: DyadicGrid, r: int, eps: float) -> np.ndarray:
    """Vectorised (r, eps)-goodness of cubes at one level (rows of idx)."""
    idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
    ok = np.ones(idx.shape[0], dtype=bool)
    for d in range(r, level - grid.top_level + 1):
        m = idx & ((1 << d) - 1)
        gap = np.minimum(m, (1 << d) - 1 - m).min(axis=1)
        ok &= gap >= deep_threshold(d, eps) * (1 - _DEEP_RTOL)
    return ok


def is_good(grid: DyadicGrid, J: Cube, params: GoodnessParams, mode: str = "good",
            r: int | None = None, eps: float | None = None) -> bool:
    r = params.r if r is None else r
    eps = params.eps if eps is None else eps

    def good(c):
        return bool(good_mask(c.level, np.array([c.index]), grid, r, eps)[0])

    if not good(J):
        return False
    if mode == "good":
        return True
    if mode != "tau_good":
        raise ValueError(f"unknown goodness mode {mode!r}")
    if not all(good(ch) for ch in children(J)):
        return False
    for ell in range(1, params.tau + 1):
        if J.level - ell < grid.top_level:
            break
        if not good(ancestor(J, J.level - ell)):
            return False
    return True


def tau_good_mask(level: int, idx: np.ndarray, grid: DyadicGrid, params: GoodnessParams,
                  r: int | None = None, eps: float | None = None) -> np.ndarray:
    r = params.r if r is None else r
    eps = params.eps if eps is None else eps
    idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
    ok = good_mask(level, idx, grid, r, eps)
    for e in itertools.product((0, 1), repeat=idx.shape[1]):
        ok &= good_mask(level + 1, 2 * idx + np.asarray(e), grid, r, eps)
    for ell in range(1, params.tau + 1):
        if level - ell < grid.top_level:
            break
        ok &= good_mask(level - ell, idx >> ell, grid, r, eps)
    return ok


# ---------------------------------------------------------------------------
# deeply embedded families


def m_deep(grid: DyadicGrid, K, params: GoodnessParams, ell: int | None = None,
           depth: int | None = None) -> list[Cube]:
    """Maximal deeply embedded dyadic subcubes of K, down to the bottom level.

    ``depth`` replaces r (use tau for the tau-deep family).  With ``ell`` set,
    returns the refined family: members of M_deep(pi^ell K') for children K'
    of K that lie inside some member of M_deep(K).
    """
    depth = params.r if depth is None else depth
    base = _m_deep_full(grid, as_box(K), depth, params.eps)
    if ell is None:
        return base
    out = set()
    for kc in box_children(as_box(K)):
        if kc.level - ell < grid.top_level:
            continue
        anc = ancestor(kc, kc.level - ell)
        for J in _m_deep_full(grid, as_box(anc), depth, params.eps):
            if any(cube_contains(L, J) for L in base):
                out.add(J)
    return sorted(out)


def _m_deep_full(grid, b: Box, depth, eps) -> list[Cube]:
    out = []
    stack = box_children(b)
    while stack:
        c = stack.pop()
        if c.level - b.level >= depth and is_deeply_embedded(c, b, depth, eps):
            out.append(c)
        elif c.level < grid.bottom_level:
            stack.extend(children(c))
    return sorted(out)


def m_deep_occupied(grid: DyadicGrid, K, rel: np.ndarray, depth: int, eps: float,
                    inside: np.ndarray | None = None) -> dict:
    """Members of the maximal deep family that contain at least one point.

    ``rel`` holds relative preimage coordinates.  Returns {cube: point ids}.
    Equal to the full family filtered by occupancy (each point lies in at
    most one member, the first deep cube on its chain).
    """
    b = as_box(K)
    if inside is None:
        inside = points_in_box(grid, b, rel)
    ids = np.nonzero(inside)[0]
    out: dict = {}
    if ids.size == 0:
        return out
    pending = ids
    corner = np.asarray(b.corner, dtype=np.int64)
    for j in range(b.level + max(depth, 1), grid.bottom_level + 1):
        if pending.size == 0:
            break
        d = j - b.level
        idx = grid.indices_at(rel[pending], j)
        s = 1 << (d - 1)
        lo = corner * s
        gap = np.minimum(idx - lo, lo + 2 * s - 1 - idx).min(axis=1)
        hit = gap >= deep_threshold(d, eps) * (1 - _DEEP_RTOL)
        for row in np.nonzero(hit)[0]:
            c = Cube(j, tuple(int(v) for v in idx[row]))
            out.setdefault(c, []).append(int(pending[row]))
        pending = pending[~hit]
    return {c: np.asarray(v) for c, v in sorted(out.items())}


def points_in_box(grid: DyadicGrid, K, rel: np.ndarray) -> np.ndarray:
    b = as_box(K)
    if rel.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    idx = grid.indices_at(rel, b.level + 1)
    corner = np.asarray(b.corner, dtype=np.int64)
    return np.all((idx >= corner) & (idx <= corner + 1), axis=1)


def points_in_dilate(grid: DyadicGrid, J: Cube, gamma: float, rel: np.ndarray) -> np.ndarray:
    """Membership in the half-open dilate gamma*J (preimage coordinates)."""
    h = 2.0 ** (-J.level)
    c = (np.asarray(J.index, float) + 0.5) * h
    lo = c - 0.5 * gamma * h
    hi = c + 0.5 * gamma * h
    return np.all((rel >= lo) & (rel < hi), axis=1)


def dilate_contained(J: Cube, gamma: float, K) -> bool:
    """Exact check that the half-open dilate gamma*J lies in the half-open box K."""
    b = as_box(K)
    d = J.level - b.level
    if d < 1 or not cube_contains(b, J):
        return False
    # in units of l(J)/2: dilate spans [2a+1-gamma, 2a+1+gamma)
    s = 2 ** d
    for a, c in zip(J.index, b.corner):
        lo, hi = c * s, c * s + 2 * s
        if 2 * a + 1 - gamma < lo or 2 * a + 1 + gamma > hi:
            return False
    return True


def overlap_beta(n: int, r: int, eps: float, gamma: float) -> float:
    """Overlap bound with the unspecified dimensional constants set to sqrt(n) and 2^n."""
    cn, cpn = math.sqrt(n), 2.0**n
    return (2.0 ** (n * r + 1)
            + cpn * gamma**n / eps * math.log2(1 / (2 * gamma) + 2 * cn * 2 ** (r * eps))
            + cpn * gamma**n / (1 - eps) * math.log2(4 * gamma))


# ---------------------------------------------------------------------------
# alternate cubes and tents


def alternates_containing(c: Cube) -> list[Box]:
    """The 2^n alternate cubes of twice the side that contain c."""
    return [
        Box(c.level - 1, tuple(a - e for a, e in zip(c.index, eps)))
        for eps in itertools.product((0, 1), repeat=len(c.index))
    ]


def alternate_cubes(grid: DyadicGrid, level: int) -> list[Box]:
    if level + 1 > grid.bottom_level:
        raise ValueError("alternate cubes need level + 1 <= bottom_level")
    out = set()
    for c in grid.cubes_at(level + 1):
        out.update(alternates_containing(c))
    return sorted(out)


def tent_contains(grid: DyadicGrid, K, p: UpperHalfPoint, mode: str = "full", tau: int = 0) -> bool:
    """Membership of an upper half-space point in the (tau-deep) tent over K."""
    side = 2.0 ** (-as_box(K).level)
    y = grid.qmap.inverse(np.asarray(p.x, float))
    c = grid.center_pre(K)
    slack = 1e-12 * side
    if p.t <= 0:
        return False
    if p.t > side - 2 * float(np.max(np.abs(y - c))) + slack:
        return False
    if mode == "tau_deep":
        return p.t <= 2.0 ** (-tau) * side + slack
    if mode != "full":
        raise ValueError(f"unknown tent mode {mode!r}")
    return True


def tent_point(grid: DyadicGrid, J: Cube) -> UpperHalfPoint:
    return UpperHalfPoint(tuple(float(v) for v in grid.center(J)), grid.side(J))


def sort_key(c) -> tuple:
    return (c.level, tuple(c[1]))


def cube_json(c) -> dict:
    if isinstance(c, Box):
        if box_is_dyadic(c):
            c = box_to_cube(c)
        else:
            return {"level": c.level, "alt_corner": list(c.corner)}
    return {"level": c.level, "index": list(c.index)}


def cubes_sorted(cs: Iterable) -> list:
    return sorted(cs, key=sort_key)


def grid_family(n: int, top: int, bottom: int, root_lo: Sequence[int], root_hi: Sequence[int],
                qmap: QuasiMap, k: int, seed: int) -> list[DyadicGrid]:
    """Canonical grid plus k grids with seeded random origin shifts in [0, 2^-top)."""
    rng = np.random.default_rng(seed)
    grids = [DyadicGrid(n, (0.0,) * n, top, bottom, tuple(root_lo), tuple(root_hi), qmap)]
    side = 2.0 ** (-top)
    for _ in range(k):
        sh = tuple(float(v) for v in -rng.uniform(0, side, size=n))
        lo = tuple(int(a) for a in root_lo)
        hi = tuple(int(b) + 1 for b in root_hi)
        grids.append(DyadicGrid(n, sh, top, bottom, lo, hi, qmap))
    return grids


def rel_bounds(K) -> tuple[np.ndarray, np.ndarray]:
    """Bounds of a cube or box relative to the grid origin (preimage)."""
    b = as_box(K)
    h = 2.0 ** (-(b.level + 1))
    lo = np.asarray(b.corner, dtype=float) * h
    return lo, lo + 2 * h


def dilate_rel_bounds(J: Cube, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    h = 2.0 ** (-J.level)
    c = (np.asarray(J.index, float) + 0.5) * h
    return c - 0.5 * gamma * h, c + 0.5 * gamma * h
