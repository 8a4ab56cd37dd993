"""Fractional Poisson integrals of atomic measures, upstairs extensions and
the stopping-data measure living in the upper half-space."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend
from .geometry import (Cube, DyadicGrid, GoodnessParams, UpperHalfPoint, cube_contains,
                       dilate_rel_bounds, is_deeply_embedded, m_deep_occupied, rel_bounds)
from .measures import AtomicMeasure, GridMeasure

_INF = np.inf


@dataclass(frozen=True)
class PoissonParams:
    alpha: float
    m: float = 1.0

    def check(self, n: int) -> None:
        if not 0 <= self.alpha < n:
            raise ValueError("alpha must lie in [0, n)")
        if self.m <= 0 or n + self.m - self.alpha <= 0:
            raise ValueError("need m > 0 and n + m - alpha > 0")


@dataclass(frozen=True)
class Region:
    """Atoms whose preimage lies in ``inside`` and outside ``hole``.

    Both are (lo, hi) pairs of relative preimage bounds; None means no
    restriction.  ``Region.of`` builds the common shapes.
    """

    inside: tuple | None = None
    hole: tuple | None = None

    @classmethod
    def of(cls, inside=None, minus=None, gamma: float | None = None) -> "Region":
        ins = rel_bounds(inside) if inside is not None else None
        if minus is None:
            hole = None
        elif gamma is None or gamma == 1:
            hole = rel_bounds(minus)
        else:
            hole = dilate_rel_bounds(minus, gamma)
        return cls(ins, hole)

    def arrays(self, n: int):
        if self.inside is None:
            lo, hi = np.full(n, -_INF), np.full(n, _INF)
        else:
            lo, hi = self.inside
        if self.hole is None:
            # an empty box excludes nothing
            elo, ehi = np.full(n, _INF), np.full(n, _INF)
        else:
            elo, ehi = self.hole
        return lo, hi, elo, ehi

    def mask(self, rel: np.ndarray) -> np.ndarray:
        lo, hi, elo, ehi = self.arrays(rel.shape[1])
        keep = np.all((rel >= lo) & (rel < hi), axis=1)
        return keep & ~np.all((rel >= elo) & (rel < ehi), axis=1)


EVERYWHERE = Region()


def _as_gm(grid: DyadicGrid, mu) -> GridMeasure:
    return mu if isinstance(mu, GridMeasure) else GridMeasure(grid, mu)


def poisson_sum(grid: DyadicGrid, cubes: Sequence, mu, a: float, b: float,
                regions: Sequence[Region] | Region = EVERYWHERE,
                weights: np.ndarray | None = None) -> np.ndarray:
    """sum_i w_i l^a / (l + |y_i - c_Q|)^b for a batch of cubes.

    ``weights`` replaces the masses (for integrals of h dmu).
    """
    gm = _as_gm(grid, mu)
    k = len(cubes)
    if k == 0 or len(gm.mu) == 0:
        return np.zeros(k)
    n = grid.n
    if isinstance(regions, Region):
        regions = [regions] * k
    arrs = [r.arrays(n) for r in regions]
    inlo = np.ascontiguousarray([x[0] for x in arrs], dtype=float)
    inhi = np.ascontiguousarray([x[1] for x in arrs], dtype=float)
    exlo = np.ascontiguousarray([x[2] for x in arrs], dtype=float)
    exhi = np.ascontiguousarray([x[3] for x in arrs], dtype=float)
    centers = np.ascontiguousarray(np.atleast_2d([grid.center(Q) for Q in cubes]), dtype=float)
    sides = np.ascontiguousarray([grid.side(Q) for Q in cubes], dtype=float)
    w = gm.w if weights is None else np.asarray(weights, float)
    return np.asarray(_backend.poisson_boxes(
        np.ascontiguousarray(gm.img, dtype=float), np.ascontiguousarray(gm.rel, dtype=float),
        np.ascontiguousarray(w), centers, sides, float(a), float(b), inlo, inhi, exlo, exhi))


def poisson(grid: DyadicGrid, Q, mu, alpha: float, m: float = 1.0,
            region: Region = EVERYWHERE, weights=None) -> float:
    """m-weighted fractional Poisson integral; m = 1 is the standard one."""
    n = grid.n
    PoissonParams(alpha, m).check(n)
    return float(poisson_sum(grid, [Q], mu, m, n + m - alpha, region, weights)[0])


def poisson_repro(grid: DyadicGrid, Q, mu, alpha: float, region: Region = EVERYWHERE) -> float:
    """Reproducing Poisson integral sum m (l / (l + |y - c|)^2)^(n - alpha)."""
    s = grid.n - alpha
    return float(poisson_sum(grid, [Q], mu, s, 2 * s, region)[0])


def poisson_direct(grid: DyadicGrid, Q, mu: AtomicMeasure, alpha: float, m: float = 1.0) -> float:
    """Plain loop over atoms, independent of the batched kernel."""
    ell = grid.side(Q)
    c = grid.center(Q)
    total = 0.0
    for y, w in zip(mu.points, mu.masses):
        d = math.dist(tuple(y), tuple(c))
        total += w * ell**m / (ell + d) ** (grid.n + m - alpha)
    return total


def comparability_constant(n: int, alpha: float) -> float:
    return (2 + math.sqrt(n)) ** (n + 1 - alpha)


# ---------------------------------------------------------------------------
# upper half-space


def poisson_extension(mu: AtomicMeasure, alpha: float, p: UpperHalfPoint) -> float:
    if p.t <= 0:
        raise ValueError("extension needs t > 0")
    if len(mu) == 0:
        return 0.0
    d2 = ((mu.points - np.asarray(p.x, float)) ** 2).sum(axis=1)
    return float((mu.masses * p.t / (p.t**2 + d2) ** ((mu.n + 1 - alpha) / 2)).sum())


@dataclass
class UpstairsMeasure:
    xs: np.ndarray
    ts: np.ndarray
    weights: np.ndarray
    variant: str = "mu"
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if self.variant not in ("mu", "mu_bar"):
            raise ValueError("variant must be mu or mu_bar")
        if np.any(self.weights < 0) or np.any(self.ts <= 0):
            raise ValueError("weights must be nonnegative and heights positive")

    def __len__(self):
        return self.ts.shape[0]

    def bar(self) -> "UpstairsMeasure":
        if self.variant == "mu_bar":
            return self
        return UpstairsMeasure(self.xs, self.ts, self.weights / self.ts**2, "mu_bar", self.labels)

    def unbar(self) -> "UpstairsMeasure":
        if self.variant == "mu":
            return self
        return UpstairsMeasure(self.xs, self.ts, self.weights * self.ts**2, "mu", self.labels)

    def restrict(self, mask) -> "UpstairsMeasure":
        mask = np.asarray(mask, bool)
        return UpstairsMeasure(self.xs[mask], self.ts[mask], self.weights[mask], self.variant,
                               [lab for lab, k in zip(self.labels, mask) if k])

    def in_box(self, grid: DyadicGrid, I) -> np.ndarray:
        """Membership in I x [0, l(I)] (closed on top so that J = I counts)."""
        if len(self) == 0:
            return np.zeros(0, bool)
        lo, hi = rel_bounds(I)
        rel = grid.rel_pre(self.xs)
        inside = np.all((rel >= lo) & (rel < hi), axis=1)
        return inside & (self.ts <= grid.side(I) * (1 + 1e-12))

    def t2_integral(self, grid: DyadicGrid, I) -> float:
        """int over the box above I of t^2 against the barred measure."""
        b = self.bar()
        m = b.in_box(grid, I)
        return float((b.weights[m] * b.ts[m] ** 2).sum())


def dual_poisson(nu: UpstairsMeasure, alpha: float, y) -> float:
    if len(nu) == 0:
        return 0.0
    y = np.asarray(y, float)
    n = nu.xs.shape[1]
    d2 = ((nu.xs - y) ** 2).sum(axis=1)
    return float((nu.weights * nu.ts**2 / (nu.ts**2 + d2) ** ((n + 1 - alpha) / 2)).sum())


# ---------------------------------------------------------------------------
# stopping-data measure


def stopping_children(collection: Sequence[Cube], F: Cube) -> list[Cube]:
    """Maximal members of the collection strictly inside F."""
    inner = [G for G in collection if G != F and cube_contains(F, G)]
    return sorted(G for G in inner if not any(H != G and cube_contains(H, G) for H in inner))


def localized_shift_family(H, collection: Sequence[Cube], F: Cube, params: GoodnessParams) -> set:
    """Good Haar cubes tau-deep in F but not tau-deep in any stopping child of F."""
    kids = stopping_children(collection, F)
    out = set()
    for Q in H.subtree(F):
        if Q not in H.bases or not H.is_good(Q, params.r, params.eps):
            continue
        if not is_deeply_embedded(Q, F, params.tau, params.eps):
            continue
        if any(is_deeply_embedded(Q, K, params.tau, params.eps) for K in kids):
            continue
        out.add(Q)
    return out


def localized_projection_energy(H, family: set, J: Cube) -> float:
    return float(sum(H.x_energy(Q) for Q in H.subtree(J) if Q in family))


def energy_measure(grid: DyadicGrid, collection: Sequence[Cube], H, params: GoodnessParams,
                   variant: str = "mu") -> UpstairsMeasure:
    """Point masses ||P_{F,J} x||^2 at (c_J, l(J)) for J in M_deep(F), F in the collection.

    Only deep cubes holding omega atoms can carry energy, so the deep family
    is walked through the occupied cubes.
    """
    n = grid.n
    xs, ts, ws, labels = [], [], [], []
    for F in sorted(set(collection)):
        fam = localized_shift_family(H, collection, F, params)
        if not fam:
            continue
        for J in m_deep_occupied(grid, F, H.gm.rel, params.r, params.eps):
            e = localized_projection_energy(H, fam, J)
            if e <= 0:
                continue
            xs.append(grid.center(J))
            ts.append(grid.side(J))
            ws.append(e)
            labels.append((F, J))
    mu = UpstairsMeasure(np.asarray(xs, float).reshape(-1, n), np.asarray(ts, float),
                         np.asarray(ws, float), "mu", labels)
    return mu.bar() if variant == "mu_bar" else mu


def mu_hat_direct(grid: DyadicGrid, nu: UpstairsMeasure, I: Cube) -> float:
    """Combinatorial side of the tent identity: sum of labelled weights with J inside I."""
    m = nu.unbar()
    return float(sum(w for (F, J), w in zip(m.labels, m.weights) if cube_contains(I, J)))
