"""Measure-adapted Haar systems and projection energies of the identity map."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Cube, DyadicGrid, GoodnessParams, children, cube_contains, good_mask
from .measures import AtomicMeasure, GridMeasure


def child_basis(masses: np.ndarray) -> np.ndarray:
    """Orthonormal mean-zero basis over d massive children, shape (d-1, d).

    Row k compares child k+1 with the union of children 0..k, so the last
    nonzero entry of each row is positive.
    """
    m = np.asarray(masses, float)
    d = m.shape[0]
    B = np.zeros((max(d - 1, 0), d))
    acc = m[0] if d else 0.0
    for k in range(1, d):
        mk = m[k]
        c = np.sqrt(acc * mk / (acc + mk))
        B[k - 1, :k] = -c / acc
        B[k - 1, k] = c / mk
        acc += mk
    return B


def gram_schmidt_basis(masses: np.ndarray, order) -> np.ndarray:
    """Alternative orthonormal basis built by Gram-Schmidt in a given child order."""
    m = np.asarray(masses, float)
    d = m.shape[0]
    vecs = []
    one = np.ones(d) / np.sqrt(m.sum())
    for j in order:
        v = np.zeros(d)
        v[j] = 1.0
        v -= (v * m) @ one * one
        for u in vecs:
            v -= (v * m) @ u * u
        nrm = np.sqrt((v * v * m).sum())
        if nrm > 1e-12 and len(vecs) < d - 1:
            vecs.append(v / nrm)
    return np.array(vecs).reshape(-1, d)


@dataclass
class CubeBasis:
    kids: list          # massive children, lexicographic
    kid_ids: list       # atom ids per child
    kid_mass: np.ndarray
    values: np.ndarray  # (d-1, d)


class HaarSystem:
    """Haar functions of a measure on a truncated grid (cubes above the bottom level)."""

    def __init__(self, gm: GridMeasure, basis_fn=child_basis):
        self.gm = gm
        self.grid = gm.grid
        self.mu = gm.mu
        self.bases: dict[Cube, CubeBasis] = {}
        self._basis_fn = basis_fn
        for k in range(self.grid.top_level, self.grid.bottom_level):
            nxt = gm.occupied(k + 1)
            for Q in gm.occupied(k):
                kids = [c for c in children(Q) if c in nxt]
                if len(kids) < 2:
                    continue
                ids = [nxt[c] for c in kids]
                km = np.array([gm.w[i].sum() for i in ids])
                self.bases[Q] = CubeBasis(kids, ids, km, basis_fn(km))
        self._x_energy: dict[Cube, float] = {}
        self._tree_energy: dict[Cube, float] = {}
        self._good: dict = {}

    # --- coefficients
    def delta_coeffs(self, Q: Cube, f) -> np.ndarray:
        """<f, h_Q^a> for each a; f given at atoms, shape (N,) or (N, k)."""
        b = self.bases.get(Q)
        f = np.asarray(f, float)
        if b is None:
            return np.zeros((0,) + f.shape[1:])
        w = self.gm.w
        sums = np.array([(w[i, None] * f[i].reshape(len(i), -1)).sum(axis=0) for i in b.kid_ids])
        out = b.values @ sums
        return out if f.ndim > 1 else out[:, 0]

    def delta_values(self, Q: Cube, f) -> np.ndarray:
        """Values of Delta_Q f at every atom (zero outside Q)."""
        f = np.asarray(f, float)
        out = np.zeros_like(f)
        b = self.bases.get(Q)
        if b is None:
            return out
        coef = self.delta_coeffs(Q, f)
        for j, ids in enumerate(b.kid_ids):
            out[ids] = np.tensordot(b.values[:, j], coef, axes=(0, 0))
        return out

    def function_values(self, Q: Cube) -> np.ndarray:
        """Matrix (d-1, N) of Haar function values at all atoms."""
        b = self.bases[Q]
        H = np.zeros((b.values.shape[0], len(self.mu)))
        for j, ids in enumerate(b.kid_ids):
            H[:, ids] = b.values[:, [j]]
        return H

    def x_energy(self, Q: Cube) -> float:
        """||Delta_Q x||^2 from the child averages (basis free)."""
        if Q not in self._x_energy:
            b = self.bases.get(Q)
            if b is None:
                e = 0.0
            else:
                x, w = self.mu.points, self.gm.w
                ids = np.concatenate(b.kid_ids)
                mQ = (w[ids, None] * x[ids]).sum(axis=0) / w[ids].sum()
                e = 0.0
                for i, mc in zip(b.kid_ids, b.kid_mass):
                    avg = (w[i, None] * x[i]).sum(axis=0) / mc
                    e += mc * float(((avg - mQ) ** 2).sum())
            self._x_energy[Q] = e
        return self._x_energy[Q]

    def tree_energy(self, Q: Cube) -> float:
        """||P_Q x||^2 = sum of Haar energies of all subcubes of Q."""
        if Q not in self._tree_energy:
            e = self.x_energy(Q)
            if Q.level < self.grid.bottom_level:
                occ = self.gm.occupied(Q.level + 1)
                for c in children(Q):
                    if c in occ:
                        e += self.tree_energy(c)
            self._tree_energy[Q] = e
        return self._tree_energy[Q]

    def subtree(self, J: Cube) -> list[Cube]:
        out, stack = [], [J]
        while stack:
            Q = stack.pop()
            if Q.level > self.grid.bottom_level or Q not in self.gm.occupied(Q.level):
                continue
            out.append(Q)
            if Q.level < self.grid.bottom_level:
                stack.extend(children(Q))
        return out

    def is_good(self, Q: Cube, r: int, eps: float) -> bool:
        key = (Q, r, eps)
        if key not in self._good:
            self._good[key] = bool(good_mask(Q.level, np.array([Q.index]), self.grid, r, eps)[0])
        return self._good[key]

    # --- projections of x
    def good_energy(self, J: Cube, params: GoodnessParams) -> float:
        return sum(self.x_energy(Q) for Q in self.subtree(J)
                   if Q in self.bases and self.is_good(Q, params.r, params.eps))

    def maximal_good(self, J: Cube, params: GoodnessParams) -> list[Cube]:
        out, stack = [], [J]
        occ = self.gm.occupied
        while stack:
            Q = stack.pop()
            if Q not in occ(Q.level):
                continue
            if self.is_good(Q, params.r, params.eps):
                out.append(Q)
            elif Q.level < self.grid.bottom_level:
                stack.extend(children(Q))
        return sorted(out)

    def subgood_energy(self, J: Cube, params: GoodnessParams) -> float:
        return sum(self.tree_energy(Q) for Q in self.maximal_good(J, params))

    def projection_energy(self, spec: "ProjectionSpec", params: GoodnessParams | None = None,
                          f=None) -> float:
        """||P x||^2 (or ||P f||^2 when f is given) for a projection family."""
        cubes = self.resolve(spec, params)
        if f is None:
            return float(sum(self.x_energy(Q) for Q in cubes))
        return float(sum((self.delta_coeffs(Q, f) ** 2).sum() for Q in cubes))

    def resolve(self, spec: "ProjectionSpec", params: GoodnessParams | None = None) -> list[Cube]:
        J = spec.cube
        fam = spec.family
        if fam == "all":
            return [Q for Q in self.subtree(J) if Q in self.bases]
        if fam == "good":
            return [Q for Q in self.subtree(J) if Q in self.bases and self.is_good(Q, params.r, params.eps)]
        if fam == "subgood":
            out = []
            for G in self.maximal_good(J, params):
                out.extend(Q for Q in self.subtree(G) if Q in self.bases)
            return out
        if fam in ("collection", "corona_shift"):
            return [Q for Q in spec.collection if Q in self.bases and cube_contains(J, Q)]
        raise ValueError(f"unknown projection family {fam!r}")

    def average(self, Q: Cube, f) -> float:
        ids = self.gm.ids(Q)
        w = self.gm.w[ids]
        if w.sum() == 0:
            raise ZeroDivisionError(f"cube {Q} carries no mass")
        return float((w * np.asarray(f, float)[ids]).sum() / w.sum())


@dataclass(frozen=True)
class ProjectionSpec:
    cube: Cube
    family: str = "all"
    collection: tuple = ()


def build_haar(mu: AtomicMeasure, grid: DyadicGrid) -> HaarSystem:
    return HaarSystem(GridMeasure(grid, mu))


def variance(mu: AtomicMeasure, mask=None) -> float:
    """int |x - m|^2 dmu over the masked atoms."""
    x, w = mu.points, mu.masses
    if mask is not None:
        x, w = x[mask], w[mask]
    if w.size == 0:
        return 0.0
    m = (w[:, None] * x).sum(axis=0) / w.sum()
    return float((w * ((x - m) ** 2).sum(axis=1)).sum())


def average_and_telescope(H: HaarSystem, f, Q0: Cube, Q1: Cube, Q2: Cube):
    """Check sum_{Q in [Q1, Q2]} Delta_Q f = E_{Q0} f - E_{Q2} f on Q0.

    Returns ({cube: average}, residual).
    """
    if not (cube_contains(Q1, Q0) and Q0.level == Q1.level + 1 and cube_contains(Q2, Q1)):
        raise ValueError("need Q0 a child of Q1 and Q1 inside Q2")
    f = np.asarray(f, float)
    ids = H.gm.ids(Q0)
    if H.gm.w[ids].sum() == 0:
        raise ZeroDivisionError("Q0 carries no mass; averages undefined")
    total = np.zeros(len(H.mu))
    Q = Q1
    while True:
        total += H.delta_values(Q, f)
        if Q == Q2:
            break
        Q = Cube(Q.level - 1, tuple(a >> 1 for a in Q.index))
    e0, e2 = H.average(Q0, f), H.average(Q2, f)
    resid = float(np.max(np.abs(total[ids] - (e0 - e2))))
    return {Q0: e0, Q2: e2}, resid


def useful_bound_residual(H: HaarSystem, Q: Cube) -> float:
    """max over children I' and a of |E_{I'} h| - 1/sqrt(|I'|); nonpositive when the bound holds."""
    b = H.bases.get(Q)
    if b is None:
        return -np.inf
    worst = -np.inf
    for j, mc in enumerate(b.kid_mass):
        worst = max(worst, float(np.max(np.abs(b.values[:, j]))) - 1 / np.sqrt(mc))
    return worst
