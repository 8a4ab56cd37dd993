"""Fractional Riesz-type kernels, their truncations, and exact operator norms and
testing constants on finite atomic weight pairs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import svdvals

from . import _backend
from .geometry import Cube, DyadicGrid, cube_json, dilate_rel_bounds, rel_bounds
from .haar import HaarSystem
from .measures import AtomicMeasure, GridMeasure
from .muckenhoupt import CubeFamily, ConstantWitness
from .poisson import poisson_sum

TRUNCATIONS = ("tangent", "cutoff", "none")
FAMILIES = ("riesz_component", "riesz_vector", "custom")


def _sym_first_cubed(u):
    return u[..., 0] ** 3


def _sym_component_sum(u):
    return u.sum(axis=-1) / math.sqrt(u.shape[-1])


# odd angular symbols usable as custom kernels (functions of the unit vector)
CUSTOM_SYMBOLS = {
    "first_cubed": _sym_first_cubed,
    "component_sum": _sym_component_sum,
}


@dataclass(frozen=True)
class KernelSpec:
    n: int = 1
    alpha: float = 0.0
    family: str = "riesz_component"
    component: int = 1
    symbol: str | None = None
    truncation: str = "tangent"
    delta_trunc: float | None = None
    R_trunc: float | None = None
    C_CZ: float = 1.0
    delta_smooth: float = 1.0

    def __post_init__(self):
        if not 0 <= self.alpha < self.n:
            raise ValueError("alpha must lie in [0, n)")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "riesz_component" and not 1 <= self.component <= self.n:
            raise ValueError("Riesz component out of range")
        if self.family == "custom" and self.symbol not in CUSTOM_SYMBOLS:
            raise ValueError(f"unknown custom symbol {self.symbol!r}")
        if self.truncation not in TRUNCATIONS:
            raise ValueError(f"unknown truncation {self.truncation!r}")
        if self.truncation != "none" and self.delta_trunc is not None and self.R_trunc is not None:
            if not 0 < self.delta_trunc < self.R_trunc:
                raise ValueError("truncation needs 0 < delta < R")
        if not 0 < self.delta_smooth <= 1:
            raise ValueError("delta_smooth must lie in (0, 1]")
        if self.C_CZ <= 0:
            raise ValueError("C_CZ must be positive")

    @property
    def blocks(self) -> int:
        return self.n if self.family == "riesz_vector" else 1

    def with_truncation(self, delta, R, kind=None) -> "KernelSpec":
        d = dict(self.__dict__)
        d.update(delta_trunc=float(delta), R_trunc=float(R))
        if kind is not None:
            d["truncation"] = kind
        return KernelSpec(**d)

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @property
    def tangent_zero(self) -> float:
        """Radius where the outer tangent line reaches zero."""
        s = self.n - self.alpha
        return self.R_trunc * (s + 1) / s


def default_truncation(sigma: AtomicMeasure, omega: AtomicMeasure) -> tuple[float, float]:
    """Half the least distance between distinct sigma/omega atoms, and twice the joint diameter."""
    if len(sigma) == 0 or len(omega) == 0:
        return 0.5, 2.0
    d = np.sqrt(((omega.points[:, None, :] - sigma.points[None, :, :]) ** 2).sum(-1))
    pos = d[d > 0]
    delta = 0.5 * float(pos.min()) if pos.size else 0.5
    pts = np.vstack([sigma.points, omega.points])
    diam = float(np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)).max())
    R = 2.0 * diam if diam > 0 else 2.0
    if R <= delta:
        R = 4.0 * delta
    return delta, R


def resolve(spec: KernelSpec, sigma: AtomicMeasure, omega: AtomicMeasure) -> KernelSpec:
    if spec.truncation == "none" or (spec.delta_trunc is not None and spec.R_trunc is not None):
        return spec
    d, R = default_truncation(sigma, omega)
    return spec.with_truncation(spec.delta_trunc or d, spec.R_trunc or R)


def _radii(spec: KernelSpec) -> tuple[float, float]:
    if spec.truncation == "none":
        return 0.0, math.inf
    return float(spec.delta_trunc), float(spec.R_trunc)


def radial_profile(spec: KernelSpec, r) -> np.ndarray:
    """psi(r): r^(alpha - n) on [delta, R], modified outside per the truncation (psi(0) = 0)."""
    r = np.asarray(r, float)
    d, R = _radii(spec)
    out = np.asarray(_backend.profile(r, float(spec.n - spec.alpha), d, R, spec.truncation), float)
    return np.where(r > 0, out, 0.0)


def kernel_values(spec: KernelSpec, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """K(y_i, x_j) for all pairs, shape (blocks, len(y), len(x))."""
    y = np.atleast_2d(np.asarray(y, float))
    x = np.atleast_2d(np.asarray(x, float))
    s = float(spec.n - spec.alpha)
    d, R = _radii(spec)
    if spec.family != "custom":
        comps = range(spec.n) if spec.family == "riesz_vector" else [spec.component - 1]
        try:
            return np.stack([_backend.riesz_matrix(y, x, c, s, d, R, spec.truncation) for c in comps])
        except ZeroDivisionError as exc:
            raise ValueError(str(exc)) from None
    w = y[:, None, :] - x[None, :, :]
    rad = np.sqrt((w**2).sum(-1))
    if spec.truncation == "none" and np.any(rad == 0):
        raise ValueError("untruncated kernel evaluated on the diagonal")
    u = w / np.where(rad > 0, rad, 1.0)[..., None]
    return (CUSTOM_SYMBOLS[spec.symbol](u) * radial_profile(spec, rad))[None]


def kernel_eval(spec: KernelSpec, y, x):
    v = kernel_values(spec, np.atleast_1d(y)[None], np.atleast_1d(x)[None])[:, 0, 0]
    return float(v[0]) if spec.blocks == 1 else v


# ---------------------------------------------------------------------------
# operator matrices and norms


@dataclass
class OperatorMatrix:
    """Blocks of K(y_i, x_j) sqrt(m_j m_i): rows omega atoms, columns sigma atoms."""

    blocks: np.ndarray
    spec: KernelSpec

    @classmethod
    def build(cls, sigma: AtomicMeasure, omega: AtomicMeasure, spec: KernelSpec) -> "OperatorMatrix":
        spec = resolve(spec, sigma, omega)
        if len(sigma) == 0 or len(omega) == 0:
            return cls(np.zeros((spec.blocks, len(omega), len(sigma))), spec)
        K = kernel_values(spec, omega.points, sigma.points)
        scale = np.sqrt(np.outer(omega.masses, sigma.masses))
        return cls(K * scale[None], spec)

    @property
    def stacked(self) -> np.ndarray:
        b, m, k = self.blocks.shape
        return self.blocks.reshape(b * m, k)

    def transpose(self) -> "OperatorMatrix":
        return OperatorMatrix(np.transpose(self.blocks, (0, 2, 1)).copy(), self.spec)


class ConvergenceError(RuntimeError):
    pass


def power_norm(M: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> tuple[float, int]:
    """Largest singular value by power iteration on M^T M from the all-ones vector."""
    k = M.shape[1]
    v = np.ones(k) / math.sqrt(k)
    lam = 0.0
    for it in range(1, max_iter + 1):
        u = M.T @ (M @ v)
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            return 0.0, it
        v = u / nu
        if abs(nu - lam) <= tol * nu:
            return math.sqrt(nu), it
        lam = nu
    raise ConvergenceError(f"power iteration stalled: residual {abs(nu - lam) / nu:.3e}")


def dense_norm(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(svdvals(M)[0])


def op_norm(sigma: AtomicMeasure, omega: AtomicMeasure, spec: KernelSpec, tol: float = 1e-10,
            method: str = "auto", dense_limit: int = 64) -> tuple[float, int]:
    """(norm, iterations); iterations is 0 for closed-form and dense evaluations."""
    M = OperatorMatrix.build(sigma, omega, spec).stacked
    if M.size == 0:
        return 0.0, 0
    if M.shape[1] == 1 and M.shape[0] == spec.blocks:
        return float(np.linalg.norm(M)), 0
    small = len(sigma) + len(omega) <= dense_limit
    if method == "dense" or (method == "auto" and small):
        return dense_norm(M), 0
    try:
        return power_norm(M, tol)
    except ConvergenceError:
        if small or method == "auto":
            return dense_norm(M), 0
        raise


def truncation_sweep(sigma, omega, spec: KernelSpec, factors=(1.0, 0.5, 0.25),
                     R_factors=(1.0, 2.0, 4.0)) -> dict:
    """Norms over a grid of truncation radii around the defaults; reports the max."""
    base = resolve(spec, sigma, omega)
    rows = []
    for f in factors:
        for g in R_factors:
            s = base if base.truncation == "none" else base.with_truncation(base.delta_trunc * f,
                                                                            base.R_trunc * g)
            rows.append({"delta": s.delta_trunc, "R": s.R_trunc, "norm": op_norm(sigma, omega, s)[0]})
            if base.truncation == "none":
                break
        if base.truncation == "none":
            break
    best = max(rows, key=lambda r: r["norm"])
    return {"max": best["norm"], "argmax": best, "rows": rows, "exhaustive": False}


# ---------------------------------------------------------------------------
# testing and weak boundedness constants


def _family(sigma, omega, grids, fam):
    return fam if fam is not None else CubeFamily(sigma, omega, grids)


def _inside(rel: np.ndarray, lo, hi) -> np.ndarray:
    if rel.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return np.all((rel >= lo) & (rel < hi), axis=1)


def _tripled_bounds(box):
    lo, hi = rel_bounds(box)
    side = hi - lo
    return lo - side, hi + side


def testing_constant(sigma: AtomicMeasure, omega: AtomicMeasure, spec: KernelSpec,
                     direction: str = "forward", tripled: bool = False, grids=None,
                     fam: CubeFamily | None = None) -> ConstantWitness:
    """sup_Q |Q|^{-1/2} || 1_Q (or 1_3Q) T(1_Q mu) ||, mu = sigma forward, omega dual.

    Dual testing of a vector kernel takes the worst single component.
    """
    fam = _family(sigma, omega, grids, fam)
    spec = resolve(spec, sigma, omega)
    M = OperatorMatrix.build(sigma, omega, spec)
    if direction == "forward":
        B, src, dst = M.blocks, sigma, omega
        src_ids, dst_ids = (lambda c: c.s_ids), (lambda c: c.w_ids)
    elif direction == "dual":
        B, src, dst = np.transpose(M.blocks, (0, 2, 1)), omega, sigma
        src_ids, dst_ids = (lambda c: c.w_ids), (lambda c: c.s_ids)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    rels = [g.rel_pre(dst.points) if len(dst) else np.zeros((0, g.n)) for g in fam.grids]
    root = np.sqrt(src.masses) if len(src) else np.zeros(0)
    best = None
    for c in fam.cubes:
        cols = src_ids(c)
        if cols.size == 0:
            continue
        if tripled:
            rows = np.nonzero(_inside(rels[c.grid], *_tripled_bounds(c.box)))[0]
        else:
            rows = dst_ids(c)
        if rows.size == 0:
            continue
        vals = B[:, rows][:, :, cols] @ root[cols]
        if direction == "dual":
            # the adjoint of a vector operator is tested one component at a time
            sq = float((vals**2).sum(axis=1).max())
        else:
            sq = float((vals**2).sum())
        v = math.sqrt(sq / float(src.masses[cols].sum()))
        if best is None or v > best[0]:
            best = (v, c.witness())
    name = f"testing_{direction}" + ("_tripled" if tripled else "")
    spec_out = fam.spec() | {"kernel": spec.to_json()}
    if best is None:
        return ConstantWitness(name, 0.0, {"kind": "none"}, spec_out)
    return ConstantWitness(name, best[0], best[1], spec_out)


def _box_arrays(fam: CubeFamily, gi: int, cubes):
    lo = np.array([rel_bounds(c.box)[0] for c in cubes])
    hi = np.array([rel_bounds(c.box)[1] for c in cubes])
    lev = np.array([c.box.level for c in cubes])
    return lo, hi, lev


def wbp_constant(sigma: AtomicMeasure, omega: AtomicMeasure, spec: KernelSpec, C_comp: float = 2.0,
                 grids=None, fam: CubeFamily | None = None) -> ConstantWitness:
    """sup over adjacent comparable pairs (Q, Q') of |int_Q T(1_Q' sigma) d omega| / sqrt(|Q|_omega |Q'|_sigma)."""
    if C_comp < 1:
        raise ValueError("C_comp must be at least 1")
    fam = _family(sigma, omega, grids, fam)
    spec = resolve(spec, sigma, omega)
    M = OperatorMatrix.build(sigma, omega, spec).blocks
    rs = np.sqrt(sigma.masses) if len(sigma) else np.zeros(0)
    rw = np.sqrt(omega.masses) if len(omega) else np.zeros(0)
    kmax = math.floor(math.log2(C_comp) + 1e-12)
    best = None
    for gi in range(len(fam.grids)):
        qs = [c for c in fam.cubes if c.grid == gi and c.w_ids.size]
        ps = [c for c in fam.cubes if c.grid == gi and c.s_ids.size]
        if not qs or not ps:
            continue
        qlo, qhi, qlev = _box_arrays(fam, gi, qs)
        plo, phi_, plev = _box_arrays(fam, gi, ps)
        for j, P in enumerate(ps):
            close = np.abs(qlev - plev[j]) <= kmax
            if not close.any():
                continue
            disjoint = np.any((qhi <= plo[j]) | (qlo >= phi_[j]), axis=1)
            tlo, thi = plo[j] - (phi_[j] - plo[j]), phi_[j] + (phi_[j] - plo[j])
            q_in_3p = np.all((qlo >= tlo) & (qhi <= thi), axis=1)
            slo, shi = qlo - (qhi - qlo), qhi + (qhi - qlo)
            p_in_3q = np.all((plo[j] >= slo) & (phi_[j] <= shi), axis=1)
            ok = close & disjoint & (q_in_3p | p_in_3q)
            for i in np.nonzero(ok)[0]:
                Q = qs[i]
                num = np.abs(rw[Q.w_ids] @ M[:, Q.w_ids][:, :, P.s_ids] @ rs[P.s_ids])
                num = float(np.sqrt((num**2).sum()))
                den = math.sqrt(float(omega.masses[Q.w_ids].sum() * sigma.masses[P.s_ids].sum()))
                v = num / den
                if best is None or v > best[0]:
                    best = (v, {"kind": "pair", "grid": gi, "cube": cube_json(Q.box),
                                "partner": cube_json(P.box)})
    spec_out = fam.spec() | {"kernel": spec.to_json(), "C_comp": C_comp}
    if best is None:
        return ConstantWitness("wbp", 0.0, {"kind": "none"}, spec_out)
    return ConstantWitness("wbp", best[0], best[1], spec_out)


# ---------------------------------------------------------------------------
# monotonicity and pivotal ratio checks


def _T_at(spec: KernelSpec, mu: AtomicMeasure, pts: np.ndarray) -> np.ndarray:
    """T(mu) at the given points, shape (blocks, len(pts))."""
    if len(mu) == 0:
        return np.zeros((spec.blocks, len(pts)))
    return kernel_values(spec, pts, mu.points) @ mu.masses


@dataclass
class MonoRatio:
    lhs: float
    phi: float
    ratio: float
    terms: dict = field(default_factory=dict)


def mono_ratio(grid: DyadicGrid, J: Cube, omega: AtomicMeasure, mu: AtomicMeasure, spec: KernelSpec,
               haar: HaarSystem | None = None) -> MonoRatio:
    """|| Delta_J T mu ||_omega against the two-term Poisson bound for mu supported away from 2J."""
    n = grid.n
    if len(mu):
        lo, hi = dilate_rel_bounds(J, 2.0)
        if _inside(grid.rel_pre(mu.points), lo, hi).any():
            raise ValueError(f"measure meets the double of {cube_json(J)}")
    spec = spec if spec.truncation == "none" or spec.delta_trunc else resolve(spec, mu, omega)
    H = haar if haar is not None else HaarSystem(GridMeasure(grid, omega))
    if len(mu) == 0:
        return MonoRatio(0.0, 0.0, 0.0)
    Tmu = _T_at(spec, mu, omega.points)
    lhs2 = 0.0
    for b in range(spec.blocks):
        d = H.delta_values(J, Tmu[b])
        lhs2 += float((omega.masses * d**2).sum())
    ell = grid.side(J)
    a = spec.alpha
    p1 = poisson_sum(grid, [J], mu, 1.0, n + 1 - a)[0] / ell
    pd = poisson_sum(grid, [J], mu, 1.0 + spec.delta_smooth, n + 1 + spec.delta_smooth - a)[0] / ell
    ids = H.gm.ids(J)
    if ids.size:
        pts = omega.points[ids]
        m = omega.masses[ids]
        mean = (m[:, None] * pts).sum(0) / m.sum()
        spread = float((m * ((pts - mean) ** 2).sum(1)).sum())
    else:
        spread = 0.0
    xe = H.x_energy(J)
    phi = math.sqrt(p1**2 * xe + pd**2 * spread)
    lhs = math.sqrt(lhs2)
    ratio = lhs / phi if phi > 0 else 0.0
    return MonoRatio(lhs, phi, ratio, {"poisson": p1, "poisson_smooth": pd, "x_energy": xe,
                                       "spread": spread})


def pivotal_ratio(grid: DyadicGrid, J: Cube, psi: np.ndarray, omega: AtomicMeasure, nu: AtomicMeasure,
                  spec: KernelSpec, gamma: float = 2.0) -> float:
    """|<T nu, psi>_omega| / (||psi|| P(J, nu) sqrt|J|_omega) for psi supported in J with mean zero."""
    if gamma < 2:
        raise ValueError("gamma must be at least 2")
    psi = np.asarray(psi, float)
    gw = GridMeasure(grid, omega)
    inJ = gw.mask(J)
    if np.any(psi[~inJ] != 0):
        raise ValueError("test function not supported in J")
    scale = float(np.abs(omega.masses * psi).sum())
    if abs(float((omega.masses * psi).sum())) > 1e-12 * max(scale, 1.0):
        raise ValueError("test function does not have omega-mean zero")
    if len(nu):
        lo, hi = dilate_rel_bounds(J, gamma)
        if _inside(grid.rel_pre(nu.points), lo, hi).any():
            raise ValueError(f"measure meets the {gamma}-dilate of {cube_json(J)}")
    if len(nu) == 0 or not np.any(psi):
        return 0.0
    spec = spec if spec.truncation == "none" or spec.delta_trunc else resolve(spec, nu, omega)
    Tnu = _T_at(spec, nu, omega.points)
    num = float(np.sqrt(((Tnu * (omega.masses * psi)[None]).sum(1) ** 2).sum()))
    norm = math.sqrt(float((omega.masses * psi**2).sum()))
    n = grid.n
    P = poisson_sum(grid, [J], nu, 1.0, n + 1 - spec.alpha)[0]
    den = norm * P * math.sqrt(gw.mass(J))
    return num / den if den > 0 else 0.0


# ---------------------------------------------------------------------------
# necessity diagnostics


def necessity_ratios(sigma, omega, spec: KernelSpec, grids, fam=None) -> dict:
    """sqrt(offset A2) / N and sqrt(punctured A2) / N for one instance."""
    from .muckenhoupt import offset_A2, punctured_A2

    fam = _family(sigma, omega, grids, fam)
    N = op_norm(sigma, omega, spec)[0]
    off = offset_A2(sigma, omega, spec.alpha, grids, fam).value
    pun = punctured_A2(sigma, omega, spec.alpha, "forward", grids, fam).value
    ratio = (lambda v: math.sqrt(v) / N if N > 0 else (0.0 if v == 0 else math.inf))
    return {"norm": N, "offset_A2": off, "punctured_A2": pun,
            "offset_ratio": ratio(off), "punctured_ratio": ratio(pun)}
