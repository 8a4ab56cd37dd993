"""Experiment configuration: parsing, defaults and validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import DyadicGrid, GoodnessParams, QuasiMap, grid_family
from ..measures import AtomicMeasure, generate
from ..operator import KernelSpec

SUITE_DEFAULTS = {
    "instances": None,
    "eps_split": [0.1, 0.5],
    "cz_C": 4.0,
    "wbp_C": 2.0,
    "rounds": 10,
    "energy_start": 1.0,
    "C_nec": None,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n: int
    alpha: float
    grids: list
    sigma: AtomicMeasure | None
    omega: AtomicMeasure | None
    params: GoodnessParams
    kernel: KernelSpec
    seed: int = 0
    generator: dict = field(default_factory=dict)
    suite: dict = field(default_factory=dict)
    echo: dict = field(default_factory=dict)

    def instance(self) -> tuple[AtomicMeasure, AtomicMeasure]:
        """The inline measures, or the generated pair for the configured seed."""
        if self.sigma is not None and self.omega is not None:
            return self.sigma, self.omega
        return generated_pair(self.generator, self.n, instance_seed(self.seed, 0))


def instance_seed(seed: int, index: int) -> int:
    """Deterministic sub-seed for instance ``index``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def generated_pair(gen: dict, n: int, seed: int) -> tuple[AtomicMeasure, AtomicMeasure]:
    spec_s = dict(gen.get("sigma", {"count": 8}))
    spec_w = dict(gen.get("omega", {"count": 8}))
    spec_s.setdefault("n", n)
    spec_w.setdefault("n", n)
    if spec_s.get("kind") == "pair_with_common":
        return generate(seed, spec_s)
    ss = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    return generate(int(ss[0]), spec_s), generate(int(ss[1]), spec_w)


def _grids(d: dict, n: int, qmap: QuasiMap, seed: int) -> list[DyadicGrid]:
    top = int(d.get("top_level", 0))
    bottom = int(d.get("bottom_level", 6))
    lo = tuple(d.get("root_lo", [0] * n))
    hi = tuple(d.get("root_hi", list(lo)))
    if "origin_shifts" in d:
        out = []
        for sh in d["origin_shifts"]:
            if len(sh) != n:
                raise ConfigError("grid.origin_shifts: each shift needs n coordinates")
            out.append(DyadicGrid(n, tuple(float(v) for v in sh), top, bottom, lo, hi, qmap))
        return out
    return grid_family(n, top, bottom, lo, hi, qmap, int(d.get("random_shifts", 0)), seed)


def _field(name, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def parse_config(raw: dict, seed: int | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "n" not in raw:
        raise ConfigError("n: missing")
    n = _field("n", lambda: int(raw["n"]))
    alpha = _field("alpha", lambda: float(raw.get("alpha", 0.0)))
    if not 0 <= alpha < n:
        raise ConfigError("alpha: must lie in [0, n)")
    seed = int(raw.get("seed", 0)) if seed is None else int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed: must be an unsigned 64-bit integer")
    qmap = _field("quasimap", lambda: QuasiMap.from_json(raw.get("quasimap")))
    params = _field("params", lambda: GoodnessParams.defaults(n, alpha, **raw.get("params", {})))
    grids = _field("grid", lambda: _grids(raw.get("grid", {}), n, qmap, seed))
    kd = dict(raw.get("kernel", {}))
    kernel = _field("kernel", lambda: KernelSpec(n=n, alpha=alpha, **kd))
    sigma = omega = None
    if "sigma" in raw or "omega" in raw:
        sigma = _field("sigma", lambda: AtomicMeasure.from_literal(raw.get("sigma", []), n))
        omega = _field("omega", lambda: AtomicMeasure.from_literal(raw.get("omega", []), n))
        for name, mu in (("sigma", sigma), ("omega", omega)):
            if len(mu) and mu.n != n:
                raise ConfigError(f"{name}: atoms must have {n} coordinates")
    suite = dict(SUITE_DEFAULTS)
    unknown = set(raw.get("suite", {})) - set(SUITE_DEFAULTS)
    if unknown:
        raise ConfigError(f"suite: unknown keys {sorted(unknown)}")
    suite.update(raw.get("suite", {}))
    echo = {
        "n": n,
        "alpha": alpha,
        "seed": seed,
        "params": {"r": params.r, "eps": params.eps, "tau": params.tau, "rho": params.rho,
                   "gamma": params.gamma},
        "grids": [g.to_json() for g in grids],
        "kernel": kernel.to_json(),
        "suite": suite,
    }
    if sigma is not None:
        echo["sigma"] = sigma.to_literal()
        echo["omega"] = omega.to_literal()
    if "generator" in raw:
        echo["generator"] = raw["generator"]
    return ExperimentConfig(n, alpha, grids, sigma, omega, params, kernel, seed,
                            dict(raw.get("generator", {})), suite, echo)


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p}: no such config file")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(raw, seed)
