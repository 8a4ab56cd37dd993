"""The five CLI commands as functions from a config to a report."""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .. import corona as C
from .. import energy as E
from ..checks import Check
from ..geometry import cube_json, points_in_dilate
from ..haar import HaarSystem
from ..measures import GridMeasure
from ..muckenhoupt import ConstantWitness, CubeFamily, all_constants
from ..operator import (mono_ratio, necessity_ratios, op_norm, pivotal_ratio, resolve,
                        testing_constant, truncation_sweep, wbp_constant)
from . import suites as S
from .config import ExperimentConfig, instance_seed
from .report import Report

COMMANDS = ("constants", "verify", "necessity", "corona", "sizelemma")
TABLE_ROWS = 32


def committed_C_nec() -> float:
    raw = resources.files("twoweight.data").joinpath("calibration.json").read_text()
    return float(json.loads(raw)["C_nec"])


def _C_nec(cfg: ExperimentConfig) -> float:
    v = cfg.suite.get("C_nec")
    return committed_C_nec() if v is None else float(v)


def _slug(variant) -> str:
    return variant.label.replace("/", "_")


def _by_name(cws) -> dict:
    return {c.name: c for c in cws}


# ---------------------------------------------------------------------------
# constants


def instance_constants(cfg: ExperimentConfig):
    """ConstantWitness list and the exact-constant checks for the configured pair."""
    s, w = cfg.instance()
    n, a, p, grids = cfg.n, cfg.alpha, cfg.params, cfg.grids
    cws = list(all_constants(s, w, a, grids))
    for d in ("forward", "dual"):
        for var in (E.DEEP, E.PARTIAL, E.PLUGGED):
            cw = E.deep_energy(s, w, a, p, grids, var, d)
            cws.append(ConstantWitness(f"deep_energy_{_slug(var)}_{d}", cw.value, cw.witness, cw.family_spec))
        cw = E.refined_energy(s, w, a, p, grids, E.DEEP, d)
        cws.append(ConstantWitness(f"refined_energy_{d}", cw.value, cw.witness, cw.family_spec))
        cws.append(E.strong_energy(s, w, a, p, grids, d))
    checks = []
    byn = _by_name(cws)
    for d in ("forward", "dual"):
        en, pu = byn[f"energy_A2_{d}"], byn[f"punctured_A2_{d}"]
        ta, pl = byn[f"tailed_A2_{d}"], byn[f"plugged_energy_A2_{d}"]
        k = max(n, 3)
        checks.append(Check.leq(f"energy_A2_vs_punctured_{d}", en.value, k * pu.value, k, en.witness, 1e-12))
        checks.append(Check.leq(f"plugged_vs_tailed_plus_energy_{d}", pl.value, n * ta.value + en.value, n,
                                pl.witness))
        vals = [byn[f"deep_energy_{_slug(v)}_{d}"] for v in (E.DEEP, E.PARTIAL, E.PLUGGED)]
        checks.append(Check.leq(f"deep_energy_hole_chain_{d}_1", vals[0].value, vals[1].value, 1.0, vals[0].witness))
        checks.append(Check.leq(f"deep_energy_hole_chain_{d}_2", vals[1].value, vals[2].value, 1.0, vals[1].witness))
    if len(s) and len(w):
        spec = resolve(cfg.kernel, s, w)
        fam = CubeFamily(s, w, grids)
        N, iters = op_norm(s, w, spec)
        norm = ConstantWitness("operator_norm", N, {"kind": "matrix", "iterations": iters},
                               {"kernel": spec.to_json()})
        ops = [testing_constant(s, w, spec, "forward", fam=fam),
               testing_constant(s, w, spec, "dual", fam=fam),
               testing_constant(s, w, spec, "forward", True, fam=fam),
               wbp_constant(s, w, spec, float(cfg.suite["wbp_C"]), fam=fam)]
        cws.append(norm)
        cws.extend(ops)
        for cw in ops:
            checks.append(Check.leq(f"{cw.name}_le_norm", cw.value, N, 1.0, cw.witness, 1e-12))
    return cws, checks


def ratio_tables(cfg: ExperimentConfig) -> dict:
    """Monotonicity, pivotal and necessity ratios on the configured pair."""
    s, w = cfg.instance()
    if not (len(s) and len(w)):
        return {"mono": [], "pivotal": [], "necessity": []}
    g = cfg.grids[0]
    spec = resolve(cfg.kernel, s, w)
    H = HaarSystem(GridMeasure(g, w))
    srel = g.rel_pre(s.points)
    mono, piv = [], []
    for J in H.gm.all_occupied():
        if len(mono) >= TABLE_ROWS:
            break
        far = ~points_in_dilate(g, J, 2.0, srel)
        if not far.any():
            continue
        mu = s.restrict(far)
        r = mono_ratio(g, J, w, mu, spec, haar=H)
        mono.append({"cube": cube_json(J), "lhs": r.lhs, "poisson_terms": r.phi, "ratio": r.ratio})
        if J in H.bases:
            psi = H.function_values(J)[0]
            piv.append({"cube": cube_json(J), "ratio": pivotal_ratio(g, J, psi, w, mu, spec)})
    nec = necessity_ratios(s, w, spec, cfg.grids)
    return {"mono": mono, "pivotal": piv, "necessity": [nec],
            "truncation_sweep": truncation_sweep(s, w, spec)["rows"]}


def run_constants(cfg: ExperimentConfig, threads: int = 1) -> Report:
    cws, checks = instance_constants(cfg)
    rep = Report("constants", cfg.echo, cws, [], ratio_tables(cfg))
    rep.add_checks(checks, "instance")
    return rep


# ---------------------------------------------------------------------------
# verify and necessity


def _suite_count(cfg, default):
    v = cfg.suite.get("instances")
    return default if v is None else int(v)


def run_verify(cfg: ExperimentConfig, threads: int = 1) -> Report:
    cws, checks = instance_constants(cfg)
    rep = Report("verify", cfg.echo, cws, [], {})
    rep.add_checks(checks, "instance")
    results = S.all_suites(cfg.seed, _C_nec(cfg), threads, count=cfg.suite.get("instances"))
    for r in results:
        rep.add_checks(r.checks, r.name)
        rep.tables[r.name] = r.info
    rep.extra["suite_seconds"] = {r.name: r.seconds for r in results}
    return rep


def run_necessity(cfg: ExperimentConfig, threads: int = 1) -> Report:
    C_nec = _C_nec(cfg)
    count = _suite_count(cfg, 50)
    res = S.necessity_suite(cfg.seed, C_nec, count, threads)
    rep = Report("necessity", cfg.echo, [], [], {})
    rep.add_checks(res.checks, res.name)
    rows = S.necessity_ratios_suite(cfg.seed, count, threads)
    rep.tables["necessity_offset"] = rows["offset"]
    rep.tables["necessity_punctured"] = rows["punctured"]
    s, w = cfg.instance()
    if len(s) and len(w):
        rep.tables["necessity_instance"] = [necessity_ratios(s, w, resolve(cfg.kernel, s, w), cfg.grids)]
    rep.extra["C_nec"] = C_nec
    return rep


# ---------------------------------------------------------------------------
# coronas and the size lemma


def _tops(gs: GridMeasure) -> list:
    return list(gs.occupied(gs.grid.top_level))


def instance_function(cfg: ExperimentConfig, size: int) -> np.ndarray:
    rng = np.random.default_rng(instance_seed(cfg.seed, 1))
    return rng.lognormal(0.0, 1.0, size)


def run_corona(cfg: ExperimentConfig, threads: int = 1) -> Report:
    s, w = cfg.instance()
    g = cfg.grids[0]
    ctx = E.EnergyContext(g, s, w, cfg.alpha, cfg.params)
    gs = ctx.gs
    f = instance_function(cfg, len(s))
    H = HaarSystem(gs)
    cz_C = float(cfg.suite["cz_C"])
    rep = Report("corona", cfg.echo, [], [], {})
    trees = []
    for top in _tops(gs):
        tag = "_".join(str(v) for v in top.index)
        cz = C.cz_stopping(f, gs, top, cz_C)
        rep.add_checks(cz.validate(gs, f), f"cz_{tag}")
        it = C.iterated_cz(f, H, cz, cz_C)
        rep.add_checks(it.validate(gs, f), f"iterated_{tag}")
        en = C.energy_corona(ctx, top, start=float(cfg.suite["energy_start"]))
        rep.add_checks(en.validate(gs), f"energy_{tag}")
        rep.add_checks([en.carleson_check(gs, 2.0)], f"energy_{tag}")
        trees.append({"top": cube_json(top), "calderon_zygmund": cz.to_json(),
                      "iterated": it.to_json(), "energy": en.to_json()})
    rep.extra["trees"] = trees
    rep.extra["function"] = f
    return rep


def run_sizelemma(cfg: ExperimentConfig, threads: int = 1) -> Report:
    s, w = cfg.instance()
    g = cfg.grids[0]
    ctx = E.EnergyContext(g, s, w, cfg.alpha, cfg.params)
    rng = np.random.default_rng(instance_seed(cfg.seed, 2))
    rep = Report("sizelemma", cfg.echo, [], [], {})
    eps = [float(e) for e in cfg.suite["eps_split"]]
    P, tree, checks, info = S.size_pipeline(ctx, eps, rng, int(cfg.suite["rounds"]),
                                            start=float(cfg.suite["energy_start"]))
    rep.add_checks(checks, "size")
    splits = {}
    for e in eps:
        if P.pairs:
            splits[str(e)] = C.bottom_up_split(ctx, P, e).to_json()
    rep.tables["size"] = info
    rep.extra["pairs"] = P.to_json()
    rep.extra["splits"] = splits
    rep.extra["energy_tree"] = tree.to_json()
    return rep


RUNNERS = {"constants": run_constants, "verify": run_verify, "necessity": run_necessity,
           "corona": run_corona, "sizelemma": run_sizelemma}


def run(command: str, cfg: ExperimentConfig, threads: int = 1) -> Report:
    if command not in RUNNERS:
        raise ValueError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    return RUNNERS[command](cfg, threads)
