"""Acceptance criteria, one test and one summary line each.

Criteria 1 to 10 are read from a single full ``twoweight verify`` run on the
bundled example (default seed), so the timing in criterion 11 covers the same
work.  Criterion 1 additionally reruns the Haar suite on its own for timing.
"""
import json
import math
import subprocess
import sys
import time
from importlib import resources

import pytest

from twoweight.harness import suites as S

EXAMPLE = resources.files("twoweight.data").joinpath("example_config.json")
GOLDEN = resources.files("twoweight.data").joinpath("golden_constants.json")


@pytest.fixture(scope="module")
def verify(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify") / "verify.json"
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "twoweight.harness.cli", "verify", "--config", str(EXAMPLE),
                           "--out", str(out), "--timing"], capture_output=True, text=True)
    seconds = time.perf_counter() - t0
    report = json.loads(out.read_text())
    return report, seconds, proc.returncode


def group(report, suite, *names):
    checks = [c for c in report["checks"] if c["name"].startswith(suite + "/")]
    if names:
        checks = [c for c in checks if any(c["name"].split("/", 1)[1].startswith(n) for n in names)]
    return checks


def record(log, num, title, ok, detail):
    log.append(f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    assert ok, detail


def worst(checks):
    return ", ".join(f"{c['name'].split('/', 1)[1]} {c['lhs']:.3g} vs {c['rhs']:.3g}" for c in checks)


def test_01_haar_identities(acceptance_log):
    t0 = time.perf_counter()
    res = S.haar_suite(0, 200)
    secs = time.perf_counter() - t0
    tol = all(c.rhs == 1e-9 for c in res.checks)
    names = {c.name for c in res.checks}
    ok = res.passed and tol and secs < 10 and names == {
        "gram_residual", "parseval_residual", "telescoping_residual", "energy_identity_residual"}
    detail = ", ".join(f"{c.name} {c.lhs:.2e}" for c in res.checks) + f"; {secs:.2f} s for 200 instances"
    record(acceptance_log, 1, "Haar residuals < 1e-9 in < 10 s", ok, detail)


def test_02_energy_A2_vs_punctured(verify, acceptance_log):
    cs = group(verify[0], "energy_A2_bounds", "energy_A2_vs_punctured")
    ok = len(cs) == 2 and all(c["pass"] for c in cs)
    record(acceptance_log, 2, "energy A2 <= max(n,3) punctured A2, both directions", ok, worst(cs))


def test_03_plugged_energy(verify, acceptance_log):
    cs = group(verify[0], "energy_A2_bounds", "plugged_vs_tailed_plus_energy")
    ok = len(cs) == 2 and all(c["pass"] for c in cs)
    record(acceptance_log, 3, "plugged energy A2 <= n tailed + energy A2", ok, worst(cs))


def test_04_greedy_split(verify, acceptance_log):
    cs = group(verify[0], "greedy_split")
    ok = len(cs) == 3 and all(c["pass"] for c in cs)
    record(acceptance_log, 4, "greedy split keeps half and separates supports", ok, worst(cs))


def test_05_energy_chain_and_dp(verify, acceptance_log):
    cs = group(verify[0], "energy_dp_and_chain")
    ok = len(cs) == 5 and all(c["pass"] for c in cs)
    dp = [c for c in cs if c["name"].endswith("dp_equals_brute_force")][0]
    record(acceptance_log, 5, "hole chain and DP equals exhaustive partition", ok,
           f"max |dp - brute| = {dp['lhs']:.3g}")


def test_06_geometry(verify, acceptance_log):
    rep = verify[0]
    cs = group(rep, "geometry")
    info = rep["tables"]["geometry"]
    main = info["better_good_r4_eps0.3_tau5_n1"]
    ok = (len(cs) == 3 and all(c["pass"] for c in cs) and main["counterexamples"] == []
          and math.isclose(main["delta"], 0.2 / 9, rel_tol=1e-12))
    over = max(info["overlap"], key=lambda r: r["count"] / r["beta"])
    record(acceptance_log, 6, "dilates contained, overlap <= beta, better-good exhaustive", ok,
           f"delta {main['delta']:.4f}, {main['checked']} cubes checked, 0 counterexamples; "
           f"overlap {over['count']} <= beta {over['beta']:.1f}")


def test_07_energy_corona_carleson(verify, acceptance_log):
    cs = group(verify[0], "energy_corona")
    carl = [c for c in cs if "carleson" in c["name"]]
    ok = bool(carl) and all(c["pass"] for c in cs)
    record(acceptance_log, 7, "energy corona Carleson sums <= 2", ok, worst(carl))


def test_08_size_lemma(verify, acceptance_log):
    cs = group(verify[0], "size_lemma")
    small = [c for c in cs if "small_size" in c["name"] or "pair_conservation" in c["name"]]
    ok = len(small) == 4 and all(c["pass"] for c in cs)
    record(acceptance_log, 8, "size lemma conservation and smallness for eps 0.1, 0.5", ok, worst(small))


def test_09_necessity(verify, acceptance_log):
    cs = group(verify[0], "necessity")
    ok = len(cs) == 3 and all(c["pass"] for c in cs)
    record(acceptance_log, 9, "sqrt A2 against the operator norm with committed C_nec", ok, worst(cs))


def test_10_ratios_and_testing(verify, acceptance_log):
    cs = group(verify[0], "ratios_and_testing")
    ok = len(cs) == 6 and all(c["pass"] for c in cs)
    record(acceptance_log, 10, "ratio doubling invariance and testing, wbp <= norm", ok, worst(cs[:2]))


def test_11_cli_golden_and_runtime(verify, acceptance_log, tmp_path):
    out = tmp_path / "constants.json"
    proc = subprocess.run([sys.executable, "-m", "twoweight.harness.cli", "constants", "--config", str(EXAMPLE),
                           "--out", str(out)], capture_output=True, text=True)
    same = proc.returncode == 0 and out.read_bytes() == GOLDEN.read_bytes()
    report, seconds, code = verify
    ok = same and code == 0 and report["summary"]["pass"] and seconds < 300
    record(acceptance_log, 11, "golden constants report and full verify < 5 min", ok,
           f"golden {'identical' if same else 'DIFFERS'}; verify {report['summary']['checks']} checks, "
           f"exit {code}, {seconds:.1f} s")
