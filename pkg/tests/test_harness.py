import json
import subprocess
import sys
from importlib import resources

import pytest

from twoweight.harness.cli import main
from twoweight.harness.config import ConfigError, load_config, parse_config

MINIMAL = {"n": 1, "alpha": 0.0, "sigma": [{"point": [0.2], "mass": 1.0}],
           "omega": [{"point": [0.7], "mass": 2.0}]}


def example_path():
    return resources.files("twoweight.data").joinpath("example_config.json")


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


class TestConfig:
    def test_defaults(self):
        cfg = parse_config(MINIMAL)
        p = cfg.params
        assert (p.r, p.eps, p.tau, p.rho, p.gamma) == (4, 0.25, 5, 10, 2.0)
        assert cfg.seed == 0

    def test_tau_not_above_r(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL | {"params": {"r": 4, "tau": 4}})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_parse_error_position(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"n": 1,\n "alpha": }')
        with pytest.raises(ConfigError, match="line 2"):
            load_config(p)

    def test_unknown_suite_key(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL | {"suite": {"nope": 1}})

    def test_seed_override(self):
        assert parse_config(MINIMAL | {"seed": 5}, seed=9).seed == 9

    def test_generated_pair_is_seeded(self):
        raw = {"n": 2, "alpha": 0.5, "generator": {"sigma": {"count": 5}, "omega": {"count": 7}}}
        a, b = parse_config(raw, 3).instance(), parse_config(raw, 3).instance()
        assert a[0].to_literal() == b[0].to_literal() and len(b[1]) == 7


class TestCli:
    def test_golden_report(self, tmp_path):
        out = tmp_path / "constants.json"
        assert main(["constants", "--config", str(example_path()), "--out", str(out)]) == 0
        golden = resources.files("twoweight.data").joinpath("golden_constants.json").read_bytes()
        assert out.read_bytes() == golden

    def test_same_seed_same_bytes(self, tmp_path):
        outs = []
        for k in range(2):
            out = tmp_path / f"run{k}.json"
            assert main(["sizelemma", "--config", str(example_path()), "--out", str(out), "--seed", "7"]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_schema_and_tables(self, tmp_path):
        out = tmp_path / "c.json"
        main(["constants", "--config", str(example_path()), "--out", str(out)])
        rep = json.loads(out.read_text())
        assert rep["schema_version"] == "1.0" and rep["summary"]["pass"]
        assert "timing" not in rep
        csvs = sorted(p.name for p in tmp_path.glob("c.*.csv"))
        assert csvs and all(p.startswith("c.") for p in csvs)

    def test_timing_flag(self, tmp_path):
        out = tmp_path / "t.json"
        main(["corona", "--config", str(example_path()), "--out", str(out), "--timing"])
        assert "seconds" in json.loads(out.read_text())["timing"]

    def test_config_errors_exit_2(self, tmp_path):
        assert main(["constants", "--config", str(tmp_path / "none.json")]) == 2
        bad = write(tmp_path, MINIMAL | {"params": {"r": 4, "tau": 3}})
        assert main(["constants", "--config", str(bad)]) == 2

    def test_failed_check_exit_1(self, tmp_path):
        cfg = write(tmp_path, MINIMAL | {"suite": {"instances": 3, "C_nec": 1e-6}})
        assert main(["necessity", "--config", str(cfg), "--out", str(tmp_path / "n.json")]) == 1

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate", "--config", "x.json"])
        assert exc.value.code == 2

    def test_small_verify_passes(self, tmp_path):
        cfg = write(tmp_path, json.loads(example_path().read_text()) | {"suite": {"instances": 2}})
        out = tmp_path / "v.json"
        assert main(["verify", "--config", str(cfg), "--out", str(out), "--threads", "2"]) == 0
        names = {c["name"].split("/")[0] for c in json.loads(out.read_text())["checks"]}
        assert names == {"instance", "haar_identities", "energy_A2_bounds", "greedy_split",
                         "energy_dp_and_chain", "geometry", "energy_corona", "size_lemma",
                         "necessity", "ratios_and_testing"}

    def test_console_script_module(self):
        r = subprocess.run([sys.executable, "-m", "twoweight.harness.cli", "--help"],
                           capture_output=True, text=True)
        assert r.returncode == 0 and "--config" in r.stdout
