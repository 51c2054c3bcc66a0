import csv
import json

import pytest

from covert_ncs.cli import main
from covert_ncs.config import ConfigError, ExperimentConfig

FAST = """
identify.loss_rates = [0.0, 0.2]
identify.runs_per_rate = 2
bsa.population_size = 20
bsa.controller_iterations = 40
bsa.plant_iterations = 40
experiment.seed = 11
"""


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "fast.toml"
    path.write_text(FAST)
    return path


def read_json(path):
    return json.loads(path.read_text())


class TestConfig:
    def test_defaults_match_canonical_experiment(self):
        cfg = ExperimentConfig()
        assert cfg.loss_rates == [0.0, 0.05, 0.1, 0.2]
        assert cfg.runs_per_rate == 100
        assert (cfg.population_size, cfg.controller_iterations, cfg.plant_iterations) == (100, 600, 800)
        assert (cfg.low, cfg.high, cfg.capture_duration, cfg.sample_rate) == (-10.0, 10.0, 2.0, 50.0)
        assert (cfg.overshoot_pct, cfg.ess_pct, cfg.eta) == (50.0, -10.0, 1.0)

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("bsa.popsize = 3\n")
        with pytest.raises(ConfigError, match="bsa.popsize"):
            ExperimentConfig.load(p)

    def test_nested_tables_equal_dotted(self, tmp_path):
        p = tmp_path / "nested.toml"
        p.write_text("[bsa]\neta = 0.5\n")
        assert ExperimentConfig.load(p).eta == 0.5

    def test_dump_load_roundtrip(self, tmp_path):
        cfg = ExperimentConfig(runs_per_rate=7, loss_rates=[0.1])
        cfg.dump(tmp_path / "c.toml")
        assert ExperimentConfig.load(tmp_path / "c.toml").to_flat() == cfg.to_flat()

    def test_invalid_value(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(population_size=2)


class TestSimulate:
    def test_no_attack(self, tmp_path, capsys):
        assert main(["simulate", "--out", str(tmp_path)]) == 0
        doc = read_json(tmp_path / "metrics.json")
        assert doc["metrics"]["final_value"] == pytest.approx(1.0, abs=1e-3)
        with open(tmp_path / "trace.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1000
        assert rows[0].keys() == {"k", "t", "r", "u", "u_prime", "y", "lost_fwd", "lost_fb"}

    def test_gain_attack(self, tmp_path):
        assert main(["simulate", "--gain", "4.0451", "--out", str(tmp_path)]) == 0
        assert read_json(tmp_path / "metrics.json")["metrics"]["overshoot_pct"] == pytest.approx(48.9, abs=1.0)

    def test_ess_attack(self, tmp_path):
        assert main(["simulate", "--ess-gain", "5.7471", "--out", str(tmp_path)]) == 0
        err = read_json(tmp_path / "metrics.json")["metrics"]["steady_state_error_pct"]
        assert err == pytest.approx(-10.0, abs=0.2)

    def test_divergent_attack_exit_1(self, tmp_path, capsys):
        assert main(["simulate", "--gain", "50", "--out", str(tmp_path)]) == 1
        assert "diverged" in capsys.readouterr().err

    def test_invalid_config_exit_2(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("this is = = not toml")
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 2

    def test_unknown_flag_exit_2(self):
        with pytest.raises(SystemExit) as info:
            main(["simulate", "--bogus"])
        assert info.value.code == 2


class TestIdentifyAttack:
    def test_identify_then_attack(self, tmp_path, fast_config):
        out = tmp_path / "run"
        assert main(["identify", "--config", str(fast_config), "--out", str(out)]) == 0
        doc = read_json(out / "identification.json")
        assert [r["loss_rate"] for r in doc["rates"]] == [0.0, 0.2]
        assert doc["rates"][0]["statistics"]["c1"]["ci_half_width"] is not None
        hist = (out / "histograms" / "error_plant_loss0.2.csv").read_text().splitlines()
        assert hist[0] == "bin_low,bin_high,count" and len(hist) == 51

        assert main(["attack", "--config", str(fast_config), "--report", str(out / "identification.json"),
                     "--out", str(out)]) == 0
        table = read_json(out / "attacks.json")
        assert len(table["rates"]) == 2
        for row in table["rates"]:
            for kind in ("overshoot", "steady_state_error"):
                cell = row[kind]
                assert (cell["plan"] is None) != (cell["error"] is None)

    def test_missing_report_exit_2(self, tmp_path):
        assert main(["attack", "--report", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2

    def test_loss_rate_override(self, tmp_path, fast_config):
        out = tmp_path / "o"
        assert main(["identify", "--config", str(fast_config), "--loss-rates", "0.1", "--runs", "3",
                     "--out", str(out)]) == 0
        doc = read_json(out / "identification.json")
        assert [r["loss_rate"] for r in doc["rates"]] == [0.1]
        assert doc["rates"][0]["runs"] == 3


class TestPipeline:
    PAYLOADS = ["identification.json", "attacks.json", "baseline/trace.csv", "baseline/metrics.json"]

    def test_deterministic_bundle(self, tmp_path, fast_config):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["pipeline", "--config", str(fast_config), "--out", str(out)]) == 0
        for name in self.PAYLOADS:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
        manifest = read_json(a / "manifest.json")
        assert manifest["seed"] == 11
        assert len(manifest["config_sha256"]) == 64
        assert manifest["config_sha256"] == read_json(b / "manifest.json")["config_sha256"]

    def test_seed_changes_results(self, tmp_path, fast_config):
        main(["pipeline", "--config", str(fast_config), "--out", str(tmp_path / "a")])
        main(["pipeline", "--config", str(fast_config), "--seed", "12", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a/identification.json").read_bytes() != (tmp_path / "b/identification.json").read_bytes()

    def test_single_run_reports_nulls(self, tmp_path, fast_config):
        out = tmp_path / "one"
        assert main(["pipeline", "--config", str(fast_config), "--runs", "1", "--out", str(out)]) == 0
        stats = read_json(out / "identification.json")["rates"][0]["statistics"]["g1"]
        assert stats["std"] is None and stats["ci_half_width"] is None and stats["mean"] is not None
