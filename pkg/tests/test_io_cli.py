import json

import numpy as np
import pytest

from specmarket import Endogenous, Exogenous, Mixed, run
from specmarket.cli import main
from specmarket.errors import ConfigError, DataFormatError
from specmarket.io import (
    analyze_returns,
    config_hash,
    emit_config,
    load_empirical,
    parse_market_config,
    parse_sweep_spec,
    read_run_csv,
    write_run_artifact,
)

MINIMAL = """\
[market]
n_speculators = 64
use_param = 0.5
horizon = 500
seed = 3

[info]
mode = endogenous
memory_bits = 4
"""


def write(tmp_path, text, name="config.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParseConfig:
    def test_minimal_with_defaults(self, tmp_path):
        config = parse_market_config(write(tmp_path, MINIMAL))
        assert config.n_producers == 0
        assert config.producer_kind == "deterministic"
        assert config.epsilon == 1e-10
        assert config.record_agents is False
        assert config.info_mode == Endogenous(4)

    def test_out_of_range_names_field(self, tmp_path):
        bad = MINIMAL.replace("use_param = 0.5", "use_param = 1.5")
        with pytest.raises(ConfigError, match="use_param"):
            parse_market_config(write(tmp_path, bad))

    def test_unknown_key_rejected(self, tmp_path):
        bad = MINIMAL + "leverage = 10\n"
        with pytest.raises(ConfigError, match="leverage"):
            parse_market_config(write(tmp_path, bad))

    def test_unknown_section_rejected(self, tmp_path):
        bad = MINIMAL + "\n[plotting]\ncolor = red\n"
        with pytest.raises(ConfigError, match="plotting"):
            parse_market_config(write(tmp_path, bad))

    def test_exogenous_grammar(self, tmp_path):
        text = MINIMAL.replace("mode = endogenous\nmemory_bits = 4",
                               "mode = exogenous\ndistribution = exp\nstates = 8\nrate = 0.02")
        config = parse_market_config(write(tmp_path, text))
        assert isinstance(config.info_mode, Exogenous)
        assert config.info_mode.n_states == 8

    def test_explicit_weights(self, tmp_path):
        text = MINIMAL.replace("mode = endogenous\nmemory_bits = 4",
                               "mode = exogenous\nweights = 0.5, 0.25, 0.25")
        config = parse_market_config(write(tmp_path, text))
        assert config.info_mode.weights.tolist() == [0.5, 0.25, 0.25]

    def test_mixed_grammar(self, tmp_path):
        text = MINIMAL.replace(
            "mode = endogenous\nmemory_bits = 4",
            "mode = mixed\nendo_bits = 3\nexo_bits = 2\nexo_distribution = uniform\nexo_states = 4",
        )
        config = parse_market_config(write(tmp_path, text))
        assert config.info_mode == Mixed(3, 2, np.full(4, 0.25))

    def test_round_trip(self, tmp_path):
        for body in (
            MINIMAL,
            MINIMAL.replace("mode = endogenous\nmemory_bits = 4",
                            "mode = exogenous\ndistribution = exp\nstates = 16\nrate = 0.1"),
        ):
            config = parse_market_config(write(tmp_path, body))
            echoed = write(tmp_path, emit_config(config), "echo.ini")
            assert parse_market_config(echoed) == config

    def test_sweep_spec(self, tmp_path):
        text = MINIMAL + (
            "\n[sweep]\naxes = alpha, use_param\nalpha = 0.5, 1\n"
            "use_param = 0.1, 0.3\nrepetitions = 2\nmetrics = variance, kurtosis\n"
        )
        spec = parse_sweep_spec(write(tmp_path, text))
        assert [a.name for a in spec.axes] == ["alpha", "use_param"]
        assert spec.axes[0].values == (0.5, 1.0)
        assert spec.repetitions == 2
        assert spec.metrics == ("variance", "kurtosis")


class TestArtifacts:
    def test_run_csv_round_trip(self, tmp_path, make_config):
        config = make_config(horizon=300)
        record = run(config)
        files = write_run_artifact(tmp_path / "out", config, record)
        data = read_run_csv(files["run"])
        np.testing.assert_array_equal(data["prices"], record.prices)
        np.testing.assert_array_equal(data["returns"], record.returns)
        np.testing.assert_array_equal(data["mus"], record.mus)
        np.testing.assert_array_equal(data["taus"], record.taus)
        assert data["config_hash"] == config_hash(config)

    def test_unknown_version_refused(self, tmp_path):
        path = tmp_path / "run.csv"
        path.write_text("# specmarket-format: 99\n# config-hash: x\nt,mu,tau,price,log_return\n")
        with pytest.raises(DataFormatError, match="version"):
            read_run_csv(path)

    def test_missing_header_refused(self, tmp_path):
        path = tmp_path / "run.csv"
        path.write_text("t,mu,tau,price,log_return\n0,1,,1.0,\n")
        with pytest.raises(DataFormatError, match="header"):
            read_run_csv(path)


class TestEmpirical:
    def test_loads_with_header_tolerance(self, tmp_path):
        path = write(tmp_path, "Date Close\n2020-01-01 10.0\n2020-01-02 11.0\n2020-01-03 9.5\n", "px.txt")
        series = load_empirical(path)
        assert len(series.closes) == 3
        returns = series.log_returns()
        assert returns[0] == pytest.approx(np.log10(1.1))

    def test_date_formats(self, tmp_path):
        path = write(tmp_path, "19000102 68.13\n19000103 68.5\n", "px.txt")
        assert len(load_empirical(path).closes) == 2

    def test_non_monotone_dates_with_row(self, tmp_path):
        path = write(tmp_path, "2020-01-02 10\n2020-01-01 11\n", "px.txt")
        with pytest.raises(DataFormatError, match="row 2"):
            load_empirical(path)

    def test_nonpositive_price_with_row(self, tmp_path):
        path = write(tmp_path, "2020-01-01 10\n2020-01-02 0\n", "px.txt")
        with pytest.raises(DataFormatError, match="row 2"):
            load_empirical(path)

    def test_constant_prices_degenerate_downstream(self, tmp_path):
        from specmarket.errors import DegenerateInputError

        path = write(tmp_path, "2020-01-01 10\n2020-01-02 10\n2020-01-03 10\n", "px.txt")
        series = load_empirical(path)
        with pytest.raises(DegenerateInputError):
            analyze_returns(series.log_returns())

    def test_geometric_random_walk_is_gaussian(self, tmp_path):
        rng = np.random.default_rng(5)
        closes = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.01, size=30_000)))
        import datetime

        day = datetime.date(2000, 1, 1)
        lines = []
        for close in closes:
            lines.append(f"{day.isoformat()} {float(close)!r}")
            day += datetime.timedelta(days=1)
        path = write(tmp_path, "\n".join(lines) + "\n", "walk.txt")
        analysis = analyze_returns(load_empirical(path).log_returns())
        assert analysis.kurtosis == pytest.approx(3.0, abs=0.2)
        # no power-law tail accepted: poor KS fit on a thin tail
        assert analysis.tail.ks_distance > 0.01
        assert analysis.tail.n_tail < 0.05 * analysis.n


class TestCli:
    def write_config(self, tmp_path, horizon=4000):
        return write(tmp_path, MINIMAL.replace("memory_bits = 4", "memory_bits = 6")
                     .replace("n_speculators = 64", "n_speculators = 256")
                     .replace("horizon = 500", f"horizon = {horizon}"))

    def test_simulate_deterministic_bytes(self, tmp_path):
        config = self.write_config(tmp_path)
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "a")]) == 0
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "b")]) == 0
        for name in ("run.csv", "summary.json", "ccdf.csv", "autocorr.csv", "config.ini"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_simulate_from_echoed_config_reproduces(self, tmp_path):
        config = self.write_config(tmp_path)
        main(["simulate", "--config", str(config), "--out", str(tmp_path / "a")])
        echoed = tmp_path / "a" / "config.ini"
        assert main(["simulate", "--config", str(echoed), "--out", str(tmp_path / "re")]) == 0
        for name in ("run.csv", "summary.json"):
            assert (tmp_path / "re" / name).read_bytes() == (tmp_path / "a" / name).read_bytes()

    def test_seed_override_changes_output(self, tmp_path):
        config = self.write_config(tmp_path)
        main(["simulate", "--config", str(config), "--out", str(tmp_path / "a")])
        main(["simulate", "--config", str(config), "--seed", "1234", "--out", str(tmp_path / "c")])
        assert (tmp_path / "a" / "run.csv").read_bytes() != (tmp_path / "c" / "run.csv").read_bytes()

    def test_stats_matches_simulate(self, tmp_path):
        config = self.write_config(tmp_path)
        main(["simulate", "--config", str(config), "--out", str(tmp_path / "a")])
        assert main(["stats", "--input", str(tmp_path / "a" / "run.csv"),
                     "--out", str(tmp_path / "s")]) == 0
        simulated = json.loads((tmp_path / "a" / "summary.json").read_text())
        recomputed = json.loads((tmp_path / "s" / "summary.json").read_text())
        assert recomputed["analysis"] == simulated["analysis"]
        assert recomputed["variance"] == simulated["variance"]
        assert recomputed["reduction"] == simulated["reduction"]
        assert (tmp_path / "s" / "ccdf.csv").read_bytes() == (tmp_path / "a" / "ccdf.csv").read_bytes()

    def test_sweep_csv(self, tmp_path):
        config_text = MINIMAL + "\n[sweep]\naxes = alpha\nalpha = 0.25, 0.5\nrepetitions = 2\n"
        config = write(tmp_path, config_text, "sweep.ini")
        assert main(["sweep", "--config", str(config), "--out", str(tmp_path / "g")]) == 0
        lines = (tmp_path / "g" / "grid.csv").read_text().splitlines()
        assert lines[2] == "alpha,metric,value,n_runs"
        assert len(lines) == 3 + 2 * 3  # two nodes x three default metrics

    def test_sweep_json_format(self, tmp_path):
        config_text = MINIMAL + "\n[sweep]\naxes = alpha\nalpha = 0.25\nrepetitions = 2\n"
        config = write(tmp_path, config_text, "sweep.ini")
        assert main(["sweep", "--config", str(config), "--out", str(tmp_path / "g"),
                     "--format", "json"]) == 0
        payload = json.loads((tmp_path / "g" / "grid.json").read_text())
        assert payload["format"] == 1
        assert len(payload["grid"]) == 3
        assert payload["failures"] == []

    def test_bounds_json_format(self, tmp_path):
        assert main(["bounds", "--states", "64", "--alphas", "0.5,2", "--out",
                     str(tmp_path / "b"), "--format", "json"]) == 0
        payload = json.loads((tmp_path / "b" / "bounds.json").read_text())
        assert [b["alpha"] for b in payload["bounds"]] == [0.5, 2.0]

    def test_bounds_ordering(self, tmp_path):
        assert main(["bounds", "--states", "512",
                     "--alphas", "0.03125,0.0625,0.125,0.25,0.5,1,2,4,8",
                     "--out", str(tmp_path / "bounds")]) == 0
        rows = (tmp_path / "bounds" / "bounds.csv").read_text().splitlines()[3:]
        for row in rows:
            _, _, lower, heuristic, upper = row.split(",")
            assert float(lower) <= float(heuristic) + 1e-18 <= float(upper) + 2e-18

    def test_compare(self, tmp_path):
        rng = np.random.default_rng(6)
        closes = 50.0 * np.exp(np.cumsum(rng.normal(0, 0.01, size=400)))
        import datetime

        day = datetime.date(1990, 1, 1)
        rows = []
        for close in closes:
            rows.append(f"{day.isoformat()},{float(close)!r}")
            day += datetime.timedelta(days=1)
        empirical = write(tmp_path, "\n".join(rows) + "\n", "emp.csv")
        config = self.write_config(tmp_path)
        assert main(["compare", "--config", str(config), "--empirical", str(empirical),
                     "--out", str(tmp_path / "cmp")]) == 0
        lines = (tmp_path / "cmp" / "compare_ccdf.csv").read_text().splitlines()
        assert lines[2] == "ccdf,model_x,empirical_x"
        assert len(lines) == 3 + 399  # one aligned row per compared return
        summary = json.loads((tmp_path / "cmp" / "compare_summary.json").read_text())
        assert summary["n_compared"] == 399

    def test_compare_model_too_short(self, tmp_path, capsys):
        import datetime

        day = datetime.date(1990, 1, 1)
        rows = []
        for i in range(3000):
            rows.append(f"{day.isoformat()},{100 + (i % 7)}")
            day += datetime.timedelta(days=1)
        empirical = write(tmp_path, "\n".join(rows) + "\n", "emp.csv")
        config = self.write_config(tmp_path, horizon=500)
        code = main(["compare", "--config", str(config), "--empirical", str(empirical),
                     "--out", str(tmp_path / "cmp")])
        assert code == 1
        assert "horizon" in capsys.readouterr().err

    def test_missing_input_is_error_exit(self, tmp_path, capsys):
        code = main(["stats", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_flag_usage_exit(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--config"])
        assert exc.value.code == 2
