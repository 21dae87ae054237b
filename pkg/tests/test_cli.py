import math
import subprocess
import sys

import pytest

from avgproc import bipartite_exact, experiment_cli
from avgproc.errors import NumericalError


def run_rows(argv, tmp_path, name="out.csv"):
    path = tmp_path / name
    code = experiment_cli.main([*argv, "--output", str(path)])
    assert code == 0
    lines = path.read_text().split("\n")
    assert lines[0] == experiment_cli.HEADER
    assert lines[-1] == ""
    return [dict(zip(experiment_cli.FIELDS, ln.split(","))) for ln in lines[1:-1]]


class TestParsing:
    def test_grid_inclusive_integer_step(self):
        assert experiment_cli.parse_grid("-4:4:1") == [float(a) for a in range(-4, 5)]

    def test_grid_inclusive_fractional_step(self):
        grid = experiment_cli.parse_grid("-3:3:0.5")
        assert len(grid) == 13
        assert grid[0] == -3.0 and grid[-1] == pytest.approx(3.0, abs=1e-12)

    def test_grid_non_dividing_step_stops_inside(self):
        assert experiment_cli.parse_grid("0:1:0.3") == pytest.approx([0.0, 0.3, 0.6, 0.9])

    def test_grid_singleton(self):
        assert experiment_cli.parse_grid("2:2:1") == [2.0]

    @pytest.mark.parametrize("bad", ["1:2", "1:2:0", "1:2:-1", "3:1:1", "a:b:c"])
    def test_grid_rejects(self, bad):
        with pytest.raises(ValueError):
            experiment_cli.parse_grid(bad)

    def test_floats_comma_list(self):
        assert experiment_cli.parse_floats("0.5,1,2") == [0.5, 1.0, 2.0]
        assert experiment_cli.parse_floats("1,,2") == [1.0, 2.0]

    def test_floats_grid_passthrough(self):
        assert experiment_cli.parse_floats("0:1:0.5") == [0.0, 0.5, 1.0]

    def test_ints(self):
        assert experiment_cli.parse_ints("8,12,16") == [8, 12, 16]

    def test_fmt_blank_and_roundtrip(self):
        assert experiment_cli._fmt(None) == ""
        assert experiment_cli._fmt(3) == "3"
        assert experiment_cli._fmt("exact_l2") == "exact_l2"
        x = 1.0 / 3.0
        assert float(experiment_cli._fmt(x)) == x
        with pytest.raises(TypeError):
            experiment_cli._fmt(True)

    def test_merge_negative_values(self):
        merge = experiment_cli._merge_negative_values
        assert merge(["--a-grid", "-4:4:1"]) == ["--a-grid=-4:4:1"]
        assert merge(["--t", "-.5"]) == ["--t=-.5"]
        assert merge(["--m", "5", "--n", "10"]) == ["--m", "5", "--n", "10"]
        assert merge(["--flag", "--other"]) == ["--flag", "--other"]


class TestRowShapes:
    def test_exact_bipartite_nine_rows(self, tmp_path):
        rows = run_rows(
            ["exact-bipartite", "--m", "1", "--n", "10", "--a-grid", "-4:4:1"],
            tmp_path,
        )
        assert len(rows) == 9
        assert [float(r["a"]) for r in rows] == [float(a) for a in range(-4, 5)]
        for r in rows:
            assert r["experiment"] == "exact-bipartite"
            assert r["graph"] == "k_bipartite"
            assert (r["n"], r["m"], r["d"]) == ("10", "1", "")
            assert r["p"] == "2"
            assert r["statistic"] == "exact_l2"
            assert float(r["t"]) >= 0.0
            assert math.isfinite(float(r["value"]))
            assert r["stderr"] == "" and r["replicas"] == ""
            assert r["seed"] == "0"

    def test_exact_bipartite_value_roundtrip(self, tmp_path):
        rows = run_rows(
            ["exact-bipartite", "--m", "500", "--n", "1000", "--a-grid", "-4:4:1"],
            tmp_path,
        )
        assert len(rows) == 9
        theta = bipartite_exact.theta(500, 1000)
        for r in rows:
            t = (math.log(1000.0) + float(r["a"])) / (theta * 500)
            assert float(r["t"]) == t
            assert float(r["value"]) == bipartite_exact.exact_l2(500, 1000, "C2", t)

    def test_hypercube_exact_39_rows_with_clamp(self, tmp_path):
        rows = run_rows(
            ["hypercube-exact", "--d", "8,12,16", "--a-grid", "-3:3:0.5"],
            tmp_path,
        )
        assert len(rows) == 39
        assert {r["d"] for r in rows} == {"8", "12", "16"}
        first = rows[0]
        # d=8, a=-3 clamps the window time to 0, where the distance is 2^8 - 1
        assert first["d"] == "8" and float(first["a"]) == -3.0
        assert float(first["t"]) == 0.0
        assert float(first["value"]) == pytest.approx(255.0, rel=1e-12)
        for r in rows:
            assert int(r["n"]) == 1 << int(r["d"])
            assert r["statistic"] == "exact_l2"
            assert r["stderr"] == ""

    def test_hardy_fifty_rows_ratio_in_sandwich_band(self, tmp_path):
        rows = run_rows(["hardy", "--d", "100"], tmp_path)
        assert len(rows) == 50
        assert [int(r["m"]) for r in rows] == list(range(1, 51))
        for r in rows:
            assert r["statistic"] == "hardy_ratio"
            assert 0.25 - 1e-9 <= float(r["value"]) <= 1.0 + 1e-9
            assert r["stderr"] == ""

    def test_hardy_statistics_are_consistent(self, tmp_path):
        ratio = run_rows(["hardy", "--d", "40", "--m-max", "10"], tmp_path, "r.csv")
        cm = run_rows(
            ["hardy", "--d", "40", "--m-max", "10", "--statistic", "cm"],
            tmp_path,
            "c.csv",
        )
        lam = run_rows(
            ["hardy", "--d", "40", "--m-max", "10", "--statistic", "lambda"],
            tmp_path,
            "l.csv",
        )
        assert [r["statistic"] for r in cm] == ["hardy_cm"] * 10
        assert [r["statistic"] for r in lam] == ["lambda_p"] * 10
        for r, c, l in zip(ratio, cm, lam):
            assert float(r["value"]) == pytest.approx(
                float(c["value"]) * float(l["value"]), rel=1e-12
            )

    def test_entropy_two_rows_per_time(self, tmp_path):
        rows = run_rows(
            [
                "entropy", "--graph", "hypercube", "--d", "6",
                "--t", "0,0.5,1", "--replicas", "200", "--seed", "3",
            ],
            tmp_path,
        )
        assert len(rows) == 6
        means = [r for r in rows if r["statistic"] == "entropy_mean"]
        bounds = [r for r in rows if r["statistic"] == "entropy_bound"]
        assert len(means) == len(bounds) == 3
        for r in means:
            assert r["stderr"] != "" and r["replicas"] == "200"
        for r in bounds:
            assert r["stderr"] == "" and r["replicas"] == ""
        # at t=0 the MC mean equals the bound exactly (log 64 on both sides)
        assert float(means[0]["value"]) == float(bounds[0]["value"])
        assert float(bounds[0]["value"]) == pytest.approx(math.log(64), rel=1e-12)

    def test_ehrenfest_sandwich_rows(self, tmp_path):
        rows = run_rows(
            ["ehrenfest", "--d", "12", "--check", "sandwich", "--t", "0.5,1,2,4"],
            tmp_path,
        )
        assert len(rows) == 4
        for r in rows:
            assert r["statistic"] == "sandwich_pass"
            assert r["value"] == "1"
            assert r["graph"] == "hypercube" and r["d"] == "12"

    def test_simulate_row(self, tmp_path):
        rows = run_rows(
            [
                "simulate", "--graph", "k_bipartite", "--m", "10", "--n", "50",
                "--p", "1", "--t", "2.0", "--replicas", "400", "--seed", "7",
            ],
            tmp_path,
        )
        assert len(rows) == 1
        r = rows[0]
        assert r["experiment"] == "simulate" and r["statistic"] == "mean_lp"
        assert (r["graph"], r["n"], r["m"], r["p"]) == ("k_bipartite", "50", "10", "1")
        assert r["stderr"] != "" and r["replicas"] == "400" and r["seed"] == "7"

    def test_profile_sweep_bipartite_l2_pairs(self, tmp_path):
        rows = run_rows(
            [
                "profile-sweep", "--family", "bipartite-l2",
                "--m", "500", "--n", "1000", "--a-grid", "-2:2:1",
            ],
            tmp_path,
        )
        assert len(rows) == 10
        for meas, pred in zip(rows[0::2], rows[1::2]):
            assert meas["statistic"] == "profile_measured"
            assert pred["statistic"] == "profile_predicted"
            assert meas["t"] == pred["t"] and meas["a"] == pred["a"]
            # balanced case: amplitude 1 + D(1/2) = 1, so predicted = e^{-a}
            assert float(pred["value"]) == pytest.approx(
                math.exp(-float(pred["a"])), rel=1e-12
            )

    def test_profile_sweep_hypercube_measured_only(self, tmp_path):
        rows = run_rows(
            ["profile-sweep", "--family", "hypercube", "--d", "10", "--a-grid", "-1:1:1"],
            tmp_path,
        )
        assert [r["statistic"] for r in rows] == ["profile_measured"] * 3

    def test_profile_sweep_bipartite_l1_is_mc(self, tmp_path):
        rows = run_rows(
            [
                "profile-sweep", "--family", "bipartite-l1", "--m", "2", "--n", "8",
                "--a-grid", "0:1:1", "--replicas", "100", "--seed", "9",
            ],
            tmp_path,
        )
        assert len(rows) == 2
        for r in rows:
            assert r["statistic"] == "mean_lp" and r["p"] == "1"
            assert r["stderr"] != "" and r["replicas"] == "100"

    def test_stderr_iff_mc_statistic(self, tmp_path):
        mc_stats = {"mean_lp", "entropy_mean"}
        batches = [
            ["simulate", "--graph", "complete", "--n", "6", "--t", "0.5",
             "--replicas", "50", "--seed", "1"],
            ["exact-bipartite", "--m", "2", "--n", "8", "--a-grid", "0:1:1"],
            ["entropy", "--graph", "complete", "--n", "6", "--t", "0.5",
             "--replicas", "50", "--seed", "1"],
            ["hardy", "--d", "10", "--m-max", "3"],
        ]
        for i, argv in enumerate(batches):
            for r in run_rows(argv, tmp_path, f"b{i}.csv"):
                assert (r["stderr"] != "") == (r["statistic"] in mc_stats)


class TestDeterminism:
    def test_rerun_is_byte_identical(self, tmp_path):
        argv = [
            "simulate", "--graph", "k_bipartite", "--m", "10", "--n", "50",
            "--p", "1", "--t", "2.0", "--replicas", "400", "--seed", "7",
        ]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert experiment_cli.main([*argv, "--output", str(a)]) == 0
        assert experiment_cli.main([*argv, "--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_threads_do_not_change_output(self, tmp_path):
        base = [
            "simulate", "--graph", "hypercube", "--d", "5",
            "--t", "0.5,1.5", "--replicas", "300", "--seed", "11",
        ]
        one, four = tmp_path / "t1.csv", tmp_path / "t4.csv"
        assert experiment_cli.main([*base, "--threads", "1", "--output", str(one)]) == 0
        assert experiment_cli.main([*base, "--threads", "4", "--output", str(four)]) == 0
        assert one.read_bytes() == four.read_bytes()

    def test_lf_line_endings(self, tmp_path):
        path = tmp_path / "lf.csv"
        code = experiment_cli.main(
            ["hardy", "--d", "10", "--m-max", "2", "--output", str(path)]
        )
        assert code == 0
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")


class TestSeedResolution:
    ARGV = ["exact-bipartite", "--m", "1", "--n", "10", "--a-grid", "0:1:1"]

    def test_default_zero(self, tmp_path, monkeypatch):
        monkeypatch.delenv("AVGPROC_SEED", raising=False)
        rows = run_rows(self.ARGV, tmp_path)
        assert all(r["seed"] == "0" for r in rows)

    def test_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("AVGPROC_SEED", "123")
        rows = run_rows(self.ARGV, tmp_path)
        assert all(r["seed"] == "123" for r in rows)

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("AVGPROC_SEED", "123")
        rows = run_rows([*self.ARGV, "--seed", "7"], tmp_path)
        assert all(r["seed"] == "7" for r in rows)

    def test_config_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("AVGPROC_SEED", "123")
        cfg = tmp_path / "cfg"
        cfg.write_text("seed=55\n")
        rows = run_rows([*self.ARGV, "--config", str(cfg)], tmp_path)
        assert all(r["seed"] == "55" for r in rows)

    def test_negative_seed_rejected(self, capsys):
        assert experiment_cli.main([*self.ARGV, "--seed", "-1"]) == 2
        assert "seed" in capsys.readouterr().err

    @pytest.mark.parametrize("env", ["abc", "-5", str(2**64)])
    def test_bad_env_rejected(self, monkeypatch, capsys, env):
        monkeypatch.setenv("AVGPROC_SEED", env)
        assert experiment_cli.main(self.ARGV) == 2
        assert "AVGPROC_SEED" in capsys.readouterr().err


class TestConfigFile:
    def test_config_supplies_flags(self, tmp_path):
        cfg = tmp_path / "cfg"
        cfg.write_text("# bipartite window sweep\n\nm=1\nn=10\na-grid=-4:4:1\n")
        rows = run_rows(["exact-bipartite", "--config", str(cfg)], tmp_path)
        assert len(rows) == 9
        assert rows[0]["n"] == "10"

    def test_cli_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "cfg"
        cfg.write_text("m=1\nn=10\na-grid=0:1:1\n")
        rows = run_rows(
            ["exact-bipartite", "--n", "12", "--config", str(cfg)], tmp_path
        )
        assert rows[0]["n"] == "12"

    def test_unknown_key_exits_2_naming_it(self, tmp_path, capsys):
        cfg = tmp_path / "cfg"
        cfg.write_text("bogus=1\n")
        argv = ["hardy", "--d", "10", "--m-max", "2", "--config", str(cfg)]
        assert experiment_cli.main(argv) == 2
        assert "--bogus" in capsys.readouterr().err

    def test_nested_config_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg"
        cfg.write_text("config=other\n")
        assert experiment_cli.main(["hardy", "--d", "10", "--config", str(cfg)]) == 2
        assert "nest" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path, capsys):
        missing = tmp_path / "nope"
        assert experiment_cli.main(["hardy", "--d", "10", "--config", str(missing)]) == 2
        assert "config" in capsys.readouterr().err

    def test_malformed_line_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg"
        cfg.write_text("just some words\n")
        assert experiment_cli.main(["hardy", "--d", "10", "--config", str(cfg)]) == 2
        assert "key=value" in capsys.readouterr().err


class TestExitCodes:
    def test_invalid_sizes_exit_2(self, capsys):
        assert experiment_cli.main(
            ["exact-bipartite", "--m", "0", "--n", "10", "--a-grid", "0:1:1"]
        ) == 2
        assert experiment_cli.main(
            ["exact-bipartite", "--m", "6", "--n", "10", "--a-grid", "0:1:1"]
        ) == 2
        capsys.readouterr()

    def test_missing_required_graph_size_exits_2(self, capsys):
        assert experiment_cli.main(
            ["simulate", "--graph", "hypercube", "--t", "1.0"]
        ) == 2
        assert "--d" in capsys.readouterr().err

    def test_bad_x0_exits_2(self, capsys):
        assert experiment_cli.main(
            ["simulate", "--graph", "complete", "--n", "5", "--t", "1.0",
             "--x0", "9", "--replicas", "10"]
        ) == 2
        capsys.readouterr()

    def test_negative_time_exits_2(self, capsys):
        assert experiment_cli.main(
            ["simulate", "--graph", "complete", "--n", "5", "--t", "-1.0",
             "--replicas", "10"]
        ) == 2
        capsys.readouterr()

    def test_unknown_subcommand_exits_2(self, capsys):
        assert experiment_cli.main(["frobnicate"]) == 2
        capsys.readouterr()

    def test_bad_check_choice_exits_2(self, capsys):
        assert experiment_cli.main(
            ["ehrenfest", "--d", "12", "--check", "bogus", "--t", "1"]
        ) == 2
        capsys.readouterr()

    def test_hardy_m_max_out_of_range_exits_2(self, capsys):
        assert experiment_cli.main(["hardy", "--d", "10", "--m-max", "6"]) == 2
        assert "m-max" in capsys.readouterr().err

    def test_numerical_failure_exits_3(self, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise NumericalError("bracket failed")

        monkeypatch.setattr(experiment_cli.bipartite_exact, "exact_l2", boom)
        code = experiment_cli.main(
            ["exact-bipartite", "--m", "1", "--n", "10", "--a-grid", "0:1:1"]
        )
        assert code == 3
        assert "numerical error" in capsys.readouterr().err


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        out = tmp_path / "cli.csv"
        proc = subprocess.run(
            [
                sys.executable, "-m", "avgproc.experiment_cli",
                "hardy", "--d", "10", "--m-max", "2", "--output", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert out.read_text().split("\n")[0] == experiment_cli.HEADER
