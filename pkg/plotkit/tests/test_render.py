from pathlib import Path

import pytest

from plotkit import PlotSpec, SchemaError, render
from plotkit.cli import load_spec, main as cli_main

GOLDEN = Path(__file__).parent / "golden"


def spec_for(csv_name, kind, x, y, out):
    return PlotSpec(GOLDEN / csv_name, kind, x, y, "agent", out)


class TestGolden:
    def test_convergence_matches_golden_bytes(self, tmp_path):
        out = render(spec_for("convergence.csv", "convergence", "episode",
                              "smoothed_reward", tmp_path / "c.png"))
        assert out.read_bytes() == (GOLDEN / "convergence.png").read_bytes()

    def test_sweep_matches_golden_bytes(self, tmp_path):
        out = render(spec_for("sweep_power.csv", "sweep", "sweep_value",
                              "mean_sum_rate", tmp_path / "s.png"))
        assert out.read_bytes() == (GOLDEN / "sweep_power.png").read_bytes()

    def test_rendering_is_deterministic(self, tmp_path):
        a = render(spec_for("sweep_power.csv", "sweep", "sweep_value",
                            "mean_sum_rate", tmp_path / "a.png"))
        b = render(spec_for("sweep_power.csv", "sweep", "sweep_value",
                            "mean_sum_rate", tmp_path / "b.png"))
        assert a.read_bytes() == b.read_bytes()


class TestSchema:
    def test_missing_column_is_named(self, tmp_path):
        with pytest.raises(SchemaError, match="mean_sum_rate"):
            render(spec_for("convergence.csv", "sweep", "episode",
                            "mean_sum_rate", tmp_path / "x.png"))

    def test_renamed_column_fails_loudly(self, tmp_path):
        # schema drift: same data, renamed header column
        drifted = tmp_path / "drift.csv"
        text = (GOLDEN / "sweep_power.csv").read_text()
        drifted.write_text(text.replace("mean_sum_rate", "sum_rate_mean"))
        with pytest.raises(SchemaError, match="mean_sum_rate"):
            render(PlotSpec(drifted, "sweep", "sweep_value", "mean_sum_rate",
                            "agent", tmp_path / "x.png"))

    def test_empty_csv_rejected(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("# meta\nagent,seed,episode,episode_reward,smoothed_reward\n")
        with pytest.raises(SchemaError, match="no data rows"):
            render(PlotSpec(empty, "convergence", "episode", "episode_reward",
                            "agent", tmp_path / "x.png"))

    def test_bad_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="kind"):
            PlotSpec(GOLDEN / "sweep_power.csv", "pie", "sweep_value",
                     "mean_sum_rate", "agent", tmp_path / "x.png")


def test_single_seed_band_collapses(tmp_path):
    one_seed = tmp_path / "one.csv"
    lines = ["agent,seed,sweep_value,mean_sum_rate"]
    for v in (1.0, 2.0, 3.0):
        lines.append(f"td3,1,{v},{v * 2}")
    one_seed.write_text("\n".join(lines) + "\n")
    out = render(PlotSpec(one_seed, "sweep", "sweep_value", "mean_sum_rate",
                          "agent", tmp_path / "one.png"))
    assert out.is_file() and out.stat().st_size > 0


class TestCli:
    def test_spec_file_flow(self, tmp_path, capsys):
        spec = tmp_path / "plot.spec"
        spec.write_text(f"""
input_csv = {GOLDEN / 'sweep_power.csv'}
kind = sweep
x_field = sweep_value
y_field = mean_sum_rate
group_field = agent
out_png = {tmp_path / 'out.png'}
""")
        assert cli_main(["--spec", str(spec)]) == 0
        assert (tmp_path / "out.png").read_bytes() == \
            (GOLDEN / "sweep_power.png").read_bytes()

    def test_flags_flow(self, tmp_path):
        assert cli_main(["--input-csv", str(GOLDEN / "convergence.csv"),
                         "--kind", "convergence", "--x-field", "episode",
                         "--y-field", "smoothed_reward", "--group-field", "agent",
                         "--out-png", str(tmp_path / "c.png")]) == 0
        assert (tmp_path / "c.png").read_bytes() == \
            (GOLDEN / "convergence.png").read_bytes()

    def test_missing_flags_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli_main(["--kind", "sweep"])
        assert exc.value.code != 0

    def test_schema_error_exit_code(self, tmp_path, capsys):
        assert cli_main(["--input-csv", str(GOLDEN / "convergence.csv"),
                         "--kind", "sweep", "--x-field", "sweep_value",
                         "--y-field", "mean_sum_rate", "--group-field", "agent",
                         "--out-png", str(tmp_path / "x.png")]) == 1
        assert "sweep_value" in capsys.readouterr().err

    def test_spec_unknown_key(self, tmp_path):
        bad = tmp_path / "bad.spec"
        bad.write_text("inputcsv = x.csv\n")
        with pytest.raises(ValueError, match="unknown key"):
            load_spec(bad)
