import numpy as np
import pytest

from stochlwr.cli import main


def _read(path):
    return np.genfromtxt(path, delimiter=",", names=True)


class TestSimulate:
    def test_outputs_and_determinism(self, tmp_path):
        args = ["simulate", "--scenario", "S1", "--seed", "42", "--dt", "1e-2", "--nx", "21", "--T", "1"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        for name in ("surface.csv", "fan.csv", "sigma.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_bad_dt(self, tmp_path, capsys):
        assert main(["simulate", "--scenario", "s1", "--dt", "0", "--out", str(tmp_path)]) == 2
        assert "dt must be positive" in capsys.readouterr().err

    @pytest.mark.parametrize("extra", [["--nx", "1"], ["--T", "-1"], ["--T", "1", "--dt", "0.3"]])
    def test_bad_grid(self, tmp_path, extra):
        assert main(["simulate", "--scenario", "d1", "--out", str(tmp_path)] + extra) == 2

    def test_config_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("ic=x\nperturbation=multiplicative\nnoise=bm\nseed=5\ndt=0.1\nnx=5\n")
        assert main(["simulate", "--config", str(cfg), "--nx", "3", "--out", str(tmp_path)]) == 0
        surf = _read(tmp_path / "surface.csv")
        assert surf.size == 3 * 11

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("colour=red\n")
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2

    def test_unknown_scenario(self, tmp_path):
        assert main(["simulate", "--scenario", "x9", "--out", str(tmp_path)]) == 2


class TestClosedForm:
    def test_d1_origin(self, tmp_path):
        assert main(["closed-form", "--id", "D1", "--nx", "101", "--T", "1", "--out", str(tmp_path)]) == 0
        first = (tmp_path / "closed_form.csv").read_text().splitlines()[:2]
        assert first == ["x,t,u,valid", "0,0,1,1"]

    def test_b2_functional_column(self, tmp_path):
        assert main(["closed-form", "--id", "b2", "--seed", "7", "--dt", "0.01", "--nx", "5",
                     "--out", str(tmp_path)]) == 0
        data = _read(tmp_path / "closed_form.csv")
        assert data.dtype.names == ("x", "t", "u", "valid", "I")
        assert np.all(np.diff(data["I"][::5]) > 0)

    def test_unknown_id(self, tmp_path):
        assert main(["closed-form", "--id", "Z9", "--out", str(tmp_path)]) == 2
        assert main(["closed-form", "--out", str(tmp_path)]) == 2


class TestStoppingTime:
    def test_d3(self, tmp_path):
        assert main(["stopping-time", "--scenario", "d3", "--nx", "101", "--out", str(tmp_path)]) == 0
        data = _read(tmp_path / "sigma.csv")
        assert np.all(data["sigma_numeric"] <= 0.5 + 2e-3)

    def test_s1_columns_agree(self, tmp_path):
        assert main(["stopping-time", "--scenario", "s1", "--seed", "3", "--out", str(tmp_path)]) == 0
        data = _read(tmp_path / "sigma.csv")
        a, b = data["sigma_numeric"], data["sigma_formula"]
        assert np.array_equal(np.isinf(a), np.isinf(b))
        finite = np.isfinite(b)
        assert np.all(np.abs(a[finite] - b[finite]) <= 2e-3 + 1e-12)

    def test_missing_scenario(self, tmp_path):
        assert main(["stopping-time", "--out", str(tmp_path)]) == 2


def test_paths(tmp_path):
    assert main(["paths", "--seed", "1", "--dt", "0.25", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "paths.csv").read_text().splitlines()
    assert lines[0] == "t,W,S" and lines[1] == "0,0,1" and len(lines) == 6


def test_unknown_command():
    assert main(["bogus"]) == 2


class TestVerify:
    def test_single_id(self, tmp_path, capsys):
        assert main(["verify", "--id", "S1", "--probes", "200", "--out", str(tmp_path)]) == 0
        line = capsys.readouterr().out.strip()
        id, value, status = line.split(",")
        assert id == "S1" and float(value) <= 1e-9 and status == "PASS"
        assert (tmp_path / "residuals_S1.csv").exists()

    def test_all(self, tmp_path, capsys):
        assert main(["verify", "--all", "--probes", "1000", "--seed", "1", "--out", str(tmp_path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 12 and all(line.endswith(",PASS") for line in lines)

    def test_needs_target(self, tmp_path):
        assert main(["verify", "--out", str(tmp_path)]) == 2
