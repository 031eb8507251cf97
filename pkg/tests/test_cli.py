import subprocess
import sys

import pytest

from wavesim.cli import ConfigError, main, parse_config, run
from wavesim.model import DataKind, example_spec


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParse:
    def test_minimal_verify(self):
        cfg = parse_config("mode = verify\nK = 50\nN = 50\nT = 20\nsweeps = 5\n")
        assert cfg.mode == "verify"
        assert cfg.spec == example_spec()

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# header\n\nK = 10  # trailing\n")
        assert cfg.K == 10

    def test_small_exponent(self):
        with pytest.raises(ConfigError, match="p1 must be ≥ 2"):
            parse_config("p1 = 1.5\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="line 3: duplicate key 'K'"):
            parse_config("K = 10\nN = 5\nK = 20\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="line 1: unknown key 'bogus'"):
            parse_config("bogus = 1\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("K = 10\nN 5\n")

    def test_overrides_win(self):
        cfg = parse_config("K = 10\nN = 10\n", {"K": 20, "N": None})
        assert cfg.K == 20 and cfg.N == 10

    def test_verify_requires_manufactured(self):
        with pytest.raises(ConfigError, match="manufactured"):
            parse_config("mode = verify\nforcing = zero\n")

    def test_verify_requires_node(self):
        with pytest.raises(ConfigError, match="divisible by 5"):
            parse_config("mode = verify\nK = 48\n")

    def test_sources_off(self):
        cfg = parse_config("sources = off\nforcing = zero\nk1 = 0\n")
        assert cfg.spec.potential is None
        assert cfg.spec.forcing == DataKind.zero() and cfg.spec.k1 == 0

    def test_sources_off_conflict(self):
        with pytest.raises(ConfigError):
            parse_config("sources = off\ngamma1 = 0.5\n")

    def test_xi_out_of_range(self):
        with pytest.raises(ConfigError):
            parse_config("xi = 0.3\n")


class TestRun:
    def test_zero_simulation(self, tmp_path):
        cfg = parse_config(f"sources = off\nforcing = zero\ninitial_data = zero\n"
                           f"K = 6\nN = 5\nT = 1\nout_dir = {tmp_path}\n")
        assert run(cfg) == 0
        lines = (tmp_path / "energy.csv").read_text().splitlines()
        assert lines[0] == "t,E,H,I1,I2,J,psi,L,Lyap"
        assert len(lines) == 7
        for row in lines[1:]:
            assert all(float(c) == 0 for c in row.split(",")[1:7])

    def test_check_hypotheses(self, tmp_path):
        cfg = parse_config(f"mode = check-hypotheses\nout_dir = {tmp_path}\n")
        assert run(cfg) == 0
        summary = dict(line.split(": ", 1) for line in
                       (tmp_path / "summary.txt").read_text().splitlines())
        for key in ("rho_below_1.563e-3", "E0_below_0.015", "E_star_below_0.017", "eta_star_below_1"):
            assert summary[key] == "true"

    def test_full_precision_and_idempotent(self, tmp_path):
        text = f"K = 10\nN = 10\nT = 5\nout_dir = {tmp_path}\nemit_surfaces = yes\n"
        assert run(parse_config(text)) == 0
        first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        assert run(parse_config(text)) == 0
        second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        assert first == second and set(first) == {"energy.csv", "surfaces.csv", "summary.txt"}
        row = first["energy.csv"].decode().splitlines()[1].split(",")
        assert float(row[1]) == float(f"{float(row[1]):.17g}")
        header = first["surfaces.csv"].decode().splitlines()[0]
        assert header == "x,t,u,v,u_ex,v_ex"

    def test_blowup_inadmissible_exits_2(self, tmp_path):
        cfg = parse_config(f"mode = analyze-blowup\nforcing = zero\nK = 8\nN = 10\nT = 0.1\n"
                           f"scan_scales = 1:5:1\nout_dir = {tmp_path}\n")
        assert run(cfg) == 2

    def test_failure_writes_nothing(self, tmp_path):
        out = tmp_path / "out"
        cfg = parse_config(f"forcing = zero\ninitial_data = scaled:60\nK = 16\nN = 200\nT = 2\n"
                           f"sweeps = 20\nout_dir = {out}\n")
        assert run(cfg) == 1
        assert not out.exists() or not any(out.iterdir())


class TestMain:
    def test_flags(self, tmp_path, capsys):
        cfg = write(tmp_path, "sources = off\nforcing = zero\ninitial_data = zero\n")
        code = main(["simulate", "--config", str(cfg), "--K", "4", "--N", "3", "--T", "1",
                     "--sweeps", "1", "--out", str(tmp_path / "o"), "--emit-surfaces"])
        assert code == 0
        assert (tmp_path / "o" / "surfaces.csv").exists()
        assert "K: 4" in capsys.readouterr().out

    def test_missing_config(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 1

    def test_bad_config_message(self, tmp_path, capsys):
        cfg = write(tmp_path, "K = 4\nK = 5\n")
        assert main(["simulate", "--config", str(cfg)]) == 1
        assert "duplicate key 'K'" in capsys.readouterr().err

    def test_module_entry_point(self, tmp_path):
        cfg = write(tmp_path, f"out_dir = {tmp_path}\n")
        proc = subprocess.run([sys.executable, "-m", "wavesim", "check-hypotheses", "--config", str(cfg)],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "eta_star_below_1: true" in proc.stdout
