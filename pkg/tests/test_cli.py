import json
import math

import pytest

from casphere.cli import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    ConfigError,
    main,
    parse_material,
)
from casphere.materials import Drude, PerfectReflector, Plasma, Tabulated, Vacuum

FAST = [
    "--ldim", "8",
    "--matsubara-rel-tol", "1e-4",
    "--m-sum-rel-tol", "1e-4",
    "--quad-rel-tol", "1e-6",
]


class TestParseMaterial:
    def test_keywords(self):
        assert isinstance(parse_material("perfect"), PerfectReflector)
        assert isinstance(parse_material("vacuum"), Vacuum)
        gold = parse_material("drude")
        assert isinstance(gold, Drude)
        custom = parse_material("drude:9.0,0.035")
        assert custom.omega_p == pytest.approx(gold.omega_p)
        plasma = parse_material("plasma:8.5")
        assert isinstance(plasma, Plasma)

    def test_file(self, tmp_path):
        path = tmp_path / "eps.dat"
        path.write_text("1e14 100\n1e16 1.5\n")
        model = parse_material(f"file:{path}")
        assert isinstance(model, Tabulated)
        assert model.extrapolate

    def test_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_material("unobtainium")
        with pytest.raises(ConfigError):
            parse_material("drude:9.0")
        with pytest.raises(ConfigError):
            parse_material("plasma:not_a_number")
        with pytest.raises(ConfigError):
            parse_material(f"file:{tmp_path / 'missing.dat'}")


class TestCompute:
    def test_json_output(self, tmp_path):
        out = tmp_path / "result.json"
        code = main([
            "compute", "--radius", "2e-6", "--gap", "1e-6",
            "--temperature", "300", "--output", str(out), *FAST,
        ])
        assert code == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["free_energy_J"] < 0.0
        assert payload["force_N"] < 0.0
        assert payload["f_pfa_N"] < 0.0
        assert 0.0 < payload["correction"] < 1.0
        assert payload["spec"]["ell_dim"] == 8
        assert payload["spec"]["backend"] == "cholesky"
        assert payload["ledger"]

    def test_skip_force(self, tmp_path, capsys):
        out = tmp_path / "result.json"
        code = main([
            "compute", "--radius", "4e-6", "--gap", "1e-6", "--skip-force",
            "--temperature", "300", "--output", str(out), "--verbose",
            "--matsubara-rel-tol", "1e-4", "--m-sum-rel-tol", "1e-4",
            "--quad-rel-tol", "1e-6",
        ])
        assert code == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["force_N"] is None
        # auto cutoff is 5 R/L with a floor of 20
        assert payload["spec"]["ell_dim"] == 20
        assert "free energy" in capsys.readouterr().err

    def test_missing_geometry_is_config_error(self, capsys):
        assert main(["compute", "--radius", "1e-6"]) == EXIT_CONFIG
        assert "configuration error" in capsys.readouterr().err

    def test_invalid_gap_is_config_error(self, capsys):
        code = main(["compute", "--radius", "1e-6", "--gap=-1e-6", *FAST])
        assert code == EXIT_CONFIG

    def test_bad_material_file_names_line(self, tmp_path, capsys):
        path = tmp_path / "eps.dat"
        path.write_text("1e14 100\nbogus line here\n")
        code = main([
            "compute", "--radius", "1e-6", "--gap", "1e-6",
            "--material", f"file:{path}", *FAST,
        ])
        assert code == EXIT_CONFIG
        assert "line 2" in capsys.readouterr().err


class TestConfigFile:
    def test_presets_and_flag_priority(self, tmp_path):
        config = tmp_path / "job.conf"
        config.write_text(
            "radius = 2e-6\n"
            "gap = 1e-6\n"
            "ldim = 8\n"
            "matsubara_rel_tol = 1e-4\n"
            "m-sum-rel-tol = 1e-4\n"  # dashes allowed
            "quad_rel_tol = 1e-6\n"
            "skip_force = true\n"
            "# a comment\n"
        )
        out = tmp_path / "a.json"
        code = main(["--config", str(config), "compute", "--output", str(out)])
        assert code == EXIT_OK
        assert json.loads(out.read_text())["spec"]["ell_dim"] == 8

        # an explicit flag beats the config value
        out2 = tmp_path / "b.json"
        code = main([
            "--config", str(config), "compute", "--ldim", "10", "--output", str(out2),
        ])
        assert code == EXIT_OK
        assert json.loads(out2.read_text())["spec"]["ell_dim"] == 10

    def test_unknown_key(self, tmp_path, capsys):
        config = tmp_path / "bad.conf"
        config.write_text("radius = 1e-6\nwarp_factor = 9\n")
        assert main(["--config", str(config), "compute"]) == EXIT_CONFIG
        assert "warp_factor" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        assert main(["--config", "/nonexistent.conf", "compute"]) == EXIT_CONFIG


class TestSweep:
    def test_grid_csv_and_levels(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep", "--radii", "1e-6,2e-6", "--gaps", "0.5e-6,1e-6",
            "--temperature", "300", "--levels", "--output", str(out), *FAST,
        ])
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "R_m,L_m,T_K,correction,free_energy_J,force_N,f_pfa_N"
        assert len(lines) == 5
        for line in lines[1:]:
            fields = line.split(",")
            assert len(fields) == 7
            assert float(fields[3]) > 0.0
        err = capsys.readouterr().err
        assert "level 0.25%" in err
        assert "level 1%" in err

    def test_requires_grid(self):
        assert main(["sweep", "--radii", "1e-6", *FAST]) == EXIT_CONFIG


class TestBench:
    def test_csv_and_fit_line(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code = main([
            "bench", "--dims", "32,64", "--repeats", "1",
            "--quad-rel-tol", "1e-6", "--output", str(out),
        ])
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "N,t_cholesky_s,t_hodlr_s,logdet_cholesky,logdet_hodlr"
        assert len(lines) == 3
        first = lines[1].split(",")
        assert int(first[0]) == 32
        assert float(first[3]) == pytest.approx(float(first[4]), abs=1e-8)
        assert "scaling exponents" in capsys.readouterr().err

    def test_single_dim_skips_fit(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code = main([
            "bench", "--dims", "32", "--repeats", "1",
            "--quad-rel-tol", "1e-6", "--output", str(out),
        ])
        assert code == EXIT_OK
        assert "fit skipped" in capsys.readouterr().err

    def test_empty_dims(self):
        assert main(["bench", "--dims", ","]) == EXIT_CONFIG


class TestDumpMatrix:
    def test_symmetrized(self, tmp_path):
        out = tmp_path / "block.csv"
        code = main([
            "dump-matrix", "--radius", "2e-6", "--gap", "1e-6", "--ldim", "4",
            "--quad-rel-tol", "1e-8", "--output", str(out),
        ])
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "row,col,pol_pair,value"
        assert len(lines) == 1 + 4 * 16
        values = [float(line.split(",")[3]) for line in lines[1:]]
        assert all(v > 0.0 for v in values)

    def test_unsymmetrized_vacuum(self, tmp_path):
        out = tmp_path / "block.csv"
        code = main([
            "dump-matrix", "--radius", "2e-6", "--gap", "1e-6", "--ldim", "4",
            "--material", "vacuum", "--unsymmetrized",
            "--quad-rel-tol", "1e-8", "--output", str(out),
        ])
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "row,col,pol_pair,log10_value"
        values = [float(line.split(",")[3]) for line in lines[1:]]
        assert all(math.isinf(v) and v < 0 for v in values)

    def test_bad_m_index(self, capsys):
        code = main([
            "dump-matrix", "--radius", "2e-6", "--gap", "1e-6", "--ldim", "4",
            "--m-index", "9",
        ])
        assert code == EXIT_CONFIG
