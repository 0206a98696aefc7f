import csv
import subprocess
import sys

import numpy as np
import pytest

from lelab import cli
from lelab.checkpoint import Checkpoint
from lelab.elliptic import SingularSystemError
from lelab.cli import (
    EXIT_CONFIG,
    EXIT_INVARIANT,
    EXIT_OK,
    EXIT_REJECTED,
    EXIT_SOLVER,
    STABILITY_COLUMNS,
    main,
    write_csv,
)

SMALL = "n1 = 8\nn2 = 8\nn3 = 9\n"


def write_config(tmp_path, body, name="run.cfg"):
    path = tmp_path / name
    path.write_text(SMALL + body + f"out = {tmp_path / 'out'}\n", encoding="utf-8")
    return str(path)


def read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# schema=")
    rows = list(csv.reader(lines[1:]))
    return rows[0], rows[1:]


def column(rows, header, name):
    return np.array([float(r[header.index(name)]) for r in rows])


class TestWriteCsv:
    def test_format(self, tmp_path):
        path = write_csv(tmp_path / "x.csv", "x", ["a", "b", "c"], [(0.1, 3, True)])
        assert path.read_bytes() == b"# schema=x/1\na,b,c\n1.0000000000000001e-01,3,1\n"

    def test_full_precision(self, tmp_path):
        value = 1 / 3
        path = write_csv(tmp_path / "x.csv", "x", ["v"], [(value,)])
        _, rows = read_csv(path)
        assert float(rows[0][0]) == value


class TestConfigErrors:
    def test_parse_failure(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("n1 = 8\nn2 8\n", encoding="utf-8")
        assert main(["mms", "--config", str(cfg)]) == EXIT_CONFIG
        assert f"{cfg}:2:" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["norms", "--config", str(tmp_path / "none.cfg")]) == EXIT_CONFIG

    def test_unknown_command(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["explode", "--config", write_config(tmp_path, "")])


class TestRegularize:
    def test_generic(self, tmp_path):
        # the boundary rows of the correction solve need n3 = 17 to reach 1e-10
        cfg = tmp_path / "reg.cfg"
        cfg.write_text(f"n1 = 8\nn2 = 8\nout = {tmp_path / 'out'}\n", encoding="utf-8")
        assert main(["regularize", "--config", str(cfg)]) == EXIT_OK
        header, rows = read_csv(tmp_path / "out" / "regularize.csv")
        assert header == ["r", "datum_error", "curl_ratio", "div_residual", "bottom_residual"]
        err = column(rows, header, "datum_error")
        assert np.all(np.diff(err) < 0)
        assert column(rows, header, "div_residual").max() <= 1e-10

    def test_rest(self, tmp_path):
        assert main(["regularize", "--config", write_config(tmp_path, ""),
                     "--preset", "rest"]) == EXIT_OK
        header, rows = read_csv(tmp_path / "out" / "regularize.csv")
        for name in header[1:]:
            assert np.all(column(rows, header, name) == 0)


class TestEvolve:
    def test_shear(self, tmp_path):
        cfg = write_config(tmp_path, "preset = shear\ndt = 0.01\nt_end = 0.05\ncheckpoint_interval = 2\n")
        assert main(["evolve", "--config", cfg]) == EXIT_OK
        header, rows = read_csv(tmp_path / "out" / "trajectory.csv")
        assert len(rows) == 6 and header[0] == "t"
        assert column(rows, header, "det_dev")[-1] <= 1e-8
        names = sorted(p.name for p in (tmp_path / "out").glob("*.lelb"))
        assert names == ["checkpoint_000000.lelb", "checkpoint_000002.lelb",
                         "checkpoint_000004.lelb"]
        ck = Checkpoint.load(tmp_path / "out" / names[-1])
        assert ck.t == pytest.approx(0.04)

    def test_rest_is_static(self, tmp_path):
        cfg = write_config(tmp_path, "preset = rest\ndt = 0.02\nt_end = 0.06\n")
        assert main(["evolve", "--config", cfg]) == EXIT_OK
        header, rows = read_csv(tmp_path / "out" / "trajectory.csv")
        for name in header:
            if name not in ("t", "rt_margin"):
                assert np.all(column(rows, header, name) == 0), name

    def test_rt_abort(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "preset = shear\nrt_policy = abort\n")
        assert main(["evolve", "--config", cfg]) == EXIT_REJECTED
        assert "RT abort" in capsys.readouterr().err
        _, rows = read_csv(tmp_path / "out" / "trajectory.csv")
        assert rows == []

    def test_smallness_abort_keeps_checkpoints(self, tmp_path):
        cfg = write_config(tmp_path, "preset = shear\ndt = 0.01\nt_end = 0.5\nepsilon = 0.05\n"
                                     "smallness_policy = abort\ncheckpoint_interval = 1\n")
        assert main(["evolve", "--config", cfg]) == EXIT_REJECTED
        _, rows = read_csv(tmp_path / "out" / "trajectory.csv")
        assert len(list((tmp_path / "out").glob("*.lelb"))) == len(rows) > 0


class TestStability:
    def test_default(self, tmp_path):
        cfg = write_config(tmp_path, "dt = 0.01\nt_end = 0.05\n")
        assert main(["stability", "--config", cfg]) == EXIT_OK
        header, rows = read_csv(tmp_path / "out" / "stability.csv")
        assert tuple(header) == STABILITY_COLUMNS
        footer = {r[0]: float(r[1]) for r in rows if not r[0][0].isdigit()}
        assert set(footer) == {"gronwall_C", "e_over_int_v", "a_over_e", "at_over_ve", "q_over_y"}
        assert np.isfinite(footer["gronwall_C"]) and footer["gronwall_C"] > 0

    def test_zero_kappa(self, tmp_path):
        cfg = write_config(tmp_path, "dt = 0.01\nt_end = 0.03\nkappa = 0\n")
        assert main(["stability", "--config", cfg]) == EXIT_OK
        header, rows = read_csv(tmp_path / "out" / "stability.csv")
        data = [r for r in rows if r[0][0].isdigit()]
        assert np.all(column(data, header, "Y") == 0)

    def test_rejection(self, tmp_path):
        cfg = write_config(tmp_path, "preset = shear\nrt_policy = abort\n")
        assert main(["stability", "--config", cfg]) == EXIT_REJECTED


class TestMms:
    def test_sweep(self, tmp_path):
        assert main(["mms", "--config", write_config(tmp_path, "")]) == EXIT_OK
        header, rows = read_csv(tmp_path / "out" / "mms.csv")
        assert header == ["n3", "max_error"]
        assert [int(r[0]) for r in rows] == [9, 17, 33]
        assert float(rows[-1][1]) <= 1e-10

    def test_zero_rhs(self, tmp_path):
        assert main(["mms", "--config", write_config(tmp_path, "mms_rhs = zero\n")]) == EXIT_OK
        _, rows = read_csv(tmp_path / "out" / "mms.csv")
        assert all(float(r[1]) == 0.0 for r in rows)

    def test_coarse_only_fails_invariant(self, tmp_path):
        assert main(["mms", "--config", write_config(tmp_path, "n3_sweep = 5, 7\n")]) == EXIT_INVARIANT


class TestNorms:
    def test_rows(self, tmp_path):
        cfg = write_config(tmp_path, "n_random = 5\n")
        assert main(["norms", "--config", cfg]) == EXIT_OK
        header, rows = read_csv(tmp_path / "out" / "norms.csv")
        assert header == ["quantity", "s", "value"]
        names = [r[0] for r in rows]
        assert names.count("N") == 5 and "divcurl_C" in names
        assert all(np.isfinite(float(r[2])) for r in rows)

    def test_solver_failure(self, tmp_path, monkeypatch):
        def broken(grid, zero=False):
            raise SingularSystemError("mode operator is singular")

        monkeypatch.setattr(cli, "manufactured_error", broken)
        assert main(["mms", "--config", write_config(tmp_path, "")]) == EXIT_SOLVER


class TestReproducibility:
    @pytest.mark.parametrize("command, name", [("norms", "norms.csv"), ("evolve", "trajectory.csv")])
    def test_identical_bytes(self, tmp_path, command, name):
        body = "seed = 7\nn_random = 5\ndt = 0.02\nt_end = 0.04\n"
        outputs = []
        for run_dir in ("a", "b"):
            cfg = write_config(tmp_path, body, name=f"{run_dir}.cfg")
            assert main([command, "--config", cfg, "--out", str(tmp_path / run_dir)]) == EXIT_OK
            outputs.append((tmp_path / run_dir / name).read_bytes())
        assert outputs[0] == outputs[1]


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path, "")
    proc = subprocess.run([sys.executable, "-m", "lelab.cli", "mms", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
