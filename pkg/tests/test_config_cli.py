import json
import subprocess
import sys

import numpy as np
import pytest

from twistlab.cli import main
from twistlab.config import parse_config
from twistlab.convergence import DEFAULT_EPSILONS
from twistlab.exceptions import ConfigError
from twistlab.operators import read_triplets

SMALL = """
cross_section: {kind: rectangle, a: 1.0, b: 0.5, resolution: 40}
grid: {half_width: 6.0, n_points: 401}
modes: 3
epsilons: [0.8, 0.6, 0.5, 0.4]
tolerances: {solver: 1e-9}
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL)
    return path


def summary(out):
    return json.loads((out / "summary.json").read_text())


class TestParse:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.epsilons == DEFAULT_EPSILONS
        assert cfg.n_points == 1201 and cfg.half_width == 12.0 and cfg.modes == 6
        assert cfg.k2 == -1.0 and cfg.solver_tol == 1e-9
        assert cfg.cross_section.resolution == 240

    def test_string_scientific_notation(self):
        assert parse_config(SMALL).solver_tol == 1e-9

    def test_increasing_epsilons(self):
        with pytest.raises(ConfigError, match="decreasing"):
            parse_config("epsilons: [0.05, 0.1, 0.2, 0.4]")

    def test_square_rejected_and_overridden(self):
        text = "cross_section: {kind: rectangle, a: 1, b: 1}"
        with pytest.raises(ConfigError, match="square"):
            parse_config(text)
        assert parse_config(text, override_square=True).cross_section.a == 1

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key 'modez'"):
            parse_config("modez: 4")

    def test_all_violations_reported(self):
        with pytest.raises(ConfigError) as info:
            parse_config("modes: 1\ngrid: {n_points: 1200}\nshift: 0.5\nthreads: 0\n")
        assert len(info.value.violations) == 4

    def test_bad_yaml(self):
        with pytest.raises(ConfigError):
            parse_config("modes: [1, 2")

    def test_polygon(self):
        cfg = parse_config("cross_section: {kind: polygon, vertices: [[0,0],[1,0],[1,0.5],[0,0.5]]}")
        assert cfg.cross_section.kind == "polygon"

    def test_spline_errors_surface(self):
        with pytest.raises(ConfigError, match="twist"):
            parse_config("twist: {kind: spline, params: {knots: [-1, 0, 1], values: [1, 1, 0]}}")


class TestCli:
    def test_spectrum1d_default_passes(self, tmp_path):
        out = tmp_path / "s1"
        assert main(["--command", "spectrum1d", "--out", str(out)]) == 0
        s = summary(out)
        assert s["status"] == "pass" and s["schema_version"] == "1.0"
        assert abs(s["results"]["ratio"] - 3) < 1e-5
        assert (out / "spectrum1d.csv").read_bytes().count(b"\r\n") == 12

    def test_transverse(self, tmp_path, small_cfg):
        out = tmp_path / "tr"
        assert main(["--config", str(small_cfg), "--out", str(out), "--command", "transverse"]) == 0
        assert (out / "modes.csv").exists() and (out / "config.yaml").read_text() == SMALL

    def test_assemble_triplets(self, tmp_path, small_cfg):
        out = tmp_path / "as"
        assert main(["--config", str(small_cfg), "--out", str(out), "--command", "assemble"]) == 0
        A = read_triplets(out / "full.txt")
        assert abs(A - A.T).max() == 0
        assert A.shape[0] == 3 * summary(out)["results"]["n_points"] - 6

    def test_bad_config_exit_2(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("epsilons: [0.1, 0.2, 0.3, 0.4]\n")
        assert main(["--config", str(path), "--out", str(tmp_path / "o"),
                     "--command", "sweep"]) == 2

    def test_report_without_sweep(self, tmp_path):
        out = tmp_path / "r"
        assert main(["--command", "report", "--out", str(out)]) == 2
        assert summary(out)["status"] == "error"

    def test_sweep_report_and_determinism(self, tmp_path, small_cfg):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main(["--config", str(small_cfg), "--out", str(out), "--command", "sweep"])
            s = summary(out)
            assert code == (0 if s["status"] == "pass" else 1)
            outs.append(out)
        for fname in ("sweep.csv", "gap1.dat", "sweep_report.json"):
            a = (outs[0] / fname).read_bytes()
            b = (outs[1] / fname).read_bytes()
            if fname == "sweep_report.json":
                # Wall-clock timings are the only nondeterministic field.
                da, db = json.loads(a), json.loads(b)
                for doc in (da, db):
                    for r in doc["rows"]:
                        r.pop("seconds")
                assert da == db
            elif fname == "sweep.csv":
                strip = lambda t: [l.rsplit(b",", 2)[0] for l in t.split(b"\r\n")]
                assert strip(a) == strip(b)
            else:
                assert a == b
        assert main(["--command", "report", "--out", str(outs[0])]) in (0, 1)
        text = (outs[0] / "report.txt").read_text()
        assert "gap1" in text and "extrapolated" in text
        data = np.loadtxt(outs[0] / "gap1.dat")
        assert data.shape == (4, 2)

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "twistlab", "--help"], capture_output=True,
                              text=True)
        assert proc.returncode == 0 and "--command" in proc.stdout
