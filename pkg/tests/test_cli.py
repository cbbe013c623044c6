import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from spinpath import io
from spinpath.cli import main
from spinpath.config import validate
from spinpath.quantum import TSIRELSON_BOUND

DIST = "1.20,2.383,1.065,1.18"

ZERO_BG = """\
format_version: 1
label: zero_background
instrument:
  type: mwp
  mwp: {field_mT: 66.47, separation_m: 0.21}
beam:
  wavelength_angstrom: 5.4
  background: 0
  polarization: 0.9
"""


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--config", "mwp_2mm", "--seed", "5", "--out", str(out)]) == 0
    return out


def run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


class TestSimulate:
    def test_outputs(self, simulated):
        assert (simulated / "dataset.csv").exists()
        manifest = json.loads((simulated / "manifest.json").read_text())
        assert manifest["command"] == "simulate" and manifest["seed"] == 5
        assert manifest["format_version"] == 1

    def test_deterministic(self, simulated, tmp_path):
        main(["simulate", "--config", "mwp_2mm", "--seed", "5", "--out", str(tmp_path)])
        assert (tmp_path / "dataset.csv").read_bytes() == (simulated / "dataset.csv").read_bytes()

    def test_metadata_config_revalidates(self, simulated):
        meta = json.loads(io.metadata_path(simulated / "dataset.csv").read_text())
        validate(meta["config"])

    def test_zero_flux(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(ZERO_BG)
        code, _, err = run(["simulate", "--config", str(cfg), "--flux", "0", "--out", str(tmp_path)],
                           capsys)
        assert code == 0 and "warning" in err
        assert np.all(io.read_dataset(tmp_path / "dataset.csv").counts == 0)

    def test_schema_violation(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(ZERO_BG.replace("background: 0", "background: -3"))
        code, _, err = run(["simulate", "--config", str(cfg), "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "line 8" in err and "beam.background" in err

    def test_missing_config(self, tmp_path, capsys):
        code, _, err = run(["simulate", "--config", str(tmp_path / "nope.yaml")], capsys)
        assert code == 2

    def test_tof(self, tmp_path, capsys):
        code, _, _ = run(["simulate", "--config", "tof_conv", "--out", str(tmp_path)], capsys)
        assert code == 0
        assert io.read_dataset(tmp_path / "dataset.csv").wavelengths().size == 7


class TestAnalyze:
    def test_round_trip(self, simulated, tmp_path, capsys):
        code, out, _ = run(["analyze", str(simulated / "dataset.csv"), "--out", str(tmp_path),
                            "--trials", "300"], capsys)
        assert code == 0 and "witnessed" in out
        (rep,) = io.read_reports(tmp_path / "report.json")
        assert abs(rep.S - TSIRELSON_BOUND * 0.89) < 3 * rep.sigma_S
        assert 0.005 < rep.sigma_S < 0.02
        assert rep.label == "mwp_2mm"
        for name in ("report.csv", "curves.csv", "summary.csv", "manifest.json"):
            assert (tmp_path / name).exists()
        rows = list(csv.DictReader(open(tmp_path / "curves.csv")))
        assert len(rows) == 24 * 9 and rows[0]["fitted"] != ""

    def test_angles_flag(self, simulated, tmp_path, capsys):
        code, _, _ = run(["analyze", str(simulated / "dataset.csv"), "--out", str(tmp_path),
                          "--angles", "0,90,0,90", "--trials", "0"], capsys)
        assert code == 0
        (rep,) = io.read_reports(tmp_path / "report.json")
        assert rep.angles.alpha2 == pytest.approx(np.pi / 2)

    def test_bad_angles(self, simulated, capsys):
        code, _, err = run(["analyze", str(simulated / "dataset.csv"), "--angles", "1,2"], capsys)
        assert code == 2 and "four" in err

    def test_raw_counts(self, simulated, tmp_path, capsys):
        code, _, _ = run(["analyze", str(simulated / "dataset.csv"), "--raw-counts",
                          "--trials", "0", "--out", str(tmp_path)], capsys)
        assert code == 0
        assert io.read_reports(tmp_path / "report.json")[0].mode == "raw"

    def test_transmission_flag(self, simulated, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["analyze", str(simulated / "dataset.csv"), "--trials", "0", "--out", str(a)])
        main(["analyze", str(simulated / "dataset.csv"), "--trials", "0", "--out", str(b),
              "--no-transmission-correct"])
        capsys.readouterr()
        sa = io.read_reports(a / "report.json")[0].S
        sb = io.read_reports(b / "report.json")[0].S
        assert sa != sb and abs(sa - sb) < 1e-2

    def test_constant_chi(self, simulated, tmp_path, capsys):
        ds = io.read_dataset(simulated / "dataset.csv")
        sub = ds.select(ds.chi == ds.chi[0])
        io.write_dataset(sub, tmp_path / "flat.csv")
        code, out, _ = run(["analyze", str(tmp_path / "flat.csv"), "--trials", "100",
                            "--out", str(tmp_path)], capsys)
        assert code == 0 and "not witnessed" in out
        assert abs(io.read_reports(tmp_path / "report.json")[0].S) <= 2

    def test_missing_coverage(self, simulated, tmp_path, capsys):
        ds = io.read_dataset(simulated / "dataset.csv")
        keep = np.isclose(ds.chi, 0.0) | np.isclose(ds.chi, np.pi / 2)
        io.write_dataset(ds.select(keep), tmp_path / "part.csv")
        code, _, err = run(["analyze", str(tmp_path / "part.csv"), "--trials", "0",
                            "--out", str(tmp_path)], capsys)
        assert code == 2 and "chi=" in err and "missing phase coverage" in err

    def test_malformed_header(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n")
        code, _, err = run(["analyze", str(p)], capsys)
        assert code != 0 and "header" in err

    def test_tof_per_bin(self, tmp_path, capsys):
        main(["simulate", "--config", "tof_overlap", "--out", str(tmp_path)])
        code, _, _ = run(["analyze", str(tmp_path / "dataset.csv"), "--trials", "0",
                          "--out", str(tmp_path)], capsys)
        assert code == 0
        reps = io.read_reports(tmp_path / "report.json")
        assert len(reps) == 7 and all(r.mode == "pooled" for r in reps)

    def test_flat_counts_are_numerical_failure(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(ZERO_BG)
        main(["simulate", "--config", str(cfg), "--flux", "0", "--out", str(tmp_path)])
        code, _, _ = run(["analyze", str(tmp_path / "dataset.csv"), "--trials", "0",
                          "--out", str(tmp_path)], capsys)
        assert code == 3


class TestFocus:
    def test_overlap(self, capsys, tmp_path):
        code, out, _ = run(["focus", "--nu1", "600", "--distances", DIST, "--out", str(tmp_path)],
                           capsys)
        assert code == 0
        assert "902.140" in out and "574.834" in out and "272.694" in out
        assert "zero check at sample and RF4: ok" in out
        rows = list(csv.DictReader(open(tmp_path / "frequencies.csv")))
        assert [round(float(r["frequency_kHz"])) for r in rows] == [600, 902, 575, 273]

    def test_conventional(self, capsys):
        code, out, _ = run(["focus", "--nu1", "500", "--distances", DIST, "--conventional"], capsys)
        assert code == 0
        assert out.count("500.000 kHz") == 4 and "reversed" in out

    def test_negative_distance(self, capsys):
        code, _, err = run(["focus", "--nu1", "600", "--distances=-1.2,2.383,1.065,1.18"], capsys)
        assert code == 2 and "positive" in err


class TestCoherence:
    def test_rf(self, tmp_path, capsys):
        code, out, _ = run(["coherence", "--config", "rf_overlap", "--out", str(tmp_path)], capsys)
        assert code == 0 and "overlapping" in out
        data = json.loads((tmp_path / "coherence.json").read_text())
        assert data["xi_over_beta_t"] == pytest.approx(93 / 350)
        assert (tmp_path / "profile.csv").exists()

    def test_mwp(self, capsys):
        code, out, _ = run(["coherence", "--config", "mwp_0p5mm"], capsys)
        assert code == 0 and "separated" in out and "beta_t_geometric_nm" in out


class TestReport:
    def test_six_rows(self, tmp_path, capsys):
        files = []
        for name in ("rf_conv_prior", "mwp_0p5mm", "mwp_2mm", "mwp_4mm", "rf_conv", "rf_overlap"):
            d = tmp_path / name
            main(["simulate", "--config", name, "--out", str(d)])
            main(["analyze", str(d / "dataset.csv"), "--trials", "0", "--out", str(d)])
            files.append(str(d / "report.json"))
        capsys.readouterr()
        code, out, _ = run(["report", *files, "--out", str(tmp_path)], capsys)
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "summary.csv")))
        ratios = [float(r["xi_over_beta_t"]) for r in rows]
        assert np.allclose(ratios, [16, 1.09, 4.29, 8.57, 0.243, 0.266], atol=0.006)
        assert all(float(r["classical_bound"]) == 2.0 for r in rows)
        assert float(rows[0]["tsirelson_bound"]) == pytest.approx(TSIRELSON_BOUND)

    def test_single(self, simulated, tmp_path, capsys):
        main(["analyze", str(simulated / "dataset.csv"), "--trials", "0", "--out", str(tmp_path)])
        capsys.readouterr()
        code, out, _ = run(["report", str(tmp_path / "report.csv")], capsys)
        assert code == 0 and len(out.strip().splitlines()) == 2

    def test_empty_input(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["report"])
        assert info.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "spinpath", "focus", "--nu1", "600",
                          "--distances", DIST], capture_output=True, text=True)
    assert res.returncode == 0 and "902.140" in res.stdout
