import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from lmquench.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_PARTIAL, main
from lmquench.pipeline import BUNDLE_FILES

SMALL = ["-N", "41", "--h", "0.35", "--t-max", "2000", "--max-samples", "65536"]


def read_bundle(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["run", *SMALL, "-g", "2.5", "-k", "0.7", "-o", str(out)]) == EXIT_OK
    return out


def test_run_writes_complete_bundle(bundle):
    files = read_bundle(bundle)
    assert set(BUNDLE_FILES) | {"manifest.json"} == set(files)
    manifest = json.loads(files["manifest.json"])
    assert set(manifest["files"]) == set(BUNDLE_FILES)
    for name, entry in manifest["files"].items():
        assert entry["sha256"] == hashlib.sha256(files[name]).hexdigest()
    assert manifest["inputs"]["physics"] == {"g": 2.5, "kappa": 0.7}
    assert set(manifest["versions"]) >= {"lmquench", "numpy", "scipy", "python"}
    assert manifest["sum_rule"] >= 1 - 1e-6


def test_column_headers(bundle):
    heads = {name: (bundle / name).read_text().splitlines()[0]
             for name in BUNDLE_FILES if name.endswith(".csv")}
    assert heads["echo.csv"] == "time,re_nu,im_nu,echo"
    assert heads["histogram.csv"] == "y,p"
    assert heads["spectrum_discrete.csv"] == "omega,weight"
    assert heads["spectrum_fft.csv"] == "omega,amplitude"
    assert heads["density.csv"] == "time,x,rho"
    assert heads["overlaps.csv"] == "n,energy,re_a,im_a,weight"


def test_summary_contents(bundle):
    s = json.loads((bundle / "summary.json").read_text())
    assert s["classification"]["label"] in ("double_peaked", "gaussian", "exponential",
                                            "winged", "mixed")
    assert s["spectrum"]["frequency_convention"] == "omega = E'_n - E0"
    hist = np.loadtxt(bundle / "histogram.csv", delimiter=",", skiprows=1)
    assert hist[:, 1].sum() == pytest.approx(1.0, abs=1e-12)


def test_null_quench_echo_constant(tmp_path):
    assert main(["run", *SMALL, "-k", "0", "-o", str(tmp_path)]) == EXIT_OK
    echo = np.loadtxt(tmp_path / "echo.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(echo[:, 3], 1.0, atol=1e-10)


def test_rerun_is_bitwise_identical(bundle, tmp_path):
    assert main(["run", *SMALL, "-g", "2.5", "-k", "0.7", "-o", str(tmp_path)]) == EXIT_OK
    assert read_bundle(tmp_path) == read_bundle(bundle)


def test_cached_run_matches_cold_run(bundle, tmp_path):
    cache = tmp_path / "cache"
    args = ["run", *SMALL, "-g", "2.5", "-k", "0.7", "--cache-dir", str(cache)]
    assert main([*args, "-o", str(tmp_path / "a")]) == EXIT_OK
    assert any(cache.iterdir())
    assert main([*args, "-o", str(tmp_path / "b")]) == EXIT_OK
    assert read_bundle(tmp_path / "a") == read_bundle(bundle)
    assert read_bundle(tmp_path / "b") == read_bundle(bundle)


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LMQUENCH_OUTPUT", str(tmp_path / "env"))
    assert main(["run", *SMALL, "-k", "0"]) == EXIT_OK
    assert (tmp_path / "env" / "manifest.json").exists()
    # an explicit flag still wins
    assert main(["run", *SMALL, "-k", "0", "-o", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "flag" / "manifest.json").exists()


def test_config_file(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[mesh]\nn_points = 41\nscaling = 0.35\n[physics]\nkappa = 0.0\n'
                   '[dynamics]\nt_max = 500.0\n')
    assert main(["run", "-c", str(cfg), "-o", str(tmp_path / "o")]) == EXIT_OK
    inputs = json.loads((tmp_path / "o" / "manifest.json").read_text())["inputs"]
    assert inputs["mesh"] == {"n_points": 41, "scaling": 0.35}


def test_sweep_grid_order_and_single_point_equivalence(bundle, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", *SMALL, "--g-list", "2.5,1", "--kappa-list", "0.7", "-j", "1",
                 "-o", str(out)])
    assert code == EXIT_OK
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert [(float(r["g"]), float(r["kappa"])) for r in rows] == [(2.5, 0.7), (1.0, 0.7)]
    assert all(r["status"] == "ok" for r in rows)
    assert read_bundle(out / rows[0]["directory"]) == read_bundle(bundle)
    manifest = json.loads((out / "manifest.json").read_text())
    assert "sweep.csv" in manifest["files"]


def test_parallel_sweep_matches_serial(tmp_path):
    args = ["sweep", *SMALL, "--g-list", "0.5,2.5", "--kappa-list", "0.7,-5"]
    assert main([*args, "-j", "1", "-o", str(tmp_path / "s")]) == EXIT_OK
    assert main([*args, "-j", "2", "-o", str(tmp_path / "p")]) == EXIT_OK
    serial = {p.relative_to(tmp_path / "s"): p.read_bytes()
              for p in (tmp_path / "s").rglob("*") if p.is_file()}
    parallel = {p.relative_to(tmp_path / "p"): p.read_bytes()
                for p in (tmp_path / "p").rglob("*") if p.is_file()}
    assert serial == parallel


def test_sweep_partial_failure(tmp_path):
    # five states carry the whole weight only for the null quench
    out = tmp_path / "sweep"
    code = main(["sweep", *SMALL, "--g-list", "1", "--kappa-list", "0,20", "--n-states", "5",
                 "--sum-rule", "0.999", "-j", "1", "-o", str(out)])
    assert code == EXIT_PARTIAL
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert [r["status"] for r in rows] == ["ok", "failed"]
    assert "SumRuleError" in rows[1]["error"]
    record = json.loads((out / rows[1]["directory"] / "error.json").read_text())
    assert record["error"] == "SumRuleError" and record["kappa"] == 20.0


@pytest.mark.parametrize("argv", [
    ["run", "-N", "40"],
    ["run", "--h", "-1"],
    ["run", "--bins", "1"],
    ["sweep", "-N", "41"],
    ["sweep", "--g-list", "a,b"],
    ["converge", "--n-list", "21,x"],
    ["converge", "--n-list", "20,22"],
    ["frobnicate"],
    [],
])
def test_config_errors_exit_1(argv, tmp_path):
    assert main([*argv, "-o", str(tmp_path)] if argv and argv[0] != "frobnicate" else argv) \
        == EXIT_CONFIG


def test_numeric_error_exit_2(tmp_path, capsys):
    code = main(["run", *SMALL, "-k", "20", "--n-states", "3", "-o", str(tmp_path)])
    assert code == EXIT_NUMERIC
    record = json.loads((tmp_path / "error.json").read_text())
    assert record["error"] == "SumRuleError" and record["exit_code"] == EXIT_NUMERIC
    assert "SumRuleError" in capsys.readouterr().err


def test_converge(tmp_path, capsys):
    code = main(["converge", "-g", "2.5", "-k", "0.7", "--n-list", "21,31,41", "--h-list",
                 "0.35", "-o", str(tmp_path)])
    assert code == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "convergence.csv").open()))
    assert [int(r["n_points"]) for r in rows] == [21, 31, 41]
    assert rows[0]["d_ground"] == ""
    assert "n_points" in capsys.readouterr().out


def test_tg_check(tmp_path):
    code = main(["tg-check", "-N", "41", "--h", "0.35", "-k", "0.7", "-o", str(tmp_path)])
    report = json.loads((tmp_path / "tg_check.json").read_text())
    assert report["g"] == 25.0
    assert report["sup_determinant_vs_sum"] < 1e-8
    assert code == (EXIT_OK if report["passed"] else EXIT_NUMERIC)
    data = np.loadtxt(tmp_path / "tg_check.csv", delimiter=",", skiprows=1)
    assert data.shape == (2001, 4)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lmquench", "run", *SMALL, "-k", "0",
                           "-o", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "manifest.json").exists()
