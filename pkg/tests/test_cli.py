import json
import subprocess
import sys

import numpy as np
import pytest

from tangentot import io
from tangentot.cli import main
from tangentot.manifold import Euclidean
from tangentot.measure import DiscreteMeasure

E1 = Euclidean(1)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == 0 and out.strip().startswith("{") else out)


@pytest.fixture
def pair(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_measure(a, DiscreteMeasure(E1, [[0.0]], [1.0]))
    io.write_measure(b, DiscreteMeasure(E1, [[np.pi / 2]], [1.0]))
    return a, b


def test_dist_identical_w2(tmp_path, capsys):
    p = tmp_path / "m.csv"
    rng = np.random.default_rng(0)
    io.write_measure(p, DiscreteMeasure(Euclidean(2), rng.random((6, 2)), np.full(6, 1 / 6)))
    code, rep = run(capsys, "dist", p, p, "--metric", "w2", "--epsilon-target", "1e-4")
    assert code == 0
    assert rep["distance_sq"] < 10 * rep["epsilon"]


def test_dist_dirac_hk_and_shk(pair, tmp_path, capsys):
    a, b = pair
    code, rep = run(capsys, "dist", a, b, "--metric", "hk", "--kappa", 1, "--out", tmp_path / "o",
                    "--save-plan")
    assert code == 0
    assert rep["hk_sq"] == pytest.approx(2.0, abs=1e-3)
    for f in ("dist.json", "plan.csv", "phi0.csv", "phi1.csv", "config.json"):
        assert (tmp_path / "o" / f).exists()
    code, rep = run(capsys, "dist", a, b, "--metric", "shk", "--kappa", 1)
    assert rep["distance"] == pytest.approx(np.pi / 2, abs=1e-3)


def test_exit_codes(pair, tmp_path, capsys):
    a, b = pair
    assert main(["dist", str(a), str(tmp_path / "missing.csv"), "--metric", "w2"]) == 2
    assert main(["dist", str(a), str(b), "--metric", "hk"]) == 2  # kappa missing
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,mass\n0,zzz\n")
    assert main(["dist", str(a), str(bad), "--metric", "w2"]) == 2
    c = tmp_path / "c.csv"
    io.write_measure(c, DiscreteMeasure(E1, [[0.0], [1.0]], [0.5, 0.5]))
    d = tmp_path / "d.csv"
    io.write_measure(d, DiscreteMeasure(E1, [[0.3], [1.4]], [0.2, 0.8]))
    assert main(["dist", str(c), str(d), "--metric", "hk", "--kappa", "1",
                 "--epsilon-target", "1e-6", "--max-iters", "1"]) == 3
    big = tmp_path / "big.csv"
    io.write_measure(big, DiscreteMeasure(E1, np.arange(7.0)[:, None], np.full(7, 1 / 7)))
    assert main(["oracle", "balanced", "--mu0", str(big), "--mu1", str(big)]) == 4
    capsys.readouterr()


def test_log_exp_round_trip(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_measure(a, DiscreteMeasure(E1, [[0.0]], [1.0]))
    io.write_measure(b, DiscreteMeasure(E1, [[0.7]], [1.0]))
    t = tmp_path / "t" / "tan.csv"
    out = tmp_path / "t" / "back.csv"
    assert run(capsys, "log", a, b, "--metric", "hk", "--kappa", 1, "--epsilon-target", 1e-9,
               "--out", t)[0] == 0
    assert run(capsys, "exp", t, "--out", out)[0] == 0
    back = io.read_measure(out)
    np.testing.assert_allclose(back.points, [[0.7]], atol=1e-8)
    np.testing.assert_allclose(back.masses, [1.0], atol=1e-8)
    assert (tmp_path / "t" / "config.json").exists()


def test_exp_of_zero_tangent_reproduces_input(tmp_path, capsys):
    a = tmp_path / "a.csv"
    io.write_measure(a, DiscreteMeasure(E1, [[0.0], [1.0]], [0.25, 0.75]))
    t = tmp_path / "t" / "tan.csv"
    assert run(capsys, "log", a, a, "--metric", "w2", "--epsilon-target", 1e-3, "--out", t)[0] == 0
    tan, _ = io.read_tangent(t)
    io.write_tangent(t, tan.combine(0.0), "w2")
    run(capsys, "exp", t, "--out", tmp_path / "back.csv")
    assert (tmp_path / "back.csv").read_text() == a.read_text()


def test_geodesic_mass_law(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_measure(a, DiscreteMeasure(E1, [[0.0]], [1.0]))
    io.write_measure(b, DiscreteMeasure(E1, [[0.9]], [1.0]))
    code, rep = run(capsys, "geodesic", a, b, "--metric", "hk", "--kappa", 1,
                    "--epsilon-target", 1e-9, "--times", "0,0.5,1", "--out", tmp_path / "g")
    assert code == 0
    hk2 = 2 * (1 - np.cos(0.9))
    assert rep["masses"][1] == pytest.approx(1 - 0.25 * hk2, abs=1e-6)
    assert len(list((tmp_path / "g").glob("geodesic_*.csv"))) == 3


@pytest.fixture(scope="module")
def diskline(tmp_path_factory):
    d = tmp_path_factory.mktemp("dl")
    assert main(["gen-data", "disk-line", "--out", str(d), "--count", "12", "--seed", "0"]) == 0
    return d


def test_pca_disk_line_thresholds(diskline, tmp_path, capsys):
    code, hk = run(capsys, "pca", diskline, "--metric", "hk", "--kappa", 2, "--out", tmp_path / "hk")
    assert code == 0
    code, shk = run(capsys, "pca", diskline, "--metric", "shk", "--kappa", 2, "--out", tmp_path / "shk")
    assert code == 0
    assert hk["lambda2_over_lambda1"] > 0.05
    assert shk["lambda2_over_lambda1"] < 0.02
    h, ev = io.read_table(tmp_path / "hk" / "eigenvalues.csv")
    assert h == ["index", "eigenvalue", "explained_variance_ratio"]
    assert ev[:, 2].sum() == pytest.approx(1.0)
    for f in ("projections.csv", "mean.csv", "mode_000.csv", "pca.json", "config.json"):
        assert (tmp_path / "hk" / f).exists()


def test_outputs_are_deterministic(diskline, tmp_path, capsys):
    for k in (1, 2):
        run(capsys, "gen-data", "disk-line", "--out", tmp_path / f"g{k}", "--count", 3, "--seed", 5)
        run(capsys, "pca", tmp_path / f"g{k}", "--metric", "hk", "--kappa", 2, "--out", tmp_path / f"p{k}")
    # config.json echoes the output path, so it differs by design
    for f in sorted(p for p in (tmp_path / "g1").iterdir() if p.name != "config.json"):
        assert f.read_bytes() == (tmp_path / "g2" / f.name).read_bytes()
    for f in ("eigenvalues.csv", "projections.csv", "mode_000.csv"):
        assert (tmp_path / "p1" / f).read_bytes() == (tmp_path / "p2" / f).read_bytes()


def test_shoot_sigma_zero_one_raster(tmp_path, capsys):
    d = tmp_path / "dirac"
    run(capsys, "gen-data", "dirac-line", "--out", d, "--count", 9)
    code, rep = run(capsys, "shoot", d, "--metric", "hk", "--kappa", 6, "--sigma", 0,
                    "--out", tmp_path / "s", "--epsilon-target", 1e-6)
    assert code == 0
    assert rep["times"] == [0.0]
    assert len(list((tmp_path / "s").glob("raster_*.pgm"))) == 1
    code, rep = run(capsys, "shoot", d, "--metric", "hk", "--kappa", 6, "--steps", 3,
                    "--out", tmp_path / "s3", "--epsilon-target", 1e-6, "--grid-res", 16)
    assert len(list((tmp_path / "s3").glob("raster_*.pgm"))) == 3
    assert io.read_pgm(tmp_path / "s3" / "raster_000.pgm").shape == (1, 16)


def test_study_kappa_gap_table(pair, tmp_path, capsys):
    a = pair[0]
    b = tmp_path / "d1.csv"
    io.write_measure(b, DiscreteMeasure(E1, [[1.0]], [1.0]))
    code, rep = run(capsys, "study", "kappa", "--mu0", a, "--mu1", b, "--kappas", "2,5,10,20,50",
                    "--epsilon-target", 1e-4, "--out", tmp_path / "k")
    assert code == 0
    k = np.array([2, 5, 10, 20, 50.0])
    np.testing.assert_allclose(rep["series"]["v_gap"], np.abs(k * np.sin(1 / k) - 1), atol=1e-3)
    np.testing.assert_allclose(rep["series"]["alpha_norm"], 2 * (1 - np.cos(1 / k)), atol=1e-3)
    assert (tmp_path / "k" / "kappa.csv").exists() and (tmp_path / "k" / "kappa.json").exists()


def test_study_convexity_equality(tmp_path, capsys):
    code, rep = run(capsys, "study", "convexity", "--metric", "w2", "--manifold", "euclidean",
                    "--out", tmp_path / "c")
    assert code == 0
    assert rep["notes"]["verdict"] == "equality"
    code, rep = run(capsys, "study", "convexity", "--metric", "w2", "--manifold", "hyperbolic")
    assert rep["notes"]["verdict"] == "violated"


def test_study_refine_self(tmp_path, capsys):
    p = tmp_path / "m.csv"
    x = np.linspace(0, 4, 128)[:, None]
    w = np.exp(-((x[:, 0] - 1.5) ** 2) / 0.1)
    io.write_measure(p, DiscreteMeasure(E1, x, w / w.sum()))
    eps = 1e-3
    code, rep = run(capsys, "study", "refine", "--mu0", p, "--mu1", p, "--metric", "hk",
                    "--kappa", 1, "--epsilon-target", eps, "--resolutions", "8,16,32",
                    "--bounds=0,4")
    assert code == 0
    assert max(rep["series"]["deviation"]) < 10 * eps


def test_config_file_and_override(pair, tmp_path, capsys):
    a, b = pair
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"metric": "hk", "kappa": 1.0, "epsilon_target": 1e-3}))
    code, rep = run(capsys, "dist", a, b, "--config", cfg, "--out", tmp_path / "o")
    assert rep["epsilon"] == 1e-3
    code, rep = run(capsys, "dist", a, b, "--config", cfg, "--epsilon-target", 1e-4)
    assert rep["epsilon"] == 1e-4
    echoed = io.read_json(tmp_path / "o" / "config.json")
    assert echoed["kappa"] == 1.0 and echoed["metric"] == "hk"


def test_oracle_dirac(capsys):
    code, rep = run(capsys, "oracle", "dirac", "--m0", 4, "--m1", 1, "--d", 0, "--kappa", 1)
    assert code == 0 and rep["value"] == pytest.approx(1.0)


def test_module_entry_point(pair):
    a, _ = pair
    r = subprocess.run([sys.executable, "-m", "tangentot.cli", "dist", str(a), str(a),
                        "--metric", "w2", "--epsilon-target", "1e-3"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert json.loads(r.stdout)["distance_sq"] < 1e-2
    r = subprocess.run([sys.executable, "-m", "tangentot.cli", "--help"], capture_output=True, text=True)
    assert "oracle" not in r.stdout
    for cmd in ("dist", "log", "exp", "geodesic", "pca", "shoot", "study", "gen-data"):
        assert cmd in r.stdout
