import json
import math

import numpy as np
import pytest

from qgeo.cli import main
from qgeo.dataset import load_dataset, load_distance_matrix, load_embedding


@pytest.fixture()
def workdir(tmp_path):
    cfg = dict(epsilon=math.exp(-2.5), alpha=1.0, dt=0.1, n_prop=5, n_coll=4, k_clusters=3, layout_iters=100)
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_full_pipeline(workdir, capsys):
    d = workdir
    assert run("sample", "sphere", "--n", 300, "--seed", 1, "--out", d / "s.bin") == 0
    assert load_dataset(d / "s.bin").n_samples == 300
    assert run("laplacian", "--config", d / "cfg.json", "--data", d / "s.bin", "--out", d / "spec.bin") == 0
    assert run("geodesics", "--config", d / "cfg.json", "--data", d / "s.bin", "--spectral", d / "spec.bin",
               "--out", d / "g.csv") == 0
    G = load_distance_matrix(d / "g.csv")
    assert G.n == 300 and G.n_edges > 0
    assert run("embed", "--config", d / "cfg.json", "--g", d / "g.csv", "--out", d / "e.csv") == 0
    assert run("cluster", "--config", d / "cfg.json", "--embedding", d / "e.csv", "--out", d / "c.csv") == 0
    _, coords = load_embedding(d / "c.csv")
    assert coords.shape == (300, 3)
    header = (d / "c.csv").read_text().splitlines()[0]
    assert header == "id,x,y,z,cluster"
    clusters = {line.rsplit(",", 1)[1] for line in (d / "c.csv").read_text().splitlines()[1:]}
    assert clusters == {"0", "1", "2"}
    out = capsys.readouterr().out
    assert "inertia" in out


def test_geodesics_with_and_without_spectral_file_agree(workdir):
    d = workdir
    run("sample", "torus", "--n", 200, "--seed", 2, "--out", d / "t.csv")
    run("laplacian", "--config", d / "cfg.json", "--data", d / "t.csv", "--out", d / "spec.bin")
    run("geodesics", "--config", d / "cfg.json", "--data", d / "t.csv", "--spectral", d / "spec.bin",
        "--out", d / "a.csv")
    run("geodesics", "--config", d / "cfg.json", "--data", d / "t.csv", "--out", d / "b.csv")
    assert (d / "a.csv").read_bytes() == (d / "b.csv").read_bytes()


def test_scan_writes_grid(workdir, capsys):
    d = workdir
    run("sample", "sphere", "--n", 400, "--out", d / "s.csv")
    assert run("scan", "--config", d / "cfg.json", "--data", d / "s.csv", "--out", d / "scan.csv",
               "--log-eps-min", -3, "--log-eps-max", -2, "--alpha-min", 1.0, "--alpha-max", 1.4,
               "--probes", 8) == 0
    rows = (d / "scan.csv").read_text().splitlines()
    assert rows[0] == "epsilon,log_epsilon,alpha,h,deviation"
    assert len(rows) == 1 + 3 * 3
    sel = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    grid = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    best = grid[np.argmin(grid[:, 4])]
    assert sel["epsilon"] == pytest.approx(best[0]) and sel["alpha"] == pytest.approx(best[2])


def test_errors_return_nonzero(workdir, capsys):
    d = workdir
    assert run("laplacian", "--config", d / "cfg.json", "--data", d / "missing.csv", "--out", d / "x") == 1
    (d / "bad.csv").write_text("x,y\n0,0\n1,oops\n")
    assert run("laplacian", "--config", d / "cfg.json", "--data", d / "bad.csv", "--out", d / "x") == 1
    assert "row 3" in capsys.readouterr().err
