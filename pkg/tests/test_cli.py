import csv
import json

import numpy as np
import pytest

from pdfm import (
    Grouping,
    Matching,
    PersistenceDiagram,
    brute_force_optimal_grouping,
    find_flat_grouping,
    turner_mean,
    w2_distance,
)
from pdfm.cli import dispatch
from pdfm.grouping import FlatnessReport, check_flatness, variance_definitional
from pdfm.instances import random_diagram


def run(capsys, *argv):
    code = dispatch([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(path, dgm):
    path.write_text(json.dumps(dgm.to_json()))
    return path


def test_dist_self_is_zero(tmp_path, capsys):
    a = write(tmp_path / "A.json", PersistenceDiagram([(0, 2), (1, 5)]))
    code, out, _ = run(capsys, "dist", a, a)
    assert code == 0
    assert out.strip() == "0"


def test_dist_json_round_trip(tmp_path, capsys, rng):
    a, b = random_diagram(rng, min_points=2), random_diagram(rng, min_points=2)
    pa, pb = write(tmp_path / "a.json", a), write(tmp_path / "b.json", b)
    code, out, _ = run(capsys, "dist", pa, pb, "--json")
    assert code == 0
    payload = json.loads(out)
    dist, match = w2_distance(a, b)
    assert payload["distance"] == dist
    m = Matching.from_json(payload["matching"], a, b)
    assert m.pairs == match.pairs
    assert set(payload["manifest"]) == {"command_line", "seed", "tool_version", "input_digests", "timestamp"}


def test_dist_oracle_and_matching_out(tmp_path, capsys, square):
    a, b = write(tmp_path / "a.json", square[0]), write(tmp_path / "b.json", square[1])
    out_path = tmp_path / "m.json"
    code, out, _ = run(capsys, "dist", a, b, "--oracle", "--matching-out", out_path)
    assert code == 0
    assert float(out) == pytest.approx(2 * np.sqrt(2), abs=1e-12)
    saved = json.loads(out_path.read_text())
    assert saved["matching"]["n_optima"] == 2


def test_flatness_square(write_dir, capsys, square):
    code, out, _ = run(capsys, "flatness", write_dir(square, "square"))
    assert code == 0
    assert out.splitlines()[0] == "flat: false"


def test_flatness_emits_grouping(write_dir, tmp_path, capsys, two_cluster):
    g_path = tmp_path / "G.json"
    code, out, _ = run(capsys, "flatness", write_dir(two_cluster), "--emit-grouping", g_path, "--json")
    assert code == 0
    payload = json.loads(out)
    assert payload["flat"] is True
    g = Grouping.from_json(json.loads(g_path.read_text()), two_cluster)
    assert g == find_flat_grouping(two_cluster)
    rep = check_flatness(g)
    assert payload["report"]["witness_lambda"] == rep.witness_lambda


def test_mean_brute_over_cap(write_dir, capsys):
    dgms = [PersistenceDiagram([(k, k + 3 + j) for k in range(4)]) for j in range(3)]
    code, _, err = run(capsys, "mean", write_dir(dgms), "--algorithm", "brute")
    assert code == 1
    assert "12" in err and "cap" in err and "PDFM_BRUTE_CAP" in err


def test_mean_brute_square(write_dir, capsys, square):
    code, out, _ = run(capsys, "mean", write_dir(square), "--algorithm", "brute", "--json")
    assert code == 0
    payload = json.loads(out)
    g, var, n_opt = brute_force_optimal_grouping(square)
    assert payload["variance"] == var
    assert payload["n_optima"] == n_opt == 2
    assert payload["unique_certified"] is False
    assert Grouping.from_json(payload["grouping"], square) == g


def test_mean_turner_round_trip(write_dir, tmp_path, capsys, two_cluster):
    out_path = tmp_path / "mean.json"
    code, out, _ = run(capsys, "mean", write_dir(two_cluster), "--init", "2", "--out", out_path, "--json")
    assert code == 0
    payload = json.loads(out)
    res = turner_mean(two_cluster, init=1)
    assert PersistenceDiagram.from_json(payload["mean"]) == res.mean
    assert payload["variance"] == res.variance
    assert json.loads(out_path.read_text())["variance"] == res.variance


def test_mean_random_init_prints_seed(write_dir, capsys, flat3):
    code, _, err = run(capsys, "mean", write_dir(flat3), "--init", "random")
    assert code == 0
    assert err.startswith("seed: ")


def test_variance(write_dir, tmp_path, capsys, square):
    d = write_dir(square)
    g = Grouping(square, [[0, 0], [1, 1]])
    gp = tmp_path / "G.json"
    gp.write_text(json.dumps(g.to_json()))
    code, out, _ = run(capsys, "variance", gp, "--diagrams", d, "--json")
    assert code == 0
    payload = json.loads(out)
    assert payload["variance_definitional"] == variance_definitional(g) == 2.0


def test_converge_csv_and_manifest(write_dir, tmp_path, capsys, flat3):
    d = write_dir(flat3)
    csv_path = tmp_path / "report.csv"
    argv = ["converge", d, "--B", "1,2,4", "--trials", "50", "--seed", "42", "--out", csv_path]
    code, _, _ = run(capsys, *argv)
    assert code == 0
    first = csv_path.read_bytes()
    rows = list(csv.DictReader(first.decode().splitlines()))
    assert [int(r["B"]) for r in rows] == [1, 2, 4]
    assert all(int(r["seed"]) == 42 for r in rows)
    man = json.loads((tmp_path / "report.csv.manifest.json").read_text())
    assert man["seed"] == 42 and "PCG64" in man["rng"]
    run(capsys, *argv)
    assert csv_path.read_bytes() == first


def test_converge_generates_seed(write_dir, capsys, flat3):
    code, out, err = run(capsys, "converge", write_dir(flat3), "--B", "1,2", "--trials", "5")
    assert code == 0
    seed = int(err.split("seed:")[1])
    assert f",{seed}" in out


def test_hugging_and_barycheck(write_dir, tmp_path, capsys, two_cluster):
    d = write_dir(two_cluster)
    w = tmp_path / "w.json"
    w.write_text("[0.2, 0.3, 0.5]")
    code, out, _ = run(capsys, "hugging", d, "--y", w, "--json")
    assert code == 0
    payload = json.loads(out)
    assert all(abs(k - 1) <= 1e-9 for k in payload["kappa"])
    assert payload["residual"] <= 1e-9
    code, out, _ = run(capsys, "barycheck", d, "--json")
    assert code == 0
    assert json.loads(out)["residual"] <= 1e-12
    c = write(tmp_path / "c.json", two_cluster[0])
    code, out, _ = run(capsys, "barycheck", d, "--candidate", c, "--json")
    assert json.loads(out)["lhs"] > 1e-6


def test_hugging_rejects_non_flat(write_dir, tmp_path, capsys, square):
    w = tmp_path / "w.json"
    w.write_text("[0.5, 0.5]")
    code, _, err = run(capsys, "hugging", write_dir(square), "--y", w)
    assert code == 1
    assert "flat" in err


def test_oracle(write_dir, capsys, flat3):
    code, out, _ = run(capsys, "oracle", write_dir(flat3))
    assert code == 0
    assert "n_optima: 1" in out
    assert "flat_certified: true" in out


def test_missing_subcommand(capsys):
    assert run(capsys)[0] == 2


def test_unknown_subcommand_usage_on_stderr(capsys):
    code = dispatch(["frobnicate"])
    out, err = capsys.readouterr()
    assert code == 2
    assert out == ""
    assert "usage:" in err


def test_bad_input_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"points": [[3, 1]]}')
    code, _, err = run(capsys, "dist", bad, bad)
    assert code == 1
    assert "death <= birth" in err
    code, _, _ = run(capsys, "dist", tmp_path / "missing.json", bad)
    assert code == 1
