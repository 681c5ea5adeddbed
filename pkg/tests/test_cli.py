import csv
import json

import pytest

from ipdist.cli import EXIT_IO, EXIT_OK, EXIT_PRECONDITION, main, pair_paths, sweep_jobs


def gen(tmp_path, *args):
    out = str(tmp_path / "pair")
    assert main(["gen", *args, "--out", out]) == EXIT_OK
    return pair_paths(out)


def test_gen_planted_symmetric(tmp_path, capsys):
    pa, pb, meta = gen(tmp_path, "--kind", "planted_symmetric", "--n", "256", "--d", "4096", "--seed", "7")
    assert json.loads(meta.read_text())["true_distance"] == 4096
    assert pa.exists() and pb.exists()


def test_gen_decip(tmp_path):
    _, _, meta = gen(tmp_path, "--kind", "disjointness_decip", "--n", "64", "--t", "16", "--intersect", "1")
    assert json.loads(meta.read_text())["true_distance"] == 16


def test_gen_zero_identical(tmp_path):
    pa, pb, _ = gen(tmp_path, "--kind", "planted_random", "--n", "8", "--d", "0")
    assert pa.read_text() == pb.read_text()


def test_gen_invalid(tmp_path, capsys):
    assert main(["gen", "--kind", "planted_random", "--n", "4", "--d", "99", "--out", str(tmp_path / "x")]) == EXIT_PRECONDITION


def test_estimate_identical_zero(tmp_path, capsys):
    pa, pb, _ = gen(tmp_path, "--kind", "planted_random", "--n", "16", "--d", "0")
    capsys.readouterr()
    assert main(["estimate", str(pa), str(pb), "--preset", "relaxed"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["d_hat"] == 0


def test_estimate_planted(tmp_path, capsys):
    pa, pb, _ = gen(tmp_path, "--kind", "planted_symmetric", "--n", "256", "--d", "4096", "--seed", "7")
    capsys.readouterr()
    assert main(["estimate", str(pa), str(pb), "--preset", "relaxed", "--seed", "3"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert abs(doc["d_hat"] - 4096) / 4096 <= 0.5
    assert doc["effective_binary_total"] > 0 and doc["conforming"] is False


def test_estimate_guess_too_small(tmp_path, capsys):
    pa, pb, _ = gen(tmp_path, "--kind", "planted_symmetric", "--n", "16", "--d", "4")
    assert main(["estimate", str(pa), str(pb), "--mode", "guess:8"]) == EXIT_PRECONDITION
    assert "below psi" in capsys.readouterr().err


def test_estimate_modes_and_params(tmp_path, capsys):
    pa, pb, _ = gen(tmp_path, "--kind", "planted_random", "--n", "32", "--d", "50", "--seed", "2")
    params = tmp_path / "p.txt"
    params.write_text("epsilon = 0.5\npsi = 2\n")
    assert main(["estimate", str(pa), str(pb), "--mode", "trivial"]) == EXIT_OK
    assert main(["estimate", str(pa), str(pb), "--params", str(params)]) == EXIT_OK
    assert main(["estimate", str(pa), str(pb), "--mode", "symmetric"]) == EXIT_PRECONDITION
    assert main(["estimate", str(pa), str(pb), "--mode", "bogus"]) == EXIT_PRECONDITION
    assert main(["estimate", str(pa), str(tmp_path / "missing.txt")]) == EXIT_IO


def test_sweep_one_row(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"runs": [{"n": 32, "D": 40, "trials": 1}]}))
    out = tmp_path / "out.csv"
    assert main(["sweep", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1 and int(rows[0]["true_D"]) == 40


def test_sweep_jobs_ordering():
    jobs = sweep_jobs({"runs": [{"n": [128, 256], "D_fraction": 0.25, "trials": 2, "mode": "trivial"}]})
    assert [(j["n"], j["D"], j["seed"]) for j in jobs] == [
        (128, 4096, 0), (128, 4096, 1), (256, 16384, 0), (256, 16384, 1)]
    assert len(sweep_jobs({"runs": [{"n": 64, "D": 5, "seeds": [3, 9]}]}, trials=4)) == 4
    with pytest.raises(ValueError):
        sweep_jobs({"runs": [{"n": 8}]})


def test_sweep_parallel_matches_serial(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"runs": [{"n": 16, "D": 20, "trials": 3, "mode": "trivial"}]}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", str(cfg), "--out", str(a)]) == EXIT_OK
    assert main(["sweep", str(cfg), "--out", str(b), "--workers", "2"]) == EXIT_OK
    assert a.read_text() == b.read_text()


def test_sweep_bad_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert main(["sweep", str(cfg)]) == EXIT_PRECONDITION


def test_verify(tmp_path, capsys):
    pa, pb, meta = gen(tmp_path, "--kind", "planted_random", "--n", "16", "--d", "9", "--seed", "1")
    capsys.readouterr()
    assert main(["verify", str(pa), str(pb), "--sidecar", str(meta)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["D"] == 9 and doc["sidecar_match"] and doc["row_sum_identity"]
    assert doc["A_symmetric"] is False
    assert main(["verify", str(pa), str(pa)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["D"] == 0
