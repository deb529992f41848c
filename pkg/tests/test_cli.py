import csv
import json

import numpy as np
import pytest

from crossmatch import cli


@pytest.fixture
def data_files(tmp_path, rng):
    X = np.r_[rng.normal(size=(30, 2)), rng.normal(size=(30, 2)) + 6]
    y = np.repeat([1, 2], 30)
    xp = tmp_path / "x.csv"
    np.savetxt(xp, X, delimiter=",", header="u,v", comments="")
    yp = tmp_path / "y.csv"
    np.savetxt(yp, y, fmt="%d")
    return tmp_path, X, y, xp, yp


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_test_command(data_files, capsys):
    tmp, X, y, xp, yp = data_files
    code, out, err = run(["test", "--data", xp, "--labels", yp,
                          "--method", "mmcm"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["p_value"] < 0.05 and d["reject"] is True
    assert d["classes"] == [1, 2]
    assert d["df"] == 1


def test_test_command_byte_identical(data_files, capsys):
    tmp, X, y, xp, yp = data_files
    argv = ["test", "--data", xp, "--labels", yp, "--calibration",
            "permutation", "--perms", "99", "--seed", "4", "--format", "csv"]
    outs = [run(argv, capsys)[1] for _ in range(2)]
    assert outs[0] == outs[1]
    assert outs[0].startswith("key,value\n")


def test_label_column(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("a,b,grp\n0,0,1\n0,1,1\n5,5,2\n5,6,2\n")
    code, out, _ = run(["test", "--data", p, "--label-column", "grp",
                        "--calibration", "exact"], capsys)
    assert code == 0
    assert json.loads(out)["p_value"] == pytest.approx(1 / 3)


def test_distances_input(tmp_path, capsys):
    D = np.array([[0, 1, 9, 9], [1, 0, 9, 9], [9, 9, 0, 1], [9, 9, 1, 0]],
                 dtype=float)
    dp = tmp_path / "d.csv"
    np.savetxt(dp, D, delimiter=",")
    lp = tmp_path / "l.csv"
    lp.write_text("1\n1\n2\n2\n")
    code, out, _ = run(["test", "--distances", dp, "--labels", lp,
                        "--method", "mcm", "--calibration", "exact"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["count_matrix"] == [[1, 0], [0, 1]]
    assert d["p_value"] == pytest.approx(1 / 3)
    D[0, 3] += 1e-3
    np.savetxt(dp, D, delimiter=",")
    code, _, err = run(["test", "--distances", dp, "--labels", lp], capsys)
    assert code == cli.EXIT_PARSE and err.startswith("error[parse]:")
    assert "symmetric" in err


def test_parse_errors(tmp_path, data_files, capsys):
    tmp, X, y, xp, yp = data_files
    short = tmp_path / "short.csv"
    short.write_text("1\n1\n2\n")
    code, _, err = run(["test", "--data", xp, "--labels", short], capsys)
    assert code == cli.EXIT_PARSE
    assert "3" in err and "60" in err
    ragged = tmp_path / "r.csv"
    ragged.write_text("1,2\n3\n")
    code, _, err = run(["test", "--data", ragged, "--labels", short], capsys)
    assert code == cli.EXIT_PARSE and "r.csv:2" in err
    bad = tmp_path / "b.csv"
    bad.write_text("1,2\n3,x\n")
    code, _, err = run(["test", "--data", bad, "--labels", short], capsys)
    assert code == cli.EXIT_PARSE and "b.csv:2" in err
    assert len(err.strip().splitlines()) == 1


def test_precondition_and_usage(data_files, capsys):
    tmp, X, y, xp, yp = data_files
    code, _, err = run(["test", "--data", xp, "--labels", yp,
                        "--calibration", "exact"], capsys)
    assert code == cli.EXIT_PRECONDITION
    assert err.startswith("error[precondition]:")
    with pytest.raises(SystemExit) as exc:
        cli.main(["test", "--method", "bogus"])
    assert exc.value.code == cli.EXIT_USAGE


def test_exact_null_command(capsys, tmp_path):
    code, out, _ = run(["exact-null", "--sizes", "2,2"], capsys)
    assert code == 0
    pmf = json.loads(out)["pmf"]
    assert sorted(e["probability_exact"] for e in pmf) == ["1/3", "2/3"]
    out_path = tmp_path / "pmf.csv"
    code, _, _ = run(["exact-null", "--sizes", "2,2", "--format", "csv",
                      "--out", out_path], capsys)
    rows = list(csv.DictReader(open(out_path)))
    assert {r["probability_exact"] for r in rows} == {"1/3", "2/3"}


def test_power_command(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "2")
    argv = ["power", "--family", "normal-location", "--K", "2", "--d", "2",
            "--delta", "0,3", "--sizes", "10,10", "--reps", "5",
            "--format", "csv"]
    code, out, _ = run(argv, capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3 and lines[0].startswith("family,")
    assert run(argv, capsys)[1] == out
    grid = tmp_path / "g.json"
    grid.write_text(json.dumps({"family": "normal-location", "K": 2, "d": 2,
                                "delta": [0.0], "sizes": [10, 10],
                                "replicates": 3}))
    code, out, _ = run(["power", "--grid", grid], capsys)
    assert code == 0 and json.loads(out)[0]["replicates"] == 3
    code, _, err = run(["power", "--family", "normal-location"], capsys)
    assert code == cli.EXIT_PARSE


def test_bad_thread_env(capsys, monkeypatch, data_files):
    tmp, X, y, xp, yp = data_files
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    code, _, err = run(["test", "--data", xp, "--labels", yp], capsys)
    assert code == cli.EXIT_PARSE and cli.THREADS_ENV in err


def test_gamma_and_clt_commands(capsys):
    code, out, _ = run(["gamma", "--family", "normal-location", "--K", "3",
                        "--d", "2", "--delta", "0", "--mc-samples", "2000"],
                       capsys)
    assert code == 0
    d = json.loads(out)
    assert np.array(d["Gamma"]).shape == (3, 3)
    assert d["aggregate"] == pytest.approx(1 / 3)
    code, out, _ = run(["gamma", "--family", "normal-location", "--d", "2",
                        "--delta", "1", "--mc-samples", "2000", "--format",
                        "csv"], capsys)
    assert code == 0 and "Gamma[1,1]" in out and "aggregate" in out
    code, out, _ = run(["clt-check", "--family", "normal-location", "--d", "2",
                        "--delta", "1", "--sizes", "30,20", "--reps", "5",
                        "--mc-samples", "5000"], capsys)
    assert code == 0 and json.loads(out)["replicates"] == 5
    code, _, err = run(["clt-check", "--family", "normal-location", "--K",
                        "3", "--d", "2", "--delta", "1"], capsys)
    assert code == cli.EXIT_PRECONDITION


def test_odd_n_logged(tmp_path, capsys, rng):
    X = rng.normal(size=(7, 2))
    xp = tmp_path / "x.csv"
    np.savetxt(xp, X, delimiter=",")
    yp = tmp_path / "y.csv"
    yp.write_text("a\na\na\na\nb\nb\nb\n")
    code, out, err = run(["test", "--data", xp, "--labels", yp], capsys)
    assert code == 0
    assert "dropped row" in err and "group a" in err
    assert json.loads(out)["sizes"] == [3, 3]
