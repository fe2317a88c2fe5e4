import json

import numpy as np
import pytest

from deepabc import cli
from deepabc import evaluation as ev

MA2 = ["--model", "ma2", "--scale", "0.002", "--set", "nn.epochs=2", "--set", "nn.hidden=[16,16]"]
ISING = ["--model", "ising", "--set", "model.m=3", "--set", "model.burn_in=100",
         "--scale", "0.002", "--set", "nn.epochs=2", "--set", "nn.hidden=[8]"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def ma2_pipeline(d):
    assert run("simulate", *MA2, "--out", d / "data.bin") == 0
    assert run("simulate", *MA2, "--observed", "--theta", "0.6,0.2", "--out", d / "obs.json") == 0
    assert run("train", *MA2, "--data", d / "data.bin", "--method", "dnn", "--out", d / "dnn.ckpt",
               "--report", d / "report.csv", "--table", d / "table2.csv") == 0
    assert run("train", *MA2, "--data", d / "data.bin", "--method", "semiauto",
               "--out", d / "semi.ckpt") == 0
    for name, summary in (("dnn", d / "dnn.ckpt"), ("semi", d / "semi.ckpt"), ("ac", "ma2-autocov")):
        assert run("abc", *MA2, "--obs", d / "obs.json", "--summary", summary,
                   "--out", d / f"{name}.csv") == 0
    assert run("oracle", *MA2, "--obs", d / "obs.json", "--out", d / "exact.csv") == 0
    assert run("eval", "moments", *MA2, "--exact", d / "exact.csv", "--abc", "DNN", d / "dnn.csv",
               "--abc", "auto-cov", d / "ac.csv", "--out", d / "table3.csv") == 0
    assert run("eval", "mse", *MA2, "--exact", d / "exact.csv", d / "exact.csv",
               "--abc", "DNN", d / "dnn.csv", d / "dnn.csv", "--out", d / "table4.csv") == 0


@pytest.fixture(scope="module")
def ma2_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("ma2")
    ma2_pipeline(d)
    return d


def without_time(path):
    comments, header, rows = ev.read_table(path)
    keep = [i for i, c in enumerate(header) if c != "Time (s)"]
    return comments, [header[i] for i in keep], [[r[i] for i in keep] for r in rows]


def test_pipeline_outputs(ma2_run):
    _, header, rows = ev.read_table(ma2_run / "table3.csv")
    assert header == ev.TABLE3_COLUMNS
    assert [r[0] for r in rows] == ["Exact", "ABC (DNN)", "ABC (auto-cov)"]
    _, header, rows = ev.read_table(ma2_run / "table4.csv")
    assert header == ev.TABLE4_COLUMNS and rows[0][0] == "ABC (DNN)"
    exact = cli.read_exact(ma2_run / "exact.csv")[1].as_vector()
    abc = ev.moments(cli.read_draws(ma2_run / "dnn.csv")[1]).as_vector()
    np.testing.assert_allclose([float(v) for v in rows[0][1:]], (exact - abc) ** 2)
    _, header, _ = ev.read_table(ma2_run / "table2.csv")
    assert header == ev.TABLE2_COLUMNS
    side = json.loads((ma2_run / "dnn.json").read_text())
    assert side["n_accepted"] == 2 and side["summary"] == "dnn"


def test_outputs_record_hash_and_seed(ma2_run):
    h = cli.config_hash(cli.resolve_config(None, "ma2", 0.002, MA2[5::2]))
    for name in ("report.csv", "table2.csv", "dnn.csv", "exact.csv", "table3.csv", "table4.csv"):
        comments, _, _ = ev.read_table(ma2_run / name)
        assert comments["config_hash"] == h and "seed" in comments
    assert json.loads((ma2_run / "obs.json").read_text())["config_hash"] == h
    assert json.loads((ma2_run / "dnn.json").read_text())["config_hash"] == h


def test_pipeline_is_byte_identical(ma2_run, tmp_path):
    ma2_pipeline(tmp_path)
    for f in sorted(ma2_run.iterdir()):
        if f.name == "table2.csv":
            assert without_time(f) == without_time(tmp_path / f.name)
        else:
            assert f.read_bytes() == (tmp_path / f.name).read_bytes(), f.name


def test_mismatched_hash_is_refused_unless_forced(ma2_run, tmp_path, capsys):
    other = MA2 + ["--set", "abc.quantile=0.01"]
    args = ("abc", *other, "--obs", ma2_run / "obs.json", "--summary", "ma2-autocov",
            "--out", tmp_path / "x.csv")
    assert run(*args) == 2
    assert "--force" in capsys.readouterr().err
    assert run(*args, "--force") == 0


def test_empty_acceptance_exit_code(ma2_run, tmp_path):
    code = run("abc", *MA2, "--set", "abc.epsilon=0", "--force", "--obs", ma2_run / "obs.json",
               "--summary", "ma2-autocov", "--out", tmp_path / "e.csv")
    assert code == 4
    assert json.loads((tmp_path / "e.json").read_text())["status"] == "empty"
    # an empty result file cannot be evaluated
    code = run("eval", "moments", *MA2, "--force", "--exact", ma2_run / "exact.csv",
               "--abc", "x", tmp_path / "e.csv", "--out", tmp_path / "t.csv")
    assert code == 4


def test_usage_errors(tmp_path, capsys):
    assert run("simulate", "--model", "ma2", "--set", "data.n_train=0", "--out", tmp_path / "d") == 2
    assert "data.n_train" in capsys.readouterr().err
    assert run("simulate", "--model", "ma2", "--set", "nn.depth=3", "--out", tmp_path / "d") == 2
    assert "nn.depth" in capsys.readouterr().err
    assert run("simulate", "--model", "ma2", "--set", "nn.epochs=0", "--out", tmp_path / "d") == 2
    assert run("oracle", "--model", "ising", "--set", "model.m=5", "--out", tmp_path / "o") == 2
    assert "m <= 4" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        run("train", "--method", "cnn")
    assert exc.value.code == 2


def test_config_file_and_scale(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"model": "ising", "m": 4}, "nn": {"epochs": 7}}))
    cfg = cli.resolve_config(path, None, 0.1, ["abc.quantile=0.01"])
    assert cfg["model"]["m"] == 4 and cfg["nn"]["epochs"] == 7
    assert cfg["data"]["n_train"] == 100_000 and cfg["abc"]["n_proposals"] == 100_000
    assert cfg["abc"]["quantile"] == 0.01
    assert cfg["prior"] == {"kind": "exponential", "mean": 0.4406}
    assert cli.config_hash(cfg) == cli.config_hash(json.loads(json.dumps(cfg)))


def test_default_configs_mirror_reference_settings():
    for tag in ("ising", "ma2"):
        cfg = cli.default_config(tag)
        assert cfg["data"] == {"n_train": 10**6, "n_val": 10**5, "n_test": 10**5}
        assert cfg["nn"]["hidden"] == [100, 100, 100] and cfg["nn"]["ffnn_hidden"] == [100]
        assert cfg["nn"]["epochs"] == 200
        assert cfg["abc"]["quantile"] == 0.001 and cfg["abc"]["n_proposals"] == 10**6
    assert cli.default_config("ma2")["model"]["p"] == 100
    assert cli.default_config("ma2")["semiauto"]["basis"] == "poly4"
    assert cli.default_config("ising")["model"]["m"] == 10


def test_ising_pipeline(tmp_path, monkeypatch):
    monkeypatch.setenv("DEEPABC_THREADS", "2")
    d = tmp_path
    assert run("simulate", *ISING, "--out", d / "data.bin") == 0
    assert run("simulate", *ISING, "--observed", "--theta", "0.5", "--out", d / "obs.json") == 0
    assert run("train", *ISING, "--data", d / "data.bin", "--method", "ffnn", "--out", d / "m.ckpt",
               "--table", d / "t1.csv") == 0
    _, header, _ = ev.read_table(d / "t1.csv")
    assert header == ev.TABLE1_COLUMNS
    assert run("oracle", *ISING, "--obs", d / "obs.json", "--out", d / "oracle.csv") == 0
    comments, header, rows = ev.read_table(d / "oracle.csv")
    assert header == ["S_star", "posterior_mean"] and "observed_S_star" in comments
    means = [float(r[1]) for r in rows]
    assert means == sorted(means)
    assert run("eval", "monotonicity", *ISING, "--data", d / "data.bin",
               "--summary", "exact-posterior-mean", "--out", d / "mono.csv") == 0
    comments, header, _ = ev.read_table(d / "mono.csv")
    assert header == ["S_star", "S", "count"] and float(comments["spearman_rho"]) == 1.0
    eps0 = ISING + ["--set", "abc.epsilon=0"]
    assert run("simulate", *eps0, "--observed", "--theta", "0.5", "--out", d / "obs0.json") == 0
    assert run("abc", *eps0, "--obs", d / "obs0.json", "--summary", "ising-sufficient",
               "--out", d / "exact.csv") == 0
    side = json.loads((d / "exact.json").read_text())
    assert side["realized_epsilon"] == 0 and side["n_accepted"] > 0


def test_summary_dimension_checked(ma2_run, tmp_path, capsys):
    code = run("abc", *MA2, "--set", "model.p=50", "--force", "--obs", ma2_run / "obs.json",
               "--summary", ma2_run / "dnn.ckpt", "--out", tmp_path / "x.csv")
    assert code == 2
