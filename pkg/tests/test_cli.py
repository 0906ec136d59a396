import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dhsic.cli import main, parse_csv, parse_group_spec, plot_rows, write_csv
from dhsic.dataset import Dataset
from dhsic.errors import GroupSpecError, NonIntegerDiscrete, ParseError


@pytest.fixture
def h0_csv(tmp_path):
    x = np.random.default_rng(0).standard_normal((50, 3))
    path = tmp_path / "h0.csv"
    write_csv(str(path), Dataset.from_blocks(list(x.T)))
    return str(path)


@pytest.fixture
def const_csv(tmp_path):
    path = tmp_path / "const.csv"
    path.write_text("a,b,c\n" + "1,2,3\n" * 20)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_group_specs(h0_csv, tmp_path):
    ds = parse_csv(h0_csv, "1;2;3")
    assert ds.d == 3 and ds.kinds == ("continuous",) * 3
    path = tmp_path / "m.csv"
    path.write_text("a,b,c\n0.5,1.5,2\n0.1,0.2,3\n0.7,0.3,2\n")
    ds = parse_csv(str(path), "1-2;3:d")
    assert ds.d == 2 and ds.block(0).shape == (3, 2) and ds.kinds == ("continuous", "discrete")
    with pytest.raises(GroupSpecError):
        parse_csv(h0_csv, "1-2;2")
    with pytest.raises(GroupSpecError):
        parse_csv(h0_csv, "1;2")
    with pytest.raises(GroupSpecError):
        parse_csv(h0_csv, "1;2;4")
    with pytest.raises(GroupSpecError):
        parse_group_spec("1;x", 2)
    with pytest.raises(NonIntegerDiscrete):
        parse_csv(h0_csv, "1;2;3:d")


def test_parse_errors_locate_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(ParseError) as err:
        parse_csv(str(path))
    assert err.value.row == 3 and err.value.col == 2
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(ParseError) as err:
        parse_csv(str(path))
    assert err.value.row == 3
    path.write_text("a,b\n")
    with pytest.raises(ParseError):
        parse_csv(str(path))


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.lists(st.sampled_from(["c1", "c2", "d"]), min_size=2, max_size=4))
def test_csv_round_trip(tmp_path, seed, n, layout):
    rng = np.random.default_rng(seed)
    blocks, kinds = [], []
    for kind in layout:
        if kind == "d":
            blocks.append(rng.integers(-5, 5, n).astype(float))
            kinds.append("discrete")
        else:
            blocks.append(rng.standard_normal((n, int(kind[1]))) * 10.0 ** rng.integers(-8, 8))
            kinds.append("continuous")
    ds = Dataset.from_blocks(blocks, kinds)
    path = str(tmp_path / "rt.csv")
    spec = write_csv(path, ds)
    assert parse_csv(path, spec).equals(ds)


def test_permutation_json(capsys, h0_csv):
    code, out, err = run(capsys, "test", "--input", h0_csv, "--method", "permutation", "--B", "99", "--alpha", "0.05")
    assert code == 0 and err == ""
    rec = json.loads(out)
    assert list(rec) == ["method", "n", "d", "statistic", "p_value", "crit_value", "reject", "alpha", "B", "seed",
                         "bandwidths"]
    assert rec["p_value"] >= 1 / 100
    assert rec["B"] == 99 and rec["n"] == 50 and rec["d"] == 3


def test_gamma_identical_rows_exit_3(capsys, const_csv):
    code, out, err = run(capsys, "test", "--input", const_csv, "--method", "gamma")
    assert code == 3 and out == ""
    assert "DegenerateMoments" in err


def test_input_errors_exit_2(capsys, h0_csv, tmp_path):
    assert run(capsys, "test", "--input", h0_csv, "--groups", "1-2;2")[0] == 2
    assert run(capsys, "test", "--input", str(tmp_path / "missing.csv"))[0] == 2
    assert run(capsys, "test", "--input", h0_csv, "--groups", "1-2;3", "--method", "bmr")[0] == 2
    assert run(capsys, "test", "--input", h0_csv, "--bandwidth", "-1")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["test", "--input", h0_csv, "--alpha", "1.5"])
    assert exc.value.code == 2


@pytest.mark.parametrize("method", ["permutation", "bootstrap", "gamma", "bmr", "pairwise"])
def test_same_seed_same_bytes(capsys, h0_csv, method):
    args = ["test", "--input", h0_csv, "--method", method, "--B", "30", "--seed", "17"]
    a = run(capsys, *args)[1]
    b = run(capsys, *args, "--workers", "3")[1]
    assert a == b and a.endswith("\n")


def test_pairwise_crit_is_null(capsys, h0_csv):
    rec = json.loads(run(capsys, "test", "--input", h0_csv, "--method", "pairwise", "--B", "20")[1])
    assert rec["crit_value"] is None


def test_kernel_flags(capsys, tmp_path):
    path = tmp_path / "k.csv"
    rng = np.random.default_rng(1)
    write_csv(str(path), Dataset.from_blocks([rng.standard_normal(30), rng.integers(0, 3, 30).astype(float)],
                                             kinds=["continuous", "discrete"]))
    rec = json.loads(run(capsys, "test", "--input", str(path), "--groups", "1;2:d")[1])
    assert rec["bandwidths"][1] is None
    rec = json.loads(run(capsys, "test", "--input", str(path), "--kernel", "gaussian", "--bandwidth", "0.7")[1])
    assert rec["bandwidths"] == [0.7, 0.7]
    assert run(capsys, "test", "--input", str(path), "--kernel", "discrete")[0] == 2


def test_tsv_output(capsys, h0_csv):
    out = run(capsys, "test", "--input", h0_csv, "--format", "tsv", "--B", "20")[1]
    header, row = out.strip().split("\n")
    assert header.split("\t")[0] == "method" and len(row.split("\t")) == len(header.split("\t"))


def test_causal_command(capsys, tmp_path):
    rng = np.random.default_rng(2)
    x = rng.standard_normal(60)
    data = tmp_path / "c.csv"
    write_csv(str(data), Dataset.from_blocks([x, np.sin(2 * x) + x + 0.2 * rng.standard_normal(60)]))
    dags = tmp_path / "dags.txt"
    dags.write_text("1 2\n\n2 1\n\n# empty\n")
    code, out, err = run(capsys, "causal", "--input", str(data), "--dags", str(dags), "--B", "20")
    assert code == 0 and "ranking-only" in err
    recs = [json.loads(line) for line in out.strip().split("\n")]
    assert [r["rank"] for r in recs] == [1, 2, 3]
    assert all(r["ranking_only"] for r in recs)
    code, out, err = run(capsys, "causal", "--input", str(data), "--dags", "all", "--split", "--B", "20")
    assert code == 0 and err == "" and len(out.strip().split("\n")) == 3


def test_simulate_and_plotdata(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--scenario", "Sim1", "--n", "20,30,40", "--m", "5", "--B", "10",
                       "--method", "permutation,gamma")
    assert code == 0
    recs = [json.loads(line) for line in out.strip().split("\n")]
    assert len(recs) == 6
    path = tmp_path / "s.jsonl"
    path.write_text(out)
    code, table, _ = run(capsys, "plotdata", "--input", str(path))
    lines = table.strip().split("\n")
    assert lines[0].split("\t") == ["scenario", "method", "x", "rate", "se"]
    assert all(len(line.split("\t")) == 5 for line in lines)
    assert sum(line.split("\t")[1] == "gamma" for line in lines[1:]) == 3
    assert sum(line.split("\t")[1] == "permutation" for line in lines[1:]) == 3


def test_plotdata_empty(capsys, tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert run(capsys, "plotdata", "--input", str(path))[1] == "scenario\tmethod\tx\trate\tse\n"


def test_plotdata_bad_json(capsys, tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"scenario": "Sim1"}\n')
    assert run(capsys, "plotdata", "--input", str(path))[0] == 2


def test_plot_rows_use_swept_parameter():
    recs = [{"scenario": "Sim5Dense", "method": "permutation", "n": 100, "c": c, "reject_rate": 0.1, "se": 0.01}
            for c in (2.0, 0.5, 1.0)]
    assert [r["x"] for r in plot_rows(recs)] == [0.5, 1.0, 2.0]


def test_simulate_deterministic(capsys):
    args = ["simulate", "--scenario", "Sim6Density", "--n", "40", "--m", "6", "--B", "20", "--seed", "5"]
    assert run(capsys, *args)[1] == run(capsys, *args, "--workers", "2")[1]
