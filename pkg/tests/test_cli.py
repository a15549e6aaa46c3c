import io
import json

import pytest

from hgi_policy.cli import (
    EXIT_IO, EXIT_NO_RANKING, EXIT_OK, EXIT_VALIDATION, SweepConfig, main, read_csv, report_gap,
    run_sweep, write_csv,
)
from hgi_policy.fixtures import BUILTIN
from hgi_policy.network import network_to_dict
from hgi_policy.policy import PolicyParams
from hgi_policy.ranking import find_viable_ranking
from hgi_policy.simulate import simulate_replications


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_validate_and_exit_codes(tmp_path):
    assert run("validate", "--net", "NET-B-HT") == (EXIT_OK, "ok\n")
    doc = network_to_dict(BUILTIN["NET-E"]())
    doc["resources"][0]["capacity"] = "7"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, text = run("validate", "--net", str(bad))
    assert code == EXIT_VALIDATION and "critical_load" in text
    assert run("classify", "--net", str(bad))[0] == EXIT_VALIDATION
    assert run("rank", "--net", "NET-C")[0] == EXIT_NO_RANKING
    assert run("rank", "--net", str(tmp_path / "missing.json"))[0] == EXIT_IO
    assert len({EXIT_OK, EXIT_VALIDATION, EXIT_NO_RANKING, EXIT_IO}) == 4


def test_classify_and_rank_output():
    code, text = run("classify", "--net", "NET-B")
    assert code == 0
    assert json.loads(text)["multi_secondary"] == ["x12", "x1234", "x23"]
    assert run("rank", "--net", "NET-B") == (0, "x1234 x12 x23\n")
    assert run("rank", "--net", "NET-A") == (0, "(empty)\n")
    assert run("rank", "--all", "--net", "NET-D")[1].splitlines() == ["x123 x456 x36", "x456 x123 x36"]


def test_cost_and_rates():
    code, text = run("cost", "--net", "NET-C", "--w", "1,3,1")
    assert code == 0 and text.splitlines()[0] == "cost 20"
    code, text = run("rates", "--net", "NET-B-HT", "--q", "100,0,0,0,0,0,0", "--e", "0,1,1,1,1,1,1",
                     "--r", "16")
    assert code == 0
    assert "x1=1795/1792" in text.splitlines()[1]
    assert text.splitlines()[2] == "sigma x1"


def test_simulate_csv_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run("simulate", "--net", "NET-B-HT", "--r", "6", "--T", "1", "--reps", "3",
                   "--seed", "7", "--out", str(path))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    header, rows = read_csv(str(a))
    assert header == ["r", "rep", "seed", "J_E", "J_D", "events", "idleness_1", "idleness_2",
                      "idleness_3", "idleness_4", "wallclock_s"]
    assert [row[1] for row in rows] == [0, 1, 2]
    assert all(row[-1] is None for row in rows)


def test_csv_round_trip():
    header = ["kind", "x", "y", "n"]
    rows = [["sim", 0.1 + 0.2, None, 3], ["hgi", 1e-300, 2.5, None]]
    text = write_csv(header, rows)
    assert read_csv(text, text=True) == (header, rows)


def test_sweep_round_trip_and_hgi_row(tmp_path):
    out = tmp_path / "s.csv"
    cfg = SweepConfig(net="MM1", r_values=[4, 8], T=2.0, reps=2, seed=1, out=str(out),
                      hgi_dt=1e-2, hgi_horizon=10.0, hgi_reps=2, gap=True)
    header, rows = run_sweep(cfg)
    assert read_csv(str(out)) == (header, rows)
    assert [r[0] for r in rows] == ["sim", "sim", "hgi"]
    assert rows[0][header.index("gap")] < 1e-12


def test_sweep_empty_and_no_ranking(tmp_path):
    header, rows = run_sweep(SweepConfig(net="MM1", r_values=[], hgi_dt=1e-2, hgi_horizon=5.0,
                                         hgi_reps=2))
    assert len(rows) == 1 and rows[0][0] == "hgi"
    assert run("sweep", "--net", "NET-C", "--r-values", "4 8")[0] == EXIT_NO_RANKING
    with pytest.raises(ValueError):
        SweepConfig(net="MM1", r_values=[8, 4])


def test_hgi_command():
    code, text = run("hgi", "--net", "MM1", "--mode", "discounted", "--w0", "1", "--dt", "0.01",
                     "--horizon", "5", "--reps", "2")
    assert code == 0
    header, rows = read_csv(text, text=True)
    assert header[0] == "mode" and rows[0][0] == "discounted"


def test_report_gap_bounds():
    spec = BUILTIN["NET-B-HT"]()
    rk = find_viable_ranking(spec)
    rep = simulate_replications(spec, rk, r=8, T=1.0, reps=2, seed=3, track_gap=True, workers=1)
    gap, bound = report_gap(spec, PolicyParams(), rep.replications)
    assert 0 <= gap <= bound
    with pytest.raises(ValueError):
        report_gap(spec, PolicyParams(), simulate_replications(spec, rk, r=8, T=0.5, workers=1).replications)
