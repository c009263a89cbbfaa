import json
import subprocess
import sys

import pytest

from mmas_tsp.bench import (ALL_VARIANTS, CSV_HEADER, RunRecord, aggregate, build_parser,
                            emit_results, load_results, parse_variant, records_from_csv,
                            records_from_json, run_benchmark)
from mmas_tsp.errors import ConfigError


def record(seed=0, cost=430, variant="MMAS-RWM-BT"):
    return RunRecord("eil51", variant, seed, cost, {"iterations": 2, "params": {"rho": 0.5}},
                     [[440, 440], [cost, cost]], 1.25, 0.1, 0.0, 0.01, 1.5)


def test_parse_variant():
    assert parse_variant("MMAS-WRS-CT") == ("WRS", "CT")
    assert len(ALL_VARIANTS) == 6
    with pytest.raises(ConfigError):
        parse_variant("MMAS-FOO-CT")


def test_cli_three_records(tmp_path):
    out = tmp_path / "r.json"
    rc = run_benchmark(["--instance", "eil51.tsp", "--variant", "MMAS-WRS-CT", "--seeds", "3",
                        "--iterations", "100", "--out", str(out)])
    assert rc == 0
    recs = load_results(out)
    assert len(recs) == 3
    assert [r.seed for r in recs] == [0, 1, 2]
    assert {r.variant for r in recs} == {"MMAS-WRS-CT"}
    for r in recs:
        assert len(r.history) == 100
        phases = r.construction_ms + r.pheromone_ms + r.local_search_ms + r.other_ms
        assert phases <= r.wall_ms + 1e-6


def test_cli_all_variants_and_relative_error(tmp_path, capsys):
    out = tmp_path / "r.csv"
    rc = run_benchmark(["--instance", "eil51", "--all-variants", "--iterations", "2",
                        "--format", "csv", "--out", str(out), "--optimum", "426", "--ants", "5"])
    assert rc == 0
    recs = load_results(out)
    assert {r.variant for r in recs} == set(ALL_VARIANTS)
    summary = json.loads(capsys.readouterr().out)
    for row in summary["aggregate"]:
        costs = [r.best_cost for r in recs if r.variant == row["variant"]]
        mean = sum(costs) / len(costs)
        assert row["relative_error"] == pytest.approx((mean - 426) / 426)


def test_cli_friedman_block(tmp_path, capsys):
    rc = run_benchmark(["--instance", "ulysses16", "--all-variants", "--iterations", "3",
                        "--seeds", "2", "--friedman", "--out", str(tmp_path / "x.json")])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    f = summary["friedman"]
    assert f["k"] == 6 and f["b"] == 2 and 0 <= f["p_value"] <= 1


def test_cli_flags_parse():
    args = build_parser().parse_args(
        ["--instance", "x", "--optimum", "1", "--variant", "MMAS-RWM-LC", "--ants", "3",
         "--iterations", "4", "--rho", "0.9", "--alpha", "1", "--beta", "2", "--cl", "0",
         "--ls", "on", "--deposit", "global", "--seeds", "2", "--seed", "5", "--threads", "2",
         "--chunk", "8", "--format", "csv", "--out", "o", "--friedman", "--parallel-runs"])
    assert args.ls == "on" and args.deposit == "global" and args.parallel_runs


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MMAS_THREADS", "3")
    out = tmp_path / "r.json"
    assert run_benchmark(["--instance", "ulysses16", "--iterations", "2", "--out", str(out)]) == 0
    assert load_results(out)[0].config["threads"] == 3


def test_usage_errors_exit_nonzero():
    for argv in (["--instance", "no_such_file.tsp"],
                 ["--instance", "eil51", "--variant", "MMAS-X-BT"],
                 ["--instance", "eil51", "--bogus"]):
        with pytest.raises(SystemExit) as info:
            run_benchmark(argv)
        assert info.value.code != 0


def test_failed_run_gives_nonzero_exit(tmp_path):
    # cl >= n passes argument parsing but fails inside the run
    rc = run_benchmark(["--instance", "ulysses16", "--cl", "20", "--iterations", "1",
                        "--out", str(tmp_path / "r.json")])
    assert rc == 1
    assert load_results(tmp_path / "r.json")[0].status.startswith("error")


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "mmas_tsp", "--instance", "ulysses16",
                           "--iterations", "2", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(json.loads(out.read_text())) == 1


def test_parallel_runs_match_sequential(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    common = ["--instance", "ulysses22", "--iterations", "5", "--seeds", "3"]
    assert run_benchmark(common + ["--out", str(a)]) == 0
    assert run_benchmark(common + ["--out", str(b), "--parallel-runs"]) == 0
    assert ([(r.seed, r.best_cost, r.history) for r in load_results(a)]
            == [(r.seed, r.best_cost, r.history) for r in load_results(b)])


def test_json_round_trip():
    recs = [record(0), record(1, 431)]
    assert records_from_json(emit_results(recs, "json")) == recs


def test_csv_round_trip_and_shape():
    recs = [record(0), record(1, 431), RunRecord("eil51", "MMAS-WRS-BT", 2, None, {}, status="error: x")]
    text = emit_results(recs, "csv")
    lines = text.strip().split("\n")
    assert lines[0].split(",") == list(CSV_HEADER)
    assert records_from_csv(text) == recs
    import csv
    import io
    rows = list(csv.reader(io.StringIO(text)))
    assert len(rows) == 4 and len({len(r) for r in rows}) == 1


def test_one_record_one_csv_row():
    assert len(emit_results([record()], "csv").strip().split("\n")) == 2


def test_emit_requires_records():
    with pytest.raises(ValueError):
        emit_results([], "json")


def test_emit_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_results([record()], "json", tmp_path / "missing_dir" / "r.json")


def test_aggregate():
    rows = aggregate([record(0, 426), record(1, 430)], optimum=426)
    assert rows[0]["mean"] == 428 and rows[0]["best"] == 426 and rows[0]["optimum_hits"] == 1
    assert rows[0]["relative_error"] == pytest.approx(2 / 426)
