import pytest
from click.testing import CliRunner

from sixpp.cli import main, parse_int_range


@pytest.fixture
def runner():
    return CliRunner()


def test_capacity_single_row(runner):
    res = runner.invoke(main, ["capacity", "--phy", "LE_2M", "--ntx", "2", "--nh", "3"])
    assert res.exit_code == 0
    lines = res.output.splitlines()
    assert lines[1] == "phy,n_tx,n_h,payload_bytes,t_slot_us,messages"
    assert lines[2] == "LE_2M,2,3,64,320,6"


def test_capacity_all_phys_monotone(runner):
    res = runner.invoke(main, ["capacity", "--all-phys", "--ntx", "2", "--nh", "3"])
    assert res.exit_code == 0
    rows = [l.split(",") for l in res.output.splitlines()[2:]]
    assert len(rows) == 5
    by_rate = sorted(rows, key=lambda r: -{"LE_2M": 2e6, "LE_1M": 1e6, "LE_CODED_500K": 5e5,
                                           "IEEE802154_250K": 2.5e5, "LE_CODED_125K": 1.25e5}[r[0]])
    caps = [int(r[5]) for r in by_rate]
    assert caps == sorted(caps, reverse=True)


def test_capacity_bad_phy_is_usage_error(runner):
    res = runner.invoke(main, ["capacity", "--phy", "BOGUS"])
    assert res.exit_code == 2
    assert "LE_2M" in res.output


def test_capacity_writes_file(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "capacity", "--ntx", "1-2", "--nh", "1-3"])
    assert res.exit_code == 0
    assert len((tmp_path / "capacity.csv").read_text().splitlines()) == 2 + 6


def test_run_twice_same_seed_identical(runner, tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        res = runner.invoke(main, ["--seed", "7", "--out", str(d), "--quiet", "run", "dense20",
                                   "--set", "run.duration_ms=20000"])
        assert res.exit_code == 0, res.output
        outs.append([(d / n).read_bytes() for n in ("events.csv", "summary.csv")])
    assert outs[0] == outs[1]
    assert b"seed=7" in outs[0][0].splitlines()[0]


def test_run_prints_summary(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "run", "assoc_line48", "--mode", "baseline",
                               "--set", "run.duration_ms=5000"])
    assert res.exit_code == 0
    assert res.output.startswith("baseline seed=1")


def test_scenario_errors_exit_3(runner, tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("[run]\nseed = 1\nmystery = 4\n")
    res = runner.invoke(main, ["run", str(bad)])
    assert res.exit_code == 3
    assert "bad.scn:3:1" in res.output
    assert runner.invoke(main, ["validate", str(tmp_path / "missing.scn")]).exit_code == 3
    res = runner.invoke(main, ["validate", "dense20", "--set", "ct.n_hops=2"])
    assert res.exit_code == 3


def test_validate_ok(runner):
    res = runner.invoke(main, ["validate", "dense20"])
    assert res.exit_code == 0 and res.output.startswith("ok sixpp config_hash=")


def test_matrix_single_seed_four_rows(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "--quiet", "matrix", "dense20", "--seeds", "4",
                               "--set", "run.duration_ms=15000"])
    assert res.exit_code == 0, res.output
    lines = (tmp_path / "matrix.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[1] == "mode,jam,seed,reliability_pct,mean_latency_ms,median_latency_ms"
    assert len(lines) == 2 + 4


def test_unknown_command_is_usage_error(runner):
    assert runner.invoke(main, ["frobnicate"]).exit_code == 2


def test_int_range_parser():
    assert parse_int_range("1-3,7") == [1, 2, 3, 7]
    assert parse_int_range("5") == [5]
    with pytest.raises(ValueError):
        parse_int_range("4-2")
