"""Tests for stored baselines and table reproduction."""

import dataclasses

import pytest

import mcbdqm  # noqa: E402


def test_baselines_transcribed():
    """Spot-check stored published values."""
    assert mcbdqm.BASELINES[2].value(1.0, "linf") == 8.75e-6
    assert mcbdqm.BASELINES[3].value(0.2, "rms") == 2.54e-8
    assert mcbdqm.BASELINES[3].value(1.0, "linf", source="Jiang & Wang") == 1.53e-3
    assert mcbdqm.BASELINES[5].value(0.5, "l2", source="Dehghan & Shokri") == 4.31e-5
    assert mcbdqm.BASELINES[6].value(0.005, "order_l2") == 1.987
    assert mcbdqm.BASELINES[4].value(0.02, "linf") == 9.640778e-6
    assert mcbdqm.BASELINES[7].value(1.0, "l2") == 1.866e-9
    assert mcbdqm.BASELINES[7].value(20.0, "linf", source="Bratsos") == 2.519e-4


def test_baseline_missing_entries():
    """First convergence row has no order; unknown keys return None."""
    assert mcbdqm.BASELINES[6].value(0.04, "order_l2") is None
    assert mcbdqm.BASELINES[7].value(1.0, "l2", source="Bratsos") is None
    assert mcbdqm.BASELINES[2].value(0.3, "linf") is None


def test_baseline_tables_are_immutable():
    """Baseline rows and tables are frozen."""
    row = mcbdqm.BASELINES[2].rows[0]
    with pytest.raises(dataclasses.FrozenInstanceError):
        row.value = 0.0
    assert isinstance(mcbdqm.BASELINES[2].rows, tuple)


def test_baseline_sources_and_keys():
    """Table 3 lists four methods at five times."""
    table = mcbdqm.BASELINES[3]
    assert table.sources() == ["MCB-DQM", "Li-Min & Zong-Min", "Jiang & Wang", "Mittal & Bhatia"]
    assert table.keys() == [0.2, 0.4, 0.6, 0.8, 1.0]


def test_bench_setups_match_published_runs():
    """Bench configurations use the published grids and steps."""
    assert mcbdqm.BENCH_TABLES[3].h == mcbdqm.BENCH_TABLES[3].dt == 0.01
    assert mcbdqm.BENCH_TABLES[5].c == 0.5
    assert mcbdqm.BENCH_TABLES[7].times == (1.0, 10.0, 20.0)
    assert mcbdqm.BENCH_TABLES[7].ratio_limit is None


def test_run_bench_rejects_unknown_table():
    """Only tables 2, 3, 5 and 7 can be benched."""
    with pytest.raises(ValueError):
        mcbdqm.run_bench(4)


def test_bench_table3():
    """Table 3: Linf stays below 1e-4, both RMS conventions are reported and the verdict passes."""
    report = mcbdqm.run_bench(3)
    linf = [r for r in report.rows if r["metric"] == "linf"]
    assert [r["t"] for r in linf] == [0.2, 0.4, 0.6, 0.8, 1.0]
    assert all(r["computed"] <= 1e-4 for r in linf)
    metrics = {r["metric"] for r in report.rows}
    assert metrics == {"linf", "rms_conventional", "rms_literal"}
    assert report.metadata["rms_best_match"] in mcbdqm.RMS_MODES
    assert report.metadata["w2_method"] == "shu"
    assert "SSPRK(5,4)" in report.metadata["tableau"]
    assert report.passed, report.failures


@pytest.mark.parametrize("table_id", [2, 5])
def test_bench_small_step_tables(table_id):
    """Tables 2 and 5: Linf below 1e-4 and within 10x of the published value at t = 1."""
    report = mcbdqm.run_bench(table_id)
    linf = [r for r in report.rows if r["metric"] == "linf"]
    assert [r["t"] for r in linf] == [0.25, 0.5, 0.75, 1.0]
    assert all(r["computed"] <= 1e-4 for r in linf)
    assert all(r["published"] is not None for r in report.rows)
    final = [r for r in linf if r["t"] == 1.0][0]
    assert final["ratio"] <= 10.0
    assert report.passed, report.failures


@pytest.mark.slow
def test_bench_table7():
    """Table 7: the breather run completes and stays below 1e-3."""
    report = mcbdqm.run_bench(7)
    linf = [r for r in report.rows if r["metric"] == "linf"]
    assert [r["t"] for r in linf] == [1.0, 10.0, 20.0]
    assert all(r["computed"] <= 1e-3 for r in linf)
    assert report.passed
    assert "unconfirmed" in report.metadata
