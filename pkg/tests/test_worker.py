"""Test the concurrent ladder worker."""

import pytest

from staggered_dg.exceptions import SolverError
from staggered_dg.worker import LadderWorker, run_ladder


@pytest.fixture
def patched_rung(monkeypatch, rung_stub):
    def patch(**kwargs):
        stub, calls = rung_stub(**kwargs)
        monkeypatch.setattr("staggered_dg.worker.run_rung", stub)
        return calls

    return patch


def test_worker_size(settings):
    """Test the worker count falls back to the settings and is at least one."""
    assert LadderWorker(settings).max_workers == settings.ladder_workers
    assert LadderWorker(settings, max_workers=3).max_workers == 3
    assert LadderWorker(settings, max_workers=0).max_workers == settings.ladder_workers


async def test_rows_ordered_by_h(ex1, settings, patched_rung):
    """Test rows come back from coarse to fine whatever order rungs finish in."""
    calls = patched_rung()
    seen = []

    report = await LadderWorker(settings, max_workers=3).run(
        ex1, [16, 4, 8, 2], on_row=lambda r: seen.append(len(r.rows))
    )

    assert sorted(calls) == [2, 4, 8, 16]
    assert [row.h for row in report.rows] == [0.5, 0.25, 0.125, 0.0625]
    assert seen == [1, 2, 3, 4]
    assert report.final_order("c") == pytest.approx(2.0)


async def test_failing_rung_reraises(ex1, settings, patched_rung):
    """Test a failing rung cancels the ladder and re-raises."""
    patched_rung(failing=4)

    with pytest.raises(SolverError, match="singular"):
        await LadderWorker(settings, max_workers=1).run(ex1, [2, 4, 8])


def test_run_ladder_sync(ex1, settings, patched_rung):
    """Test the synchronous wrapper."""
    patched_rung()

    report = run_ladder(ex1, [2, 4], 1, 1e-3, 0.1, settings)

    assert [row.h for row in report.rows] == [0.5, 0.25]
