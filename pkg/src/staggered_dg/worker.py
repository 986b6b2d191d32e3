"""Concurrent runner for refinement-ladder rungs."""

import asyncio
import logging

from staggered_dg.exceptions import StaggeredDGError
from staggered_dg.harness.cases import ManufacturedCase
from staggered_dg.harness.convergence import RowCallback, new_report, run_rung
from staggered_dg.models.config import SolverSettings
from staggered_dg.models.reports import ErrorReport, ErrorRow

logger = logging.getLogger(__name__)


class LadderWorker:
    """Runs independent rungs in worker threads; report rows stay ordered by h."""

    def __init__(self, settings: SolverSettings | None = None, max_workers: int | None = None):
        """Initialize worker."""
        self.settings = settings or SolverSettings()
        self.max_workers = max(1, max_workers or self.settings.ladder_workers)

    async def _rung(
        self,
        semaphore: asyncio.Semaphore,
        case: ManufacturedCase,
        inverse_h: int,
        k: int,
        dt: float,
        t_final: float,
    ) -> ErrorRow:
        async with semaphore:
            logger.info(f"Starting rung h=1/{inverse_h} for {case.case_id}")
            return await asyncio.to_thread(
                run_rung, case, inverse_h, k, dt, t_final, self.settings
            )

    async def run(
        self,
        case: ManufacturedCase,
        ladder: list[int],
        k: int = 1,
        dt: float = 1e-3,
        t_final: float = 0.1,
        on_row: RowCallback | None = None,
    ) -> ErrorReport:
        """Run every rung; a failing rung cancels the rest and re-raises."""
        semaphore = asyncio.Semaphore(self.max_workers)
        report = new_report(case, k, self.settings)
        tasks = [
            asyncio.create_task(self._rung(semaphore, case, n, k, dt, t_final))
            for n in sorted(ladder)
        ]
        try:
            for finished in asyncio.as_completed(tasks):
                row = await finished
                report.rows.append(row)
                report.rows.sort(key=lambda r: -r.h)
                if on_row is not None:
                    on_row(report)
        except StaggeredDGError:
            for task in tasks:
                task.cancel()
            logger.error(
                f"Ladder for {case.case_id} aborted with {len(report.rows)} rows kept"
            )
            raise
        return report


def run_ladder(
    case: ManufacturedCase,
    ladder: list[int],
    k: int = 1,
    dt: float = 1e-3,
    t_final: float = 0.1,
    settings: SolverSettings | None = None,
    on_row: RowCallback | None = None,
) -> ErrorReport:
    """Synchronous entry point around LadderWorker.run."""
    worker = LadderWorker(settings)
    return asyncio.run(worker.run(case, ladder, k, dt, t_final, on_row))
