import asyncio
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
from loguru import logger

from src.davis.certificates import InequalityRow
from src.harness.checks import GLOBAL_REGISTRY, INSTANCE_REGISTRY, CheckContext
from src.harness.config import ExperimentConfig
from src.harness.instances import InstanceGenerator, instance_seed
from src.harness.reports import GLOBAL_ID, CheckReport, ReportRow, ReportStore

LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}"


def configure_logging(level: str = "INFO"):
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)


def error_row(check: str, error: Exception) -> InequalityRow:
    """Asserted row that always fails; stands in for a check that raised."""
    return InequalityRow(check, math.inf, 0.0, kind="deviation", tol=0.0,
                         note=f"{type(error).__name__}: {error}")


@dataclass
class InstanceOutcome:
    index: int
    rows: List[ReportRow] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    errors: int = 0


class InstanceEvaluator:
    """Shared check objects plus the instance generator; evaluates one instance at a time."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.instance_checks = [c for c in config.checks if c in INSTANCE_REGISTRY]
        # 1. Shared objects (spaces, Φ families)
        self.context = CheckContext.from_config(config)
        # 2. Instance generator over the main and classical filtrations
        self.generator = InstanceGenerator(config.build_filtration(), config.build_classical(), config.seed)

    def evaluate(self, index: int) -> InstanceOutcome:
        """Every instance check on one instance, sequentially."""
        seed = instance_seed(self.config.seed, index)
        outcome = InstanceOutcome(index)
        try:
            instance = self.generator.instance(index)
        except Exception as e:
            logger.error(f"Instance {index} (seed {seed}) could not be generated: {e}")
            outcome.errors += 1
            outcome.rows.append(ReportRow(index, seed, error_row("instance", e)))
            return outcome

        for check in self.instance_checks:
            started = time.perf_counter()
            try:
                produced = INSTANCE_REGISTRY[check](self.context, instance)
            except Exception as e:
                logger.error(f"Check {check} failed on instance {index} (seed {seed}): {e}")
                outcome.errors += 1
                produced = [error_row(check, e)]
            outcome.timings[check] = time.perf_counter() - started
            for row in produced:
                outcome.rows.append(ReportRow(index, seed, row))
                if row.asserted and not row.passed:
                    logger.warning(f"{row.check} failed on instance {index} (seed {seed}): "
                                   f"ratio {row.ratio:.6g}, constant {row.constant:.6g}")
        logger.debug(f"Instance {index} ({instance.family}) done: {len(outcome.rows)} rows")
        return outcome


# Per-process evaluator of the pool workers
_worker: Optional[InstanceEvaluator] = None


def _init_worker(config: ExperimentConfig, log_level: str):
    global _worker
    configure_logging(log_level)
    _worker = InstanceEvaluator(config)


def _evaluate_in_worker(index: int) -> InstanceOutcome:
    return _worker.evaluate(index)


class ExperimentRunner:
    """Runs the selected checks over generated instances and writes the reports.

    workers > 1 evaluates instances in a process pool; workers = 1 runs them
    in-process. Both give the same rows in instance order.
    """

    def __init__(self, config: ExperimentConfig, log_level: str = "INFO"):
        self.config = config
        self.log_level = log_level
        self.instance_checks = [c for c in config.checks if c in INSTANCE_REGISTRY]
        self.global_checks = [c for c in config.checks if c in GLOBAL_REGISTRY]
        self.context: Optional[CheckContext] = None
        self.is_running = False
        self.completed = 0
        self.errors = 0
        self.report: Optional[CheckReport] = None

    def _record(self, outcome: InstanceOutcome) -> InstanceOutcome:
        self.completed += 1
        self.errors += outcome.errors
        return outcome

    async def _run_instances(self) -> List[InstanceOutcome]:
        indices = range(self.config.instances)
        if self.config.workers == 1:
            evaluator = InstanceEvaluator(self.config)
            return [self._record(evaluator.evaluate(i)) for i in indices]

        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=self.config.workers, initializer=_init_worker,
                                 initargs=(self.config, self.log_level)) as pool:
            async def evaluate(index: int) -> InstanceOutcome:
                outcome = await loop.run_in_executor(pool, _evaluate_in_worker, index)
                return self._record(outcome)

            # gather keeps instance-index order regardless of completion order
            return await asyncio.gather(*(evaluate(i) for i in indices))

    def _run_globals(self) -> Tuple[List[ReportRow], Dict[str, float]]:
        rows: List[ReportRow] = []
        timings: Dict[str, float] = {}
        for check in self.global_checks:
            logger.info(f"Running global check {check}")
            started = time.perf_counter()
            try:
                produced = GLOBAL_REGISTRY[check](self.context)
            except Exception as e:
                logger.error(f"Global check {check} failed: {e}")
                self.errors += 1
                produced = [error_row(check, e)]
            timings[check] = time.perf_counter() - started
            rows.extend(ReportRow(GLOBAL_ID, self.config.seed, row) for row in produced)
        return rows, timings

    async def run(self) -> CheckReport:
        self.is_running = True
        started = time.perf_counter()
        logger.info(f"Starting suite: {len(self.instance_checks)} instance checks x {self.config.instances} "
                    f"instances, {len(self.global_checks)} global checks, seed {self.config.seed}")
        self.context = CheckContext.from_config(self.config)

        report = CheckReport()
        if self.instance_checks and self.config.instances > 0:
            for outcome in await self._run_instances():
                report.rows.extend(outcome.rows)
                for check, seconds in outcome.timings.items():
                    report.check_runtime[check] = report.check_runtime.get(check, 0.0) + seconds
        rows, timings = self._run_globals()
        report.rows.extend(rows)
        report.check_runtime.update(timings)

        report.runtime = time.perf_counter() - started
        self.report = report
        self.is_running = False
        if report.passed:
            logger.success(f"All asserted checks passed ({len(report.rows)} rows, {report.runtime:.1f}s)")
        else:
            logger.warning(f"{len(report.failures)} asserted rows failed")
        return report

    def write(self, store: Optional[ReportStore] = None):
        store = store or ReportStore(self.config.out)
        return store.write(self.report, self.config.format)

    @property
    def exit_code(self) -> int:
        return 0 if self.report is not None and self.report.passed else 1

    def get_status(self) -> Dict:
        return {
            "is_running": self.is_running,
            "instances": self.config.instances,
            "completed": self.completed,
            "errors": self.errors,
            "instance_checks": self.instance_checks,
            "global_checks": self.global_checks,
        }

    def get_summary(self) -> Dict:
        if self.report is None:
            return {}
        return {
            "passed": self.report.passed,
            "rows": len(self.report.rows),
            "failures": len(self.report.failures),
            "runtime": self.report.runtime,
            "checks": self.report.summary(),
        }


def run_suite(config: ExperimentConfig, write: bool = True, log_level: str = "INFO") -> Tuple[CheckReport, int]:
    """Runs the suite to completion; returns the report and the exit status."""
    runner = ExperimentRunner(config, log_level)
    report = asyncio.run(runner.run())
    if write:
        runner.write()
    return report, runner.exit_code
