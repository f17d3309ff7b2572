import logging
import time
from typing import Optional, Tuple

from eliot import start_action

from quditport.checks import CheckLevel, CheckResult, checks_for_level, run_check
from quditport.evaluation_service import evaluate
from quditport.utils.logs_utils import CheckLogs, ValidationReport

logger = logging.getLogger(__name__)


def _timed_check(name: str) -> Tuple[str, CheckResult, float]:
    start = time.perf_counter()
    with start_action(action_type="check", name=name) as action:
        result = run_check(name)
        action.add_success_fields(outcome=result.outcome)
    return name, result, time.perf_counter() - start


def run_checks(level: CheckLevel, workers: Optional[int] = None) -> ValidationReport:
    """Runs every check of ``level`` and collects a report in registration order."""
    level = CheckLevel(level)
    names = checks_for_level(level)
    with start_action(action_type="run_checks", level=level.value, checks=len(names)):
        outcomes = evaluate(_timed_check, names, workers)
    report = ValidationReport(
        level=level.value,
        logs=[
            CheckLogs(name=name, result=result, duration=duration)
            for name, result, duration in outcomes
        ],
    )
    for log in report.failures:
        logger.warning(f"Check {log.name} failed: {log.result.error_message}")
    return report
