from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field
from rich.console import Group
from rich.panel import Panel
from rich.table import Table

from quditport.checks import CheckResult, FailResult
from quditport.closed_form import ThresholdReport
from quditport.utils.io_utils import dumps


class ArbitraryModel(BaseModel):
    class Config:
        arbitrary_types_allowed = True


class CheckLogs(ArbitraryModel):
    """Logs for a single check."""

    name: str
    result: CheckResult
    duration: float = 0.0


class ValidationReport(ArbitraryModel):
    level: str
    logs: List[CheckLogs] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(log.result.outcome == "pass" for log in self.logs)

    @property
    def failures(self) -> List[CheckLogs]:
        """Returns the failed checks."""
        return [log for log in self.logs if isinstance(log.result, FailResult)]

    def json_lines(self) -> List[str]:
        lines = []
        for log in self.logs:
            entry: Dict[str, Any] = {
                "check": log.name,
                "level": self.level,
                "outcome": log.result.outcome,
                "duration": round(log.duration, 3),
                "metadata": log.result.metadata or {},
            }
            if isinstance(log.result, FailResult):
                entry["error"] = log.result.error_message
            lines.append(dumps(entry))
        return lines

    @property
    def rich_group(self) -> Group:
        table = Table(show_lines=False)
        table.add_column("Check", no_wrap=True)
        table.add_column("Outcome", justify="center")
        table.add_column("Seconds", justify="right")
        table.add_column("Details")
        for log in self.logs:
            if isinstance(log.result, FailResult):
                outcome, details = "[red]fail[/red]", log.result.error_message
            else:
                outcome = "[green]pass[/green]"
                metadata = log.result.metadata or {}
                details = ", ".join(
                    f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                    for k, v in metadata.items()
                )
            table.add_row(log.name, outcome, f"{log.duration:.2f}", details)
        if self.passed:
            summary = "all checks passed"
        else:
            summary = f"{len(self.failures)} check(s) failed"
        return Group(
            Panel(table, title=f"validate --level {self.level}"),
            summary,
        )


def threshold_table(
    reports: List[ThresholdReport], restoration: Optional[float] = None
) -> Table:
    d = reports[0].d if reports else None
    table = Table(title=f"Single-qudit thresholds, d={d}")
    table.add_column("Kind", no_wrap=True)
    table.add_column("p*", justify="right")
    table.add_column("F(p*)", justify="right")
    for report in reports:
        table.add_row(
            report.kind.symbol,
            f"{report.p_star:.12g}",
            f"{report.fidelity_at_threshold:.12g}",
        )
    if restoration is not None:
        table.caption = f"Restoration limit (none,F,F) at p=1,1: {restoration:.12g}"
    return table


def record_table(title: str, record: Dict[str, Any]) -> Table:
    table = Table(title=title, show_header=False)
    table.add_column("Field", no_wrap=True)
    table.add_column("Value")
    for key, value in record.items():
        table.add_row(key, f"{value:.17g}" if isinstance(value, float) else str(value))
    return table
