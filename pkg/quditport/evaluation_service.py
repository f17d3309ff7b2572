import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, List, Optional, Sequence

from eliot import start_action

from quditport.utils.constants import default_settings

logger = logging.getLogger(__name__)


class EvaluationServiceBase:
    """Base class for evaluation services.

    A service maps a top-level function over a sequence of tasks and
    returns the results in task order.
    """

    def evaluate(self, func: Callable[[Any], Any], tasks: Sequence[Any]) -> List[Any]:
        raise NotImplementedError


class SequentialEvaluationService(EvaluationServiceBase):
    def evaluate(self, func, tasks):
        return [func(task) for task in tasks]


class MultiprocMixin:
    def __init__(self, workers: int):
        self.workers = workers

    def executor(self) -> ProcessPoolExecutor:
        return ProcessPoolExecutor(max_workers=self.workers)


class MultiprocEvaluationService(EvaluationServiceBase, MultiprocMixin):
    def evaluate(self, func, tasks):
        tasks = list(tasks)
        chunksize = max(1, len(tasks) // (4 * self.workers))
        with self.executor() as pool:
            # Executor.map yields in submission order whatever the finishing order.
            return list(pool.map(func, tasks, chunksize=chunksize))


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit worker count, else ``QUDITPORT_WORKERS``, else 1."""
    if workers is not None:
        if workers < 1:
            raise ValueError(f"Worker count must be >= 1, got {workers}.")
        return workers
    return default_settings().workers


def evaluate(
    func: Callable[[Any], Any],
    tasks: Sequence[Any],
    workers: Optional[int] = None,
) -> List[Any]:
    """Evaluates ``func`` on every task, sequentially or on a process pool.

    Results never depend on the worker count.
    """
    from_env = workers is None
    workers = resolve_workers(workers)
    tasks = list(tasks)
    if workers == 1 or len(tasks) <= 1:
        if from_env and workers == 1 and "QUDITPORT_WORKERS" in os.environ:
            logger.warning(
                "Worker count was set to 1 via the QUDITPORT_WORKERS"
                " environment variable."
                " This will cause all evaluations to run synchronously."
                " To run them in parallel, set QUDITPORT_WORKERS"
                " to a value greater than 1 or unset it."
            )
        service = SequentialEvaluationService()
    else:
        service = MultiprocEvaluationService(workers)
    with start_action(
        action_type="evaluate",
        service=type(service).__name__,
        tasks=len(tasks),
        workers=workers,
    ):
        return service.evaluate(func, tasks)
