import logging
from typing import Callable, Iterable, List, TypeVar
from joblib import Parallel, delayed
from facilitation.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = None) -> List[R]:
    """
    Map fn over items, results in input order.

    Serial when only one worker is configured; joblib otherwise. Callers must pass
    picklable callables (module-level functions, functools.partial) for process pools.
    """
    items = list(items)
    n_jobs = workers or settings.workers

    if n_jobs == 1 or len(items) <= 1:
        return [fn(item) for item in items]

    logger.debug(f"Parallel map over {len(items)} items with {n_jobs} workers")
    return Parallel(n_jobs=n_jobs, prefer="processes")(delayed(fn)(item) for item in items)
