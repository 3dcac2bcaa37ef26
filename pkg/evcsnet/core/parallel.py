"""Ordered parallel map over independent work items."""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> List[R]:
    """
    Apply `fn` to every item and return results in input order.

    With jobs > 1 the items run in a process pool; `fn` and the items must be
    picklable. Results never depend on the worker count.
    """
    work = list(items)
    if jobs <= 1 or len(work) <= 1:
        return [fn(item) for item in work]
    logger.debug("running %d items on %d workers", len(work), jobs)
    with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
        return list(pool.map(fn, work))
