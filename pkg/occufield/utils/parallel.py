"""
Ordered worker pool for independent jobs
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar('T')
R = TypeVar('R')

logger = logging.getLogger(__name__)


def worker_count(configured: Optional[int] = None) -> int:
    """Number of workers: the config value capped by OCCUFIELD_THREADS"""
    cap = os.environ.get('OCCUFIELD_THREADS')
    count = configured if configured else (os.cpu_count() or 1)
    if cap:
        try:
            count = min(count, max(1, int(cap)))
        except ValueError:
            logger.warning(f"Ignoring invalid OCCUFIELD_THREADS={cap!r}")
    return max(1, count)


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Apply fn to every item on a thread pool; results keep input order"""
    items = list(items)
    count = worker_count(workers)
    if count == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(fn, items))
