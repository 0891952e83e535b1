"""
Frostlab worker pool helpers

Order-independent loops (directions, planes, kernel chunks) are mapped over a
thread pool. Results always come back in input order so the reductions that
follow stay deterministic.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar('T')
R = TypeVar('R')

# Set from the config `threads` key; FROSTLAB_THREADS still wins
_configured_threads: Optional[int] = None


def configure_threads(threads: Optional[int]):
    global _configured_threads
    _configured_threads = threads


def thread_count() -> int:
    """Number of worker threads: FROSTLAB_THREADS, then config, then core count"""
    env_value = os.environ.get('FROSTLAB_THREADS')
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            pass
    if _configured_threads:
        return max(1, int(_configured_threads))
    return os.cpu_count() or 1


def ordered_map(func: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Map func over items on the worker pool, keeping input order"""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
