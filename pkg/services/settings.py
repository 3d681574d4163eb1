# services/settings.py
import os
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from services.errors import BadParameters

T = TypeVar("T")
R = TypeVar("R")

# ==============================
# Environment-driven settings (.env được nạp ở api/app.py)
# ==============================
DEFAULT_SEED = 42


@dataclass(frozen=True)
class Settings:
    threads: int = 1
    seed: int = DEFAULT_SEED
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "Settings":
        try:
            threads = int(os.getenv("LELONG_THREADS", "1"))
            seed = int(os.getenv("LELONG_SEED", str(DEFAULT_SEED)))
        except ValueError as e:
            raise BadParameters(f"LELONG_THREADS / LELONG_SEED must be integers: {e}")
        return cls(
            threads=max(1, threads),
            seed=seed,
            log_level=os.getenv("LELONG_LOG_LEVEL", "INFO").upper(),
        )


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    Map fn over items, in a thread pool capped by LELONG_THREADS.
    Order of results always follows order of items.
    """
    items = list(items)
    threads = threads or Settings.from_env().threads
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
