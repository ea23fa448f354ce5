"""
Process-level settings read from the environment
"""
import logging
import os

logger = logging.getLogger(__name__)

DEFAULT_CACHE_DIR = "./.flow_cache"


def get_thread_count() -> int:
    """Worker cap from REPEST_THREADS; 0 or unset means one worker per CPU"""
    raw = os.getenv("REPEST_THREADS", "0").strip()
    try:
        threads = int(raw)
    except ValueError:
        logger.warning(f"[WARN] Ignoring invalid REPEST_THREADS={raw!r}, using auto")
        threads = 0
    if threads < 0:
        logger.warning(f"[WARN] Ignoring negative REPEST_THREADS={threads}, using auto")
        threads = 0
    if threads == 0:
        threads = os.cpu_count() or 1
    return threads


def get_cache_dir() -> str:
    """Default flow cache directory, overridable through REPEST_CACHE_DIR"""
    return os.getenv("REPEST_CACHE_DIR") or DEFAULT_CACHE_DIR
