import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    """Worker count from ``MAGTRACE_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("MAGTRACE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def pmap(fn, items):
    """Order-preserving map; results do not depend on the worker count."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
