import os
from concurrent.futures import ThreadPoolExecutor


def default_threads():
    env = os.environ.get("TRIMAP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def ordered_map(fn, items, threads=None):
    """``[fn(i) for i in items]``, optionally on a thread pool; result order is fixed."""
    items = list(items)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
