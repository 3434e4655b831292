from concurrent.futures import ProcessPoolExecutor


def pmap(fn, items, jobs=1):
    """``list(map(fn, items))``, optionally across ``jobs`` processes.

    Results always come back in input order.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
