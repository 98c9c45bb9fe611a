####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     parallel.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, dask
#
####################################################################################################

from dask import compute, delayed

DEFAULT_CHUNK_SIZE = 64

_num_workers = 1
_chunk_size = DEFAULT_CHUNK_SIZE


def set_num_workers(count):
    global _num_workers
    if count < 1:
        raise ValueError("worker count must be at least 1, got {}".format(count))
    _num_workers = int(count)


def get_num_workers():
    return _num_workers


def set_chunk_size(size):
    global _chunk_size
    if size < 1:
        raise ValueError("chunk size must be at least 1, got {}".format(size))
    _chunk_size = int(size)


def chunk_ranges(count, chunk_size=None):
    """ Split range(count) into consecutive (start, stop) pairs. The split depends only on count and
    chunk_size, never on the number of workers, so chunked reductions are reproducible. """
    chunk_size = _chunk_size if chunk_size is None else chunk_size
    return [(start, min(start + chunk_size, count)) for start in range(0, count, chunk_size)]


def map_ordered(func, items, num_workers=None):
    """ Apply func to every item, returning results in item order. Uses the dask threaded scheduler
    when more than one worker is configured. """
    items = list(items)
    workers = num_workers if num_workers is not None else _num_workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    values = [delayed(func)(item) for item in items]
    return list(compute(*values, scheduler="threads", num_workers=workers))


def map_chunks(func, count, chunk_size=None, num_workers=None):
    """ Call func(start, stop) over fixed chunks of range(count); results are returned in chunk order """
    return map_ordered(lambda bounds: func(*bounds), chunk_ranges(count, chunk_size), num_workers)


def reduce_max(candidates):
    """ Reduce (value, key) pairs produced in chunk order to the first maximal pair. None entries
    (empty chunks) are skipped. Returns None if every entry is None. """
    best = None
    for candidate in candidates:
        if candidate is None:
            continue
        if best is None or candidate[0] > best[0]:
            best = candidate
    return best
