# utils/partition.py

import logging
from typing import List, NamedTuple

logger = logging.getLogger(__name__)


class PathChunk(NamedTuple):
    index: int
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start


def chunk_paths(n_paths: int, chunk_size: int, antithetic: bool = False) -> List[PathChunk]:
    """
    Splits path indices [0, n_paths) into consecutive chunks of at most chunk_size.

    The partition depends only on (n_paths, chunk_size), never on the worker
    count, so every chunk keeps the same random substream between runs.

    Parameters:
        n_paths (int): Total number of paths.
        chunk_size (int): Maximum paths per chunk.
        antithetic (bool): If True every chunk holds an even number of paths.

    Returns:
        List[PathChunk]: Chunks in path order.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1.")
    if antithetic:
        if n_paths % 2:
            raise ValueError("Antithetic sampling needs an even number of paths.")
        chunk_size = max(2, chunk_size - chunk_size % 2)
    chunks = []
    start = 0
    while start < n_paths:
        stop = min(start + chunk_size, n_paths)
        chunks.append(PathChunk(len(chunks), start, stop))
        start = stop
    logger.debug(f"Created {len(chunks)} path chunks of up to {chunk_size} paths.")
    return chunks
