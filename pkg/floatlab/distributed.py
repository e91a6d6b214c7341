"""
Fan-out of independent grid points and Monte Carlo replicates over Ray.

Work is split into contiguous index ranges, one per ReplicateWorker actor,
and collected with ray.get. With a single worker (the default) everything
runs in-process and Ray is never imported. Replicates draw from RNG streams
keyed by their global index, so the split does not change any result.
"""

import functools
import logging
import os
from typing import Any, Callable, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

ray = None


def _import_ray():
    """Lazy import of ray so in-process runs do not pay for it."""
    global ray
    if ray is None:
        import ray as _ray

        ray = _ray
    return ray


def setup_ray(workers: int, address: Optional[str] = None) -> bool:
    """
    Start (or join) a Ray runtime sized for ``workers`` CPUs.

    Returns:
        True if Ray is usable, False otherwise (callers fall back to
        in-process execution)
    """
    try:
        ray = _import_ray()
        logging.getLogger("ray").setLevel(logging.WARNING)
        # Usage stats are controlled through the environment, not ray.init
        os.environ.setdefault("RAY_USAGE_STATS_ENABLED", "0")
        if ray.is_initialized():
            return True
        kwargs = {"ignore_reinit_error": True, "include_dashboard": False}
        if address is not None:
            kwargs["address"] = address
        else:
            kwargs["num_cpus"] = workers
        ray.init(**kwargs)
        logger.info("Ray initialized with %d worker(s)", workers)
        return True
    except Exception as e:
        logger.error("Failed to initialize Ray: %s", e)
        logger.error("Install it with: pip install 'ray[default]'")
        return False


def shutdown_ray() -> None:
    if ray is not None and ray.is_initialized():
        ray.shutdown()


class ReplicateWorker:
    """Ray actor that applies one task function to a chunk of items."""

    def __init__(self, worker_id: int, fn: Callable[[Any], Any]):
        self.worker_id = worker_id
        self.fn = fn
        self._configured = False

    def _configure(self):
        """Actors start with a bare root logger; give them the driver's level once."""
        if not self._configured:
            logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
            self._configured = True

    def run_chunk(self, start: int, items: Sequence[Any]) -> List[Any]:
        """
        Apply the task function to items[start:start+len(items)].

        Args:
            start: Global index of the first item (for logging only)
            items: The chunk

        Returns:
            Results in item order
        """
        self._configure()
        logger.debug("Worker %d: items %d-%d", self.worker_id, start, start + len(items))
        return [self.fn(item) for item in items]


def partition_replicates(total: int, workers: int) -> List[Tuple[int, int]]:
    """Split range(total) into ``workers`` contiguous (start, end) chunks."""
    if total <= 0:
        return []
    workers = max(1, min(workers, total))
    per_chunk = total // workers
    extra = total % workers
    chunks = []
    start = 0
    for i in range(workers):
        end = start + per_chunk + (1 if i < extra else 0)
        chunks.append((start, end))
        start = end
    return chunks


def map_tasks(fn: Callable[[Any], Any], items: Sequence[Any], workers: int = 1) -> List[Any]:
    """
    [fn(item) for item in items], distributed over Ray actors when workers > 1.

    Falls back to in-process execution when Ray cannot be started.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    if not setup_ray(workers):
        logger.warning("Running %d tasks in-process", len(items))
        return [fn(item) for item in items]
    ray = _import_ray()
    remote_worker = ray.remote(ReplicateWorker)
    chunks = partition_replicates(len(items), workers)
    actors = [remote_worker.remote(i, fn) for i in range(len(chunks))]
    futures = [actor.run_chunk.remote(start, items[start:end]) for actor, (start, end) in zip(actors, chunks)]
    results = ray.get(futures)
    logger.info("Completed %d tasks on %d workers", len(items), len(chunks))
    return [r for chunk in results for r in chunk]


def _call_replicate(fn: Callable[[int, int], Any], seed: int, replicate: int) -> Any:
    return fn(seed, replicate)


def run_replicates(fn: Callable[[int, int], Any], replicates: int, seed: int, workers: int = 1) -> List[Any]:
    """
    Evaluate fn(seed, r) for r in range(replicates).

    ``fn`` must derive all randomness from (seed, r); the result list is
    then identical for every worker count.
    """
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    return map_tasks(functools.partial(_call_replicate, fn, seed), range(replicates), workers=workers)
