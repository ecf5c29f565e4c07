"""Seeded random streams and replicate fan-out.

Replicate ``r`` of an experiment with seed ``s`` draws from a Philox generator keyed by
``SeedSequence(entropy=s, spawn_key=(0, r))``. Philox is counter based, so any replicate
stream can be built on any worker without coordination, and the values a replicate sees do
not depend on how replicates are distributed. Auxiliary streams that are not tied to one
replicate (for instance the direct sampler in :func:`densitycp.experiments.hardcore_stats`)
use ``spawn_key=(1, tag)``.

Replicates are evaluated in fixed batches wrapped in :func:`dask.delayed`; results always
come back in replicate order.
"""
import logging
import math

import dask
import numpy as np
from dask.diagnostics import ProgressBar

from densitycp.exceptions import ParameterError

logger = logging.getLogger(__name__)

RNG_FAMILY = "numpy.random.Philox(SeedSequence(entropy=seed, spawn_key=(stream, replicate)))"
BATCH_SIZE = 64


def replicate_generator(seed, replicate_id=0, stream=0):
    """Generator of one replicate.

    Args:
        seed (int): experiment seed
        replicate_id (int): replicate index, or tag of an auxiliary stream
        stream (int): ``0`` for replicates, ``1`` for auxiliary streams

    Returns:
        numpy.random.Generator
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(replicate_id)))
    return np.random.Generator(np.random.Philox(sequence))


class UniformStream:
    """Uniform variates on ``[0, 1)`` served from buffered blocks.

    Pulling uniforms one at a time from a :class:`numpy.random.Generator` dominates the cost
    of a simulation step; reading them from a block gives the same sequence of values at a
    fraction of the cost.
    """

    def __init__(self, generator, block=1024):
        self.generator = generator
        self.block = block
        self._buffer = []
        self._pos = 0

    @classmethod
    def for_replicate(cls, seed, replicate_id=0, stream=0):
        return cls(replicate_generator(seed, replicate_id, stream))

    def uniform(self):
        if self._pos >= len(self._buffer):
            self._buffer = self.generator.random(self.block).tolist()
            self._pos = 0
        u = self._buffer[self._pos]
        self._pos += 1
        return u

    def exponential(self, rate):
        """Exponential variate with the given rate."""
        return -math.log1p(-self.uniform()) / rate

    def below(self, n):
        """Uniform integer in ``[0, n)``."""
        return min(int(self.uniform() * n), n - 1)


def _run_batch(func, seed, replicate_ids, kwargs):
    return [func(seed, r, **kwargs) for r in replicate_ids]


def map_replicates(func, replicates, seed, workers=1, progress=False, **kwargs):
    """Evaluate ``func(seed, r, **kwargs)`` for ``r = 0, ..., replicates - 1``.

    Args:
        func (callable): module-level function, so it can be shipped to worker processes
        replicates (int): number of replicates
        seed (int): experiment seed handed to every call
        workers (int): ``1`` evaluates in the calling process, larger values use the dask
            process scheduler with that many workers
        progress (bool): show a dask progress bar

    Returns:
        list: results in replicate order
    """
    if replicates < 1:
        raise ParameterError("replicates must be positive, got {}".format(replicates))
    batches = [
        range(start, min(start + BATCH_SIZE, replicates))
        for start in range(0, replicates, BATCH_SIZE)
    ]
    tasks = [dask.delayed(_run_batch)(func, seed, batch, kwargs) for batch in batches]
    if workers is None or workers <= 1:
        options = {"scheduler": "synchronous"}
    else:
        options = {"scheduler": "processes", "num_workers": int(workers)}
    logger.debug("%d replicates of %s in %d batches (%s)", replicates, func.__name__, len(tasks), options)
    if progress:
        with ProgressBar():
            results = dask.compute(*tasks, **options)
    else:
        results = dask.compute(*tasks, **options)
    return [item for batch in results for item in batch]
