"""Reproducible random number substreams.

Every random consumer in the package derives its generator from a user
seed plus a structural path (stream kind, then indices such as the
subject number or boosting round). Streams are built on Philox, a
counter-based bit generator, through ``numpy.random.SeedSequence`` with
the path as the spawn key. Two consequences matter:

* the stream for (seed, path) is independent of every other path, so
  work can be sharded across any number of workers and reassembled in
  index order with bit-identical results;
* no generator state is ever shared or advanced across tasks, so the
  draw count of one task cannot perturb another.
"""
import numpy as np

# Stream kinds. Values are arbitrary but frozen: changing them changes
# every downstream draw.
SIMULATE = 1
SIGMA = 2
LANDMARK = 3
BOOST = 4
CV = 5
TEST_SET = 6
ORACLE = 7
MEASURE = 8


def substream(seed, *path):
    """Return a ``numpy.random.Generator`` for the given seed and path."""
    seq = np.random.SeedSequence(seed, spawn_key=tuple(int(x) for x in path))
    return np.random.Generator(np.random.Philox(seq))
