"""Shared test helpers."""

from __future__ import annotations

import numpy as np
import pytest


class ScriptedSource:
    """RandomSource stand-in replaying queued draws, for forced-draw tests.

    Each queue entry is a scalar; requests with ``size`` pop that many
    entries and return an array.
    """

    def __init__(self, uniforms=(), normals=(), gammas=(), ints=()):
        self._uniform = list(uniforms)
        self._normal = list(normals)
        self._gamma = list(gammas)
        self._ints = list(ints)

    def _pop(self, queue, size):
        if size is None:
            return queue.pop(0)
        if isinstance(size, tuple):
            n = int(np.prod(size))
            return np.array([queue.pop(0) for _ in range(n)]).reshape(size)
        return np.array([queue.pop(0) for _ in range(size)])

    def uniform(self, low, high, size=None):
        return self._pop(self._uniform, size)

    def normal(self, mean, std, size=None):
        return self._pop(self._normal, size)

    def gamma(self, shape, scale, size=None):
        return self._pop(self._gamma, size)

    def integers(self, low, high, size=None):
        return self._pop(self._ints, size)


def pairwise_separation_ok(state) -> bool:
    """Exact no-overlap predicate over all cell pairs of a frame."""
    cells = state.cells
    for a in range(len(cells)):
        for b in range(a + 1, len(cells)):
            dx = cells[a].position[0] - cells[b].position[0]
            dy = cells[a].position[1] - cells[b].position[1]
            rs = cells[a].radius + cells[b].radius
            if dx * dx + dy * dy < rs * rs:
                return False
    return True


@pytest.fixture
def rng_factory():
    from cellforge.core import RandomSource

    return RandomSource
