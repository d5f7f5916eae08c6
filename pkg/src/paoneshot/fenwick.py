"""Fenwick (binary indexed) tree over float weights, numba-compiled.

The tree array has length ``size + 1`` with ``size`` a power of two, so the
grand total is always ``tree[size]``.  Slot ``i`` (0-based) lives at tree
index ``i + 1``.
"""
import numpy as np
from numba import njit


def capacity_for(n: int) -> int:
    size = 1
    while size < n:
        size <<= 1
    return size


@njit(nogil=True, cache=True)
def fw_add(tree, i, delta):
    size = tree.shape[0] - 1
    j = i + 1
    while j <= size:
        tree[j] += delta
        j += j & (-j)


@njit(nogil=True, cache=True)
def fw_prefix(tree, i):
    """Sum of slots ``0..i-1``."""
    s = 0.0
    j = i
    while j > 0:
        s += tree[j]
        j -= j & (-j)
    return s


@njit(nogil=True, cache=True)
def fw_build(tree, values):
    size = tree.shape[0] - 1
    tree[:] = 0.0
    for i in range(values.shape[0]):
        tree[i + 1] = values[i]
    for j in range(1, size + 1):
        parent = j + (j & (-j))
        if parent <= size:
            tree[parent] += tree[j]


@njit(nogil=True, cache=True)
def fw_search(tree, u):
    """Smallest slot whose inclusive prefix sum exceeds ``u``.

    Returns ``(slot, remainder)`` where ``remainder`` is ``u`` minus the sum of
    all earlier slots.  A slot equal to ``size`` means ``u`` ran past the total.
    """
    size = tree.shape[0] - 1
    pos = 0
    step = size
    while step > 0:
        nxt = pos + step
        if nxt <= size and tree[nxt] <= u:
            pos = nxt
            u -= tree[nxt]
        step >>= 1
    return pos, u


class FenwickTree:
    """Thin Python wrapper, mainly for inspection and tests."""

    def __init__(self, n: int):
        self.size = capacity_for(max(n, 1))
        self.tree = np.zeros(self.size + 1)

    @classmethod
    def from_values(cls, values):
        values = np.asarray(values, dtype=np.float64)
        ft = cls(len(values))
        fw_build(ft.tree, values)
        return ft

    def add(self, i: int, delta: float):
        fw_add(self.tree, i, delta)

    def prefix(self, i: int) -> float:
        return fw_prefix(self.tree, i)

    @property
    def total(self) -> float:
        return self.tree[self.size]

    def search(self, u: float):
        return fw_search(self.tree, u)
