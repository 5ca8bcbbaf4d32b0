"""Fenwick (binary indexed) tree over float weights, as jitted array routines.

``tree`` has length ``n + 1`` and ``tree[0]`` is unused. Leaves are 0-based in
the public functions.
"""
import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def top_bit(n):
    """Largest power of two <= n (n >= 1)."""
    top = 1
    while top * 2 <= n:
        top *= 2
    return top


@nb.njit(cache=True, nogil=True)
def build(tree, weights):
    n = weights.shape[0]
    tree[0] = 0.0
    for i in range(n):
        tree[i + 1] = weights[i]
    for i in range(1, n + 1):
        j = i + (i & -i)
        if j <= n:
            tree[j] += tree[i]


@nb.njit(inline="always")
def add(tree, i, delta):
    n = tree.shape[0] - 1
    i += 1
    while i <= n:
        tree[i] += delta
        i += i & -i


@nb.njit(cache=True, nogil=True)
def prefix(tree, i):
    """Sum of leaves ``0..i-1``."""
    s = 0.0
    while i > 0:
        s += tree[i]
        i -= i & -i
    return s


@nb.njit(inline="always")
def find(tree, v, top):
    """Leaf ``x`` with ``prefix(x) <= v < prefix(x + 1)`` and the residual ``v - prefix(x)``.

    Returns ``x == n`` when ``v`` is at or beyond the total.
    """
    n = tree.shape[0] - 1
    pos = 0
    step = top
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= v:
            pos = nxt
            v -= tree[nxt]
        step >>= 1
    return pos, v


@nb.njit(cache=True, nogil=True)
def find_leaf(tree, v):
    return find(tree, v, top_bit(tree.shape[0] - 1))


@nb.njit(cache=True, nogil=True)
def add_leaf(tree, i, delta):
    add(tree, i, delta)


class FenwickTree:
    """Thin object wrapper, mainly for tests and Python-side use."""

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float)
        self.n = weights.size
        self.tree = np.zeros(self.n + 1)
        build(self.tree, weights)

    def add(self, i, delta):
        add_leaf(self.tree, i, float(delta))

    def prefix(self, i):
        return prefix(self.tree, i)

    @property
    def total(self):
        return prefix(self.tree, self.n)

    def find(self, v):
        return find_leaf(self.tree, float(v))
