"""Binary indexed tree over non-negative weights, for O(log n) weighted draws."""
import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def build(weights):
    n = weights.size
    tree = np.zeros(n + 1)
    for i in range(n):
        tree[i + 1] += weights[i]
        j = i + 1 + ((i + 1) & -(i + 1))
        if j <= n:
            tree[j] += tree[i + 1]
    return tree


@numba.njit(cache=True, nogil=True)
def add(tree, i, delta):
    n = tree.size - 1
    k = i + 1
    while k <= n:
        tree[k] += delta
        k += k & -k


@numba.njit(cache=True, nogil=True)
def prefix(tree, i):
    """Sum of weights ``0 .. i - 1``."""
    s = 0.0
    k = i
    while k > 0:
        s += tree[k]
        k -= k & -k
    return s


@numba.njit(cache=True, nogil=True)
def find(tree, target):
    """Smallest index ``i`` with ``prefix(i + 1) > target``; ``n`` if none."""
    n = tree.size - 1
    pos = 0
    step = 1
    while step * 2 <= n:
        step *= 2
    rem = target
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        step //= 2
    return pos


@numba.njit(cache=True, nogil=True)
def sample(tree, weights, total, u):
    """Index drawn with probability ``weights[i] / total`` from a uniform ``u``."""
    i = find(tree, u * total)
    n = weights.size
    if i >= n or weights[i] <= 0.0:
        # rounding at the top end: fall back to the last positive weight
        i = n - 1
        while i > 0 and weights[i] <= 0.0:
            i -= 1
    return i
