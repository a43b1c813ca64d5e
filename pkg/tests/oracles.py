"""Independent reference computations used to check the package.

Everything here is written from first principles with exact arithmetic where
possible and deliberately shares no code with the package.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np


def det_exact(rows):
    """Determinant of a square matrix of Fractions by Gaussian elimination."""
    m = [list(map(Fraction, r)) for r in rows]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            for k in range(c, n):
                m[r][k] -= f * m[c][k]
    return det


def kirchhoff_tree_count(n, pairs):
    """Spanning trees of an undirected multigraph via the reduced Laplacian."""
    lap = [[0] * n for _ in range(n)]
    for u, v in pairs:
        lap[u][u] += 1
        lap[v][v] += 1
        lap[u][v] -= 1
        lap[v][u] -= 1
    return int(det_exact([row[1:] for row in lap[1:]]))


def kirchhoff_weights(W):
    """Directed matrix-tree theorem: weight of trees rooted at each vertex.

    ``W[k][l]`` is the rate ``l -> k``; the weight of vertex ``l`` equals the
    principal minor of ``-W`` with row and column ``l`` removed. The diagonal
    of ``W`` is ignored and rebuilt from the off-diagonal rates.
    """
    n = len(W)
    neg = [[-Fraction(W[i][j]) if i != j else Fraction(0) for j in range(n)] for i in range(n)]
    for j in range(n):
        neg[j][j] = -sum(neg[i][j] for i in range(n) if i != j)
    out = []
    for l in range(n):
        keep = [i for i in range(n) if i != l]
        out.append(det_exact([[neg[i][j] for j in keep] for i in keep]))
    return out


def exact_stationary(W):
    """Stationary distribution of ``W`` in exact arithmetic."""
    w = kirchhoff_weights(W)
    total = sum(w)
    return [x / total for x in w]


def cycle_tree_weight(fwd, bwd, k, l):
    """Closed-form weight of the cycle tree without edge ``k -> k+1``, rooted at ``l``.

    Indices are 1-based positions along the cycle. ``fwd[n]`` is the rate
    ``n -> n+1`` and ``bwd[n]`` the rate ``n+1 -> n`` (``N+1`` wraps to 1),
    i.e. ``fwd[n] = W_{n+1,n}`` and ``bwd[n] = W_{n,n+1}``.
    """
    N = len(fwd) - 1  # fwd and bwd are padded at index 0

    def up(n):  # W_{n+1,n}
        return fwd[n]

    def down(n):  # W_{n-1,n}, the rate n -> n-1
        return bwd[n - 1] if n > 1 else bwd[N]

    def prod(it):
        out = Fraction(1)
        for x in it:
            out *= x
        return out

    if l < k:
        return prod(up(n) for n in range(1, l)) * prod(down(n) for n in range(l + 1, k + 1)) \
            * prod(up(n) for n in range(k + 1, N + 1))
    if l > k + 1:
        return prod(bwd[n] for n in range(1, k)) * prod(up(n) for n in range(k + 1, l)) \
            * prod(bwd[n] for n in range(l, N + 1))
    if l == k:
        return prod(up(n) for n in range(1, k)) * prod(up(n) for n in range(k + 1, N + 1))
    return prod(bwd[n] for n in range(1, k)) * prod(bwd[n] for n in range(k + 1, N + 1))


def brute_population_solve(W):
    """Stationary vector from a dense least-squares solve, as a float check."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    a = np.vstack([W, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(a, b, rcond=None)[0]


def relative(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a), np.abs(b))))
