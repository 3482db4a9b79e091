"""Small dense GF(2) linear algebra on uint8 numpy arrays."""
from __future__ import annotations

import itertools

import numpy as np


def as_gf2(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.int64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    return (a % 2).astype(np.uint8)


def parse_rows(rows: list[str]) -> np.ndarray:
    """``["1010", "0110"]`` -> 2x4 matrix. Raises ValueError on bad input."""
    if not rows:
        raise ValueError("matrix has no rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if not isinstance(r, str) or len(r) != width or set(r) - {"0", "1"}:
            raise ValueError(f"row {i} ({r!r}) must be a string of {width} '0'/'1' characters")
    return np.array([[int(c) for c in r] for r in rows], dtype=np.uint8)


def format_rows(m: np.ndarray) -> list[str]:
    return ["".join(str(int(x)) for x in row) for row in as_gf2(m)]


def rref(m) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form and pivot columns."""
    a = as_gf2(m).copy()
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.flatnonzero(a[r:, c]) + r
        if hits.size == 0:
            continue
        p = hits[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.flatnonzero(a[:, c])
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def rank(m) -> int:
    return len(rref(m)[1])


def in_rowspace(v, m) -> bool:
    return rank(np.vstack([as_gf2(m), as_gf2(v)])) == rank(m)


def nullspace(m) -> np.ndarray:
    """Basis (as rows) of {x : m x = 0}."""
    a = as_gf2(m)
    red, pivots = rref(a)
    n = a.shape[1]
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        x = np.zeros(n, dtype=np.uint8)
        x[f] = 1
        for row, p in zip(red, pivots):
            x[p] = row[f]
        basis.append(x)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), n)


def solve_left(m, v) -> np.ndarray | None:
    """Coefficients c with c @ m = v over GF(2), or None if v is not in the row space."""
    a = as_gf2(m)
    v = as_gf2(v).reshape(-1)
    k = a.shape[0]
    aug = np.hstack([a.T, v.reshape(-1, 1)])
    red, pivots = rref(aug)
    if k in pivots:
        return None
    c = np.zeros(k, dtype=np.uint8)
    for row, p in zip(red, pivots):
        c[p] = row[k]
    return c


def span(m) -> np.ndarray:
    """All 2^k codewords generated by the rows of ``m`` (rows assumed independent)."""
    a = as_gf2(m)
    k = a.shape[0]
    msgs = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.uint8).reshape(-1, k)
    return (msgs.astype(np.int64) @ a % 2).astype(np.uint8)


def mul(a, b) -> np.ndarray:
    return (as_gf2(a).astype(np.int64) @ as_gf2(b).astype(np.int64) % 2).astype(np.uint8)
