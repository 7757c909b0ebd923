"""Dense GF(2) linear algebra on ``uint8`` matrices."""
import numpy as np


def row_reduce(h, track=False, col_order=None):
    """Reduced row echelon form of ``h`` over GF(2).

    Returns ``(r, pivots, u)`` where ``r`` holds the nonzero reduced rows,
    ``pivots`` their pivot columns and ``u`` (only when ``track``) the
    transform with ``r == u @ h (mod 2)``. ``col_order`` sets the order in
    which columns are tried as pivots.
    """
    a = np.array(h, dtype=np.uint8) & 1
    m, n = a.shape
    u = np.eye(m, dtype=np.uint8) if track else None
    cols = range(n) if col_order is None else col_order
    pivots = []
    rank = 0
    for c in cols:
        if rank == m:
            break
        nz = np.flatnonzero(a[rank:, c])
        if nz.size == 0:
            continue
        p = rank + nz[0]
        if p != rank:
            a[[rank, p]] = a[[p, rank]]
            if track:
                u[[rank, p]] = u[[p, rank]]
        hit = np.flatnonzero(a[:, c])
        hit = hit[hit != rank]
        if hit.size:
            a[hit] ^= a[rank]
            if track:
                u[hit] ^= u[rank]
        pivots.append(c)
        rank += 1
    return a[:rank], pivots, (u[:rank] if track else None)


def rank(h):
    h = np.asarray(h)
    if h.size == 0:
        return 0
    return len(row_reduce(h)[1])


def nullspace(h):
    """Basis (as rows) of ``{v : h @ v = 0 (mod 2)}``."""
    h = np.asarray(h, dtype=np.uint8)
    n = h.shape[1]
    r, pivots, _ = row_reduce(h)
    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for row, p in zip(r, pivots):
            if row[f]:
                basis[k, p] = 1
    return basis


def matmul(a, b):
    """GF(2) product of integer matrices, exact for any size."""
    return (np.asarray(a, dtype=np.int64) @ np.asarray(b, dtype=np.int64)) & 1
