"""Redundant low-weight checks and overcomplete check matrices.

Redundant rows are GF(2) combinations of the rows of one side (``hx`` or
``hz``) of a CSS code. Every row carries its combination vector, so the
overcomplete syndrome follows from the measured one as ``z_oc = M z``.
"""
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gf2
from .codes import CheckMatrix, CssCode, InvalidCodeError, to_quaternary
from .gf4 import OMEGA, OMEGA_BAR

# -- packed rows ---------------------------------------------------------------
# Bit 0 of a row is the most significant bit of word 0, so comparing word
# tuples numerically is lexicographic order on the bit string.


def pack_rows(a):
    a = np.atleast_2d(np.asarray(a, dtype=np.uint8))
    k, n = a.shape
    words = max(1, -(-n // 64))
    padded = np.zeros((k, words * 64), dtype=np.uint8)
    padded[:, :n] = a
    packed = np.packbits(padded, axis=1, bitorder="big")
    return packed.view(">u8").astype(np.uint64).reshape(k, words)


def unpack_rows(p, n):
    p = np.ascontiguousarray(np.atleast_2d(p).astype(">u8"))
    bits = np.unpackbits(p.view(np.uint8), axis=1, bitorder="big")
    return bits[:, :n]


def _popcount(p):
    return np.bitwise_count(p).sum(axis=-1, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class RedundantRow:
    """A check row ``row == combo @ h (mod 2)`` of weight ``weight``."""

    row: np.ndarray
    combo: np.ndarray

    @property
    def weight(self):
        return int(self.row.sum())

    def key(self):
        return self.row.tobytes()


@dataclass(frozen=True)
class SearchEffort:
    """Work budget for :func:`find_low_weight_rows`.

    ``iterations`` random information sets are drawn, and within each all
    sums of at most ``max_combination`` reduced rows are inspected.
    ``exhaustive`` enumerates all ``2**m - 1`` combinations instead, which is
    practical up to roughly 26 rows.
    """

    iterations: int = 200
    max_combination: int = 3
    rng_seed: int = 0
    exhaustive: bool = False


def _collect(found, rows_p, combos_p, max_weight):
    w = _popcount(rows_p)
    keep = np.flatnonzero((w <= max_weight) & (w > 0))
    for idx in keep:
        key = rows_p[idx].tobytes()
        if key not in found:
            found[key] = (rows_p[idx], combos_p[idx])


def _exhaustive(h, max_weight):
    m = h.shape[0]
    hp = pack_rows(h)
    lo_bits = m // 2
    hi_bits = m - lo_bits

    def span(rows):
        # all 2**k XOR combinations, index bit b <-> rows[b]
        table = np.zeros((1, hp.shape[1]), dtype=np.uint64)
        for r in rows:
            table = np.concatenate([table, table ^ r])
        return table

    lo = span(hp[:lo_bits])
    hi = span(hp[lo_bits:])
    eye = np.eye(m, dtype=np.uint8)
    lo_c = span(pack_rows(eye[:lo_bits])) if lo_bits else np.zeros((1, 1), np.uint64)
    hi_c = span(pack_rows(eye[lo_bits:]))
    if not lo_bits:
        lo_c = np.zeros((1, hi_c.shape[1]), dtype=np.uint64)
    found = {}
    chunk = max(1, (1 << 18) // len(lo))
    for start in range(0, 1 << hi_bits, chunk):
        h_rows = hi[start:start + chunk]
        rows = (h_rows[:, None, :] ^ lo[None, :, :]).reshape(-1, hp.shape[1])
        combos = (hi_c[start:start + chunk][:, None, :] ^ lo_c[None, :, :]).reshape(-1, hi_c.shape[1])
        _collect(found, rows, combos, max_weight)
    return found


def _information_set(h, max_weight, effort):
    m, n = h.shape
    found = {}
    sizes = range(1, effort.max_combination + 1)
    for it in range(effort.iterations):
        rng = np.random.default_rng([effort.rng_seed, it])
        r, _, u = gf2.row_reduce(h, track=True, col_order=rng.permutation(n))
        rp, up = pack_rows(r), pack_rows(u)
        for s in sizes:
            if s > len(r):
                break
            idx = np.array(list(itertools.combinations(range(len(r)), s)))
            rows = np.bitwise_xor.reduce(rp[idx], axis=1)
            combos = np.bitwise_xor.reduce(up[idx], axis=1)
            _collect(found, rows, combos, max_weight)
    return found


def find_low_weight_rows(h, max_weight, effort=SearchEffort()):
    """Nonzero GF(2) combinations of the rows of ``h`` with weight at most ``max_weight``.

    The result is deduplicated by row and sorted by (weight, lexicographic
    row). It is deterministic given ``effort.rng_seed``. When ``h`` has
    dependent rows, each distinct row is reported once with one valid
    combination vector.
    """
    h = np.atleast_2d(np.asarray(h, dtype=np.uint8))
    if h.size == 0:
        raise ValueError("h is empty")
    m, n = h.shape
    found = _exhaustive(h, max_weight) if effort.exhaustive else _information_set(h, max_weight, effort)
    out = [RedundantRow(unpack_rows(r, n)[0], unpack_rows(c, m)[0]) for r, c in found.values()]
    return sort_rows(out)


def sort_rows(rows):
    return sorted(rows, key=lambda r: (r.weight, tuple(r.row)))


def _select(rows, originals, budget, rng):
    """Originals plus redundant rows, honouring a per-weight budget for this side."""
    chosen = list(originals)
    seen = {r.key() for r in originals}
    extra = [r for r in rows if r.key() not in seen]
    if budget is None:
        return chosen + extra
    by_weight = {}
    for r in extra:
        by_weight.setdefault(r.weight, []).append(r)
    have = {}
    for r in originals:
        have[r.weight] = have.get(r.weight, 0) + 1
    for w in sorted(budget):
        pool = by_weight.get(w, [])
        room = max(0, budget[w] - have.get(w, 0))
        if room >= len(pool):
            chosen += pool
        else:
            pick = np.sort(rng.choice(len(pool), size=room, replace=False))
            chosen += [pool[i] for i in pick]
    return chosen


def _split_budget(budget):
    if budget is None:
        return None, None
    bx = {w: c - c // 2 for w, c in budget.items()}
    bz = {w: c // 2 for w, c in budget.items()}
    return bx, bz


@dataclass(frozen=True, eq=False)
class OvercompleteCheckMatrix:
    """Overcomplete check matrix of a CSS code.

    ``hx_oc == mx @ code.hx`` and ``hz_oc == mz @ code.hz`` over GF(2); the
    GF(4) matrix ``s_oc`` stacks the X-type rows above the Z-type rows.
    """

    code: CssCode
    hx_oc: np.ndarray
    hz_oc: np.ndarray
    mx: np.ndarray
    mz: np.ndarray
    s_oc: CheckMatrix

    @property
    def m_oc(self):
        return self.s_oc.m

    @property
    def m_matrix(self):
        """Block-diagonal ``M`` acting on syndromes ordered X rows then Z rows."""
        m = np.zeros((self.m_oc, self.code.m), dtype=np.uint8)
        ax, bx = self.mx.shape
        m[:ax, :bx] = self.mx
        m[ax:, bx:] = self.mz
        return m

    def weights(self):
        return np.concatenate([self.hx_oc.sum(1), self.hz_oc.sum(1)])

    def __repr__(self):
        return f"OvercompleteCheckMatrix({self.code.name!r}, m_oc={self.m_oc}, m={self.code.m})"


def _build(code, xs, zs):
    n = code.n
    hx = np.array([r.row for r in xs], dtype=np.uint8).reshape(-1, n)
    hz = np.array([r.row for r in zs], dtype=np.uint8).reshape(-1, n)
    mx = np.array([r.combo for r in xs], dtype=np.uint8).reshape(-1, code.hx.shape[0])
    mz = np.array([r.combo for r in zs], dtype=np.uint8).reshape(-1, code.hz.shape[0])
    if (gf2.matmul(mx, code.hx) != hx).any() or (gf2.matmul(mz, code.hz) != hz).any():
        raise InvalidCodeError("redundant rows do not match their combination vectors")
    s_rows = np.vstack([hx * np.uint8(OMEGA), hz * np.uint8(OMEGA_BAR)]).reshape(-1, n)
    # raises when rows anticommute, which would mean an upstream bug
    s_oc = CheckMatrix(s_rows, check_commutation=True)
    return OvercompleteCheckMatrix(code, hx, hz, mx, mz, s_oc)


def original_rows(h):
    eye = np.eye(h.shape[0], dtype=np.uint8)
    return [RedundantRow(h[i].copy(), eye[i]) for i in range(h.shape[0])]


def assemble_overcomplete(code, x_rows, z_rows, budget=None, allow_duplicates=False, seed=0):
    """Combine the code's own rows with redundant rows into ``S_oc``.

    ``budget`` maps row weight to the total number of rows of that weight
    (both sides together, split evenly) and may be ``None`` for every
    supplied row. ``budget=0`` adds nothing and returns the original matrix
    with ``M = I``. Otherwise rows are ordered by weight, then
    lexicographically. When a weight class must be truncated, a uniformly
    random subset (seeded) is kept. ``allow_duplicates`` appends the given
    rows even when they repeat existing ones.
    """
    if not isinstance(code, CssCode):
        raise InvalidCodeError("overcomplete matrices are built per side of a CSS code")
    to_quaternary(code)  # validates
    ox, oz = original_rows(code.hx), original_rows(code.hz)
    if isinstance(budget, int) and budget == 0:
        return _build(code, ox, oz)
    for side, rows, h in (("X", x_rows, code.hx), ("Z", z_rows, code.hz)):
        for r in rows:
            if r.combo.shape != (h.shape[0],) or (gf2.matmul(r.combo[None], h)[0] != r.row).any():
                raise InvalidCodeError(f"{side} row is not a combination of the code's {side} checks")
    if allow_duplicates:
        xs = sort_rows(ox + list(x_rows))
        zs = sort_rows(oz + list(z_rows))
        return _build(code, xs, zs)
    bx, bz = _split_budget(budget)
    rng = np.random.default_rng(seed)
    xs = sort_rows(_select(sort_rows(x_rows), ox, bx, rng))
    zs = sort_rows(_select(sort_rows(z_rows), oz, bz, rng))
    return _build(code, xs, zs)


def generate_overcomplete(code, max_weight, budget=None, effort=SearchEffort(), seed=0):
    """Search both sides for low-weight rows and assemble ``S_oc``."""
    x_rows = find_low_weight_rows(code.hx, max_weight, effort)
    z_rows = find_low_weight_rows(code.hz, max_weight, effort)
    return assemble_overcomplete(code, x_rows, z_rows, budget=budget, seed=seed)


def map_syndrome(oc, z):
    """``z_oc = M z (mod 2)`` for one syndrome or a batch of rows."""
    z = np.asarray(z, dtype=np.uint8)
    if z.shape[-1] != oc.code.m:
        raise ValueError(f"syndrome length {z.shape[-1]} does not match m = {oc.code.m}")
    m = oc.m_matrix.astype(np.float64)
    return ((z.astype(np.float64) @ m.T).astype(np.int64) & 1).astype(np.uint8)


# -- file format -----------------------------------------------------------------

FORMAT = "qbp4-overcomplete/1"


def _support(a):
    return [np.flatnonzero(r).tolist() for r in a]


def _dense(supports, width):
    a = np.zeros((len(supports), width), dtype=np.uint8)
    for i, s in enumerate(supports):
        a[i, s] = 1
    return a


def overcomplete_to_dict(oc):
    s = to_quaternary(oc.code)
    return {
        "format": FORMAT,
        "source": {"name": oc.code.name, "fingerprint": s.fingerprint(), "n": oc.code.n,
                   "m_x": int(oc.code.hx.shape[0]), "m_z": int(oc.code.hz.shape[0])},
        "m_oc": int(oc.m_oc),
        "x": {"rows": _support(oc.hx_oc), "combos": _support(oc.mx)},
        "z": {"rows": _support(oc.hz_oc), "combos": _support(oc.mz)},
    }


def overcomplete_from_dict(data, code):
    if data.get("format") != FORMAT:
        raise InvalidCodeError(f"unsupported overcomplete matrix format {data.get('format')!r}")
    src = data["source"]
    if src["fingerprint"] != to_quaternary(code).fingerprint():
        raise InvalidCodeError(f"overcomplete matrix was generated for a different code ({src['name']!r})")
    n = code.n
    sides = []
    for key, h in (("x", code.hx), ("z", code.hz)):
        rows = _dense(data[key]["rows"], n)
        combos = _dense(data[key]["combos"], h.shape[0])
        sides.append([RedundantRow(r, c) for r, c in zip(rows, combos)])
    return _build(code, *sides)


def save_overcomplete(oc, path):
    path = Path(path)
    path.write_text(json.dumps(overcomplete_to_dict(oc)))
    return path


def load_overcomplete(path, code):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidCodeError(f"cannot read overcomplete matrix {path}: {exc}") from exc
    return overcomplete_from_dict(data, code)
