"""Stabilizer code construction, check matrices, syndromes and the
logical-equivalence test."""
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gf2
from .gf4 import OMEGA, OMEGA_BAR, binary_to_gf4, gf4_to_binary


class InvalidCodeError(ValueError):
    pass


def _binary_matrix(a, n=None):
    a = np.atleast_2d(np.asarray(a, dtype=np.uint8))
    if a.size == 0:
        return np.zeros((0, n or 0), dtype=np.uint8)
    if a.max() > 1:
        raise InvalidCodeError("binary matrix entries must be 0 or 1")
    return a


@dataclass(frozen=True, eq=False)
class CssCode:
    """CSS code given by its X-type and Z-type check rows.

    ``d`` is declared metadata only and never computed.
    """

    hx: np.ndarray
    hz: np.ndarray
    name: str = ""
    d: int | None = None

    def __post_init__(self):
        n = max(np.shape(self.hx)[-1], np.shape(self.hz)[-1])
        hx = _binary_matrix(self.hx, n)
        hz = _binary_matrix(self.hz, n)
        if hx.shape[1] != hz.shape[1]:
            raise InvalidCodeError(f"hx has {hx.shape[1]} columns but hz has {hz.shape[1]}")
        hx.setflags(write=False)
        hz.setflags(write=False)
        object.__setattr__(self, "hx", hx)
        object.__setattr__(self, "hz", hz)

    @property
    def n(self):
        return self.hx.shape[1]

    @property
    def k(self):
        return self.n - gf2.rank(self.hx) - gf2.rank(self.hz)

    @property
    def m(self):
        return self.hx.shape[0] + self.hz.shape[0]

    def __repr__(self):
        d = "?" if self.d is None else self.d
        return f"CssCode({self.name!r}, [[{self.n},{self.k},{d}]], m={self.m})"


@dataclass(frozen=True, eq=False)
class StabilizerCode:
    """General stabilizer code given as full rows ``(H_X | H_Z)``."""

    hx: np.ndarray
    hz: np.ndarray
    name: str = ""
    d: int | None = None

    def __post_init__(self):
        hx = _binary_matrix(self.hx)
        hz = _binary_matrix(self.hz)
        if hx.shape != hz.shape:
            raise InvalidCodeError("X and Z parts of a stabilizer code must have equal shape")
        object.__setattr__(self, "hx", hx)
        object.__setattr__(self, "hz", hz)

    @property
    def n(self):
        return self.hx.shape[1]

    @property
    def m(self):
        return self.hx.shape[0]


@dataclass
class ValidationReport:
    passed: bool
    offending: list = field(default_factory=list)

    def __bool__(self):
        return self.passed

    def __str__(self):
        if self.passed:
            return "commutation criterion: pass"
        pairs = ", ".join(f"({i},{j})" for i, j in self.offending[:10])
        more = "" if len(self.offending) <= 10 else f" ... ({len(self.offending)} total)"
        return f"commutation criterion: FAIL, anticommuting row pairs {pairs}{more}"


def validate_css(code):
    """Check ``hx @ hz.T == 0`` (CSS codes) or the symplectic criterion."""
    if isinstance(code, StabilizerCode):
        prod = gf2.matmul(code.hx, code.hz.T) ^ gf2.matmul(code.hz, code.hx.T)
    else:
        prod = gf2.matmul(code.hx, code.hz.T)
    bad = [tuple(map(int, ij)) for ij in np.argwhere(prod)]
    return ValidationReport(not bad, bad)


def circulant(coeffs):
    """Circulant matrix whose first row is ``coeffs`` and row i is shifted by i."""
    c = np.asarray(coeffs, dtype=np.uint8)
    return np.stack([np.roll(c, i) for i in range(len(c))]) if len(c) else np.zeros((0, 0), np.uint8)


def exponents_to_coeffs(exponents, half_n):
    c = np.zeros(half_n, dtype=np.uint8)
    for e in exponents:
        c[e % half_n] ^= 1
    return c


def build_gb_code(a_coeffs, b_coeffs, half_n, rows_selected=None, name="", d=None):
    """Generalized bicycle code ``hx = (A | B)``, ``hz = (B^T | A^T)``.

    ``rows_selected`` keeps only the first that many rows of each block; by
    default all ``half_n`` circulant rows are kept.
    """
    if half_n < 1:
        raise InvalidCodeError("half_n must be positive")
    a = np.asarray(a_coeffs, dtype=np.uint8)
    b = np.asarray(b_coeffs, dtype=np.uint8)
    if a.shape != (half_n,) or b.shape != (half_n,):
        raise InvalidCodeError(f"circulant generators must have length {half_n}")
    A, B = circulant(a), circulant(b)
    hx = np.hstack([A, B])
    hz = np.hstack([B.T, A.T])
    if rows_selected is not None:
        if not 0 <= rows_selected <= half_n:
            raise InvalidCodeError(f"rows_selected must lie in [0, {half_n}]")
        hx, hz = hx[:rows_selected], hz[:rows_selected]
    return CssCode(hx, hz, name=name, d=d)


def bch_713():
    """The [[7,1,3]] code with both sides equal to the [7,4,3] BCH check matrix."""
    h = np.array(
        [[1, 0, 1, 0, 1, 0, 1],
         [0, 1, 1, 0, 0, 1, 1],
         [0, 0, 0, 1, 1, 1, 1]],
        dtype=np.uint8,
    )
    return CssCode(h, h.copy(), name="bch713", d=3)


class CheckMatrix:
    """Sparse-aware GF(4) check matrix; rows must mutually commute.

    ``rows`` is an ``(m, n)`` array of GF(4) codes. ``row_support[j]`` and
    ``col_support[i]`` list the nonzero positions per row and column.
    """

    def __init__(self, rows, check_commutation=True):
        rows = np.array(rows, dtype=np.uint8, ndmin=2)
        if rows.size and rows.max() > 3:
            raise ValueError("check matrix entries must be GF(4) codes in {0..3}")
        rows.setflags(write=False)
        self.rows = rows
        self.sx, self.sz = gf4_to_binary(rows)
        if check_commutation:
            bad = self.anticommuting_pairs()
            if bad:
                raise InvalidCodeError(f"check rows do not commute, e.g. rows {bad[0]}")
        self.row_support = [np.flatnonzero(r) for r in rows]
        self.col_support = [np.flatnonzero(c) for c in rows.T]

    @property
    def m(self):
        return self.rows.shape[0]

    @property
    def n(self):
        return self.rows.shape[1]

    @property
    def shape(self):
        return self.rows.shape

    def binary_image(self):
        """``(m, 2n)`` binary matrix ``(S_x | S_z)``."""
        return np.hstack([self.sx, self.sz])

    def anticommuting_pairs(self):
        prod = gf2.matmul(self.sx, self.sz.T) ^ gf2.matmul(self.sz, self.sx.T)
        return [tuple(map(int, ij)) for ij in np.argwhere(np.triu(prod))]

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.asarray(self.rows.shape, dtype=np.int64).tobytes())
        h.update(self.rows.tobytes())
        return h.hexdigest()[:16]

    def __repr__(self):
        return f"CheckMatrix(m={self.m}, n={self.n})"


def to_quaternary(code):
    """GF(4) check matrix of a code: X-type rows first (1 -> omega), then Z-type (1 -> omega-bar)."""
    report = validate_css(code)
    if not report:
        raise InvalidCodeError(str(report))
    if isinstance(code, StabilizerCode):
        return CheckMatrix(binary_to_gf4(code.hx, code.hz), check_commutation=False)
    rows = np.vstack([code.hx * np.uint8(OMEGA), code.hz * np.uint8(OMEGA_BAR)])
    return CheckMatrix(rows.reshape(-1, code.n), check_commutation=False)


class NormalizerMatrix:
    """Generators of the Paulis commuting with every check.

    ``effective_m`` is the GF(2) rank of the check matrix, so there are
    ``2n - effective_m`` rows.
    """

    def __init__(self, rows, effective_m):
        rows = np.array(rows, dtype=np.uint8, ndmin=2)
        rows.setflags(write=False)
        self.rows = rows
        self.effective_m = effective_m
        self.sx, self.sz = gf4_to_binary(rows)

    def __len__(self):
        return self.rows.shape[0]

    @property
    def n(self):
        return self.rows.shape[1]


def compute_normalizer(s):
    if s.m == 0:
        raise ValueError("check matrix is empty")
    # v = (vx | vz) commutes with row (sx | sz) iff sz.vx + sx.vz = 0
    kernel = gf2.nullspace(np.hstack([s.sz, s.sx]))
    n = s.n
    rows = binary_to_gf4(kernel[:, :n], kernel[:, n:])
    return NormalizerMatrix(rows.reshape(-1, n), gf2.rank(s.binary_image()))


def _syndrome(sx, sz, e):
    e = np.asarray(e, dtype=np.uint8)
    if e.shape[-1] != sx.shape[1]:
        raise ValueError(f"error length {e.shape[-1]} does not match n = {sx.shape[1]}")
    ex, ez = gf4_to_binary(e)
    # float products are exact here (sums bounded by n) and use BLAS
    z = ex.astype(np.float64) @ sz.T.astype(np.float64) + ez.astype(np.float64) @ sx.T.astype(np.float64)
    return (z.astype(np.int64) & 1).astype(np.uint8)


def compute_syndrome(s, e):
    """Syndrome bits ``z_j = <e, S_j>``; ``e`` may be one vector or a batch of rows."""
    return _syndrome(s.sx, s.sz, e)


def check_logical_equivalence(e, e_hat, s_perp):
    """True where ``e + e_hat`` commutes with every normalizer generator."""
    e = np.asarray(e, dtype=np.uint8)
    e_hat = np.asarray(e_hat, dtype=np.uint8)
    if e.shape != e_hat.shape:
        raise ValueError(f"shape mismatch {e.shape} vs {e_hat.shape}")
    z = _syndrome(s_perp.sx, s_perp.sz, e ^ e_hat)
    ok = ~z.any(axis=-1)
    return bool(ok) if ok.ndim == 0 else ok


# -- code definition files ---------------------------------------------------

def _coeffs(data, key, half_n):
    if key in data:
        return np.asarray(data[key], dtype=np.uint8)
    exps = data.get(key.replace("coeffs", "exponents"))
    if exps is None:
        raise InvalidCodeError(f"GB code definition needs {key!r} or its exponent form")
    return exponents_to_coeffs(exps, half_n)


def code_from_dict(data):
    kind = data.get("type", "css")
    name = data.get("name", "")
    d = data.get("d")
    if kind == "gb":
        half_n = int(data["half_n"])
        return build_gb_code(
            _coeffs(data, "a_coeffs", half_n),
            _coeffs(data, "b_coeffs", half_n),
            half_n,
            rows_selected=data.get("rows_selected"),
            name=name,
            d=d,
        )
    if kind == "css":
        return CssCode(np.array(data["hx"]), np.array(data["hz"]), name=name, d=d)
    if kind == "explicit":
        return StabilizerCode(np.array(data["hx"]), np.array(data["hz"]), name=name, d=d)
    raise InvalidCodeError(f"unknown code type {kind!r}")


def code_to_dict(code):
    kind = "explicit" if isinstance(code, StabilizerCode) else "css"
    return {"name": code.name, "type": kind, "d": code.d,
            "hx": code.hx.tolist(), "hz": code.hz.tolist()}


BUILTIN_CODES = {"bch713": bch_713}


def load_code(path):
    """Load a code from a JSON definition file or a built-in name."""
    if str(path) in BUILTIN_CODES:
        return BUILTIN_CODES[str(path)]()
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise InvalidCodeError(f"cannot read code file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidCodeError(f"malformed code file {path}: {exc}") from exc
    try:
        return code_from_dict(data)
    except KeyError as exc:
        raise InvalidCodeError(f"{path}: missing field {exc}") from exc


def trace_matrix(a, b):
    """Pairwise trace inner products between the rows of two GF(4) matrices."""
    ax, az = gf4_to_binary(np.atleast_2d(a))
    bx, bz = gf4_to_binary(np.atleast_2d(b))
    return (gf2.matmul(ax, bz.T) ^ gf2.matmul(az, bx.T)).astype(np.uint8)


__all__ = [
    "CssCode", "StabilizerCode", "CheckMatrix", "NormalizerMatrix", "ValidationReport",
    "InvalidCodeError", "bch_713", "build_gb_code", "circulant", "validate_css",
    "to_quaternary", "compute_normalizer", "compute_syndrome", "check_logical_equivalence",
    "load_code", "code_from_dict", "code_to_dict", "trace_matrix", "exponents_to_coeffs",
]
