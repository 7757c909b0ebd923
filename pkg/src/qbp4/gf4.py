"""GF(4) representation of Pauli operators.

An element is stored as the integer ``x | (z << 1)`` of its binary-symplectic
bit pair, so ``0 = I``, ``OMEGA = X``, ``OMEGA_BAR = Z`` and ``ONE = Y``.
Addition is XOR of the codes. Pauli vectors are ``uint8`` numpy arrays of
codes; batches of them are 2-d arrays with one vector per row.
"""
import numpy as np

ZERO = 0
OMEGA = 1
OMEGA_BAR = 2
ONE = 3

NONZERO = (ONE, OMEGA, OMEGA_BAR)
"""Component order of LLR triples: (1, omega, omega-bar)."""

_PAULI_CHARS = {"I": ZERO, "X": OMEGA, "Z": OMEGA_BAR, "Y": ONE}
_PAULI_NAMES = "IXZY"

# TRACE[a, b] = <a, b>
TRACE = np.array(
    [[((a & 1) & (b >> 1)) ^ ((a >> 1) & (b & 1)) for b in range(4)] for a in range(4)],
    dtype=np.uint8,
)

# ANTICOMMUTE[s] = which components of (1, omega, omega-bar) have <zeta, s> = 1
ANTICOMMUTE = TRACE[:, list(NONZERO)].astype(bool)

# component index of each nonzero element inside an LLR triple
COMPONENT = {ONE: 0, OMEGA: 1, OMEGA_BAR: 2}


def trace_inner_product(a, b):
    """Trace inner product of two GF(4) elements, 1 iff the Paulis anticommute."""
    return int(TRACE[a, b])


def _as_pauli(v):
    v = np.asarray(v, dtype=np.uint8)
    if v.size and v.max() > 3:
        raise ValueError("GF(4) codes must lie in {0, 1, 2, 3}")
    return v


def vector_trace_inner_product(a, b):
    a, b = _as_pauli(a), _as_pauli(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.bitwise_xor.reduce(TRACE[a, b], axis=None)) if a.size else 0


def symplectic_product(a, b):
    """Symplectic product of two binary vectors laid out as ``(x | z)``."""
    a = np.asarray(a, dtype=np.uint8) & 1
    b = np.asarray(b, dtype=np.uint8) & 1
    if a.shape != b.shape or a.shape[-1] % 2:
        raise ValueError(f"incompatible symplectic vectors {a.shape}, {b.shape}")
    n = a.shape[-1] // 2
    return int((a[:n] @ b[n:] + a[n:] @ b[:n]) % 2)


def binary_to_gf4(x, z):
    x = np.asarray(x, dtype=np.uint8)
    z = np.asarray(z, dtype=np.uint8)
    if x.shape != z.shape:
        raise ValueError("x and z parts differ in length")
    return (x & 1) | ((z & 1) << 1)


def gf4_to_binary(p):
    """Split Pauli codes into their ``(x, z)`` bit arrays."""
    p = _as_pauli(p)
    return p & 1, p >> 1


def symplectic_vector(p):
    """Concatenated ``(x | z)`` form of a Pauli vector."""
    x, z = gf4_to_binary(p)
    return np.concatenate([x, z], axis=-1)


def weight(p):
    return int(np.count_nonzero(p))


def pauli_from_string(s):
    """Parse ``"IXYZ"``-style strings (``_`` is accepted for identity)."""
    try:
        return np.array([_PAULI_CHARS[c] for c in s.upper().replace("_", "I")], dtype=np.uint8)
    except KeyError as exc:
        raise ValueError(f"not a Pauli string: {s!r}") from exc


def pauli_to_string(p):
    return "".join(_PAULI_NAMES[c] for c in _as_pauli(p))


def pauli_from_sparse(n, data):
    """Build a Pauli vector from ``{qubit: 'X'|'Y'|'Z'}`` or strings like ``"Y7"``.

    Qubit labels in the string form are 1-based, e.g. ``"Y3 Y5 Y6 Y7"``.
    """
    p = np.zeros(n, dtype=np.uint8)
    if isinstance(data, str):
        for tok in data.replace(",", " ").split():
            p[int(tok[1:]) - 1] = _PAULI_CHARS[tok[0].upper()]
    else:
        for q, c in data.items():
            p[q] = _PAULI_CHARS[c.upper()]
    return p
