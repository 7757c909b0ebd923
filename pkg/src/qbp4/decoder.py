"""Refined log-domain BP4 with scalar messages and optional NBP weights.

All routines work on batches: syndromes are ``(B, m)`` arrays and messages
``(B, E)`` arrays over the edges of the Tanner graph. Each row of a batch
is processed independently, so a sample's result does not depend on the
other samples decoded with it.

The decoder always runs through the weighted update rules; plain BP is the
special case of unit weights, which is bit-identical because multiplying
by ``1.0`` is exact.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codes import CheckMatrix, compute_syndrome
from .gf4 import ANTICOMMUTE, COMPONENT, NONZERO

CLIP_LLR = 30.0
ATANH_CLIP = 1.0 - 1e-12


class DecoderGraph:
    """Tanner graph of a GF(4) check matrix with edges ordered by check.

    Edge ``e`` joins check ``edge_check[e]`` and qubit ``edge_var[e]`` and
    carries the nonzero label ``S[j, i]``.
    """

    def __init__(self, s):
        if not isinstance(s, CheckMatrix):
            s = CheckMatrix(s)
        self.s = s
        m, n = s.shape
        self.m, self.n = m, n
        ec, ev = np.nonzero(s.rows)
        self.edge_check, self.edge_var = ec, ev
        self.label = s.rows[ec, ev]
        E = self.n_edges = len(ec)
        self.mask = ANTICOMMUTE[self.label].astype(np.float64)  # (E, 3)
        comp = np.array([COMPONENT[int(x)] for x in self.label], dtype=np.int64).reshape(E)
        self.own = comp
        self.other = np.array([[c for c in range(3) if c != k] for k in comp], dtype=np.int64).reshape(E, 2)

        deg = np.bincount(ec, minlength=m)
        self.check_degree = deg
        self.dc = int(deg.max()) if m else 0
        first = np.concatenate([[0], np.cumsum(deg)[:-1]])
        pos = np.arange(E) - first[ec]
        self.check_slots = np.full((m, self.dc), E, dtype=np.int64)  # E = padding slot
        self.check_slots[ec, pos] = np.arange(E)
        self.edge_slot = ec * self.dc + pos  # flat index into (m, dc)

        self.var_perm = np.argsort(ev, kind="stable")
        vdeg = np.bincount(ev, minlength=n)
        self.var_degree = vdeg
        self.active_vars = np.flatnonzero(vdeg)
        starts = np.concatenate([[0], np.cumsum(vdeg)[:-1]])
        self.var_starts = starts[self.active_vars]

    def __repr__(self):
        return f"DecoderGraph(m={self.m}, n={self.n}, edges={self.n_edges})"


@dataclass
class NbpWeights:
    """Per-iteration check weights ``w_c[l, j]`` and qubit weights ``w_v[l, i]``."""

    w_c: np.ndarray
    w_v: np.ndarray

    def __post_init__(self):
        self.w_c = np.array(self.w_c, dtype=np.float64, ndmin=2)
        self.w_v = np.array(self.w_v, dtype=np.float64, ndmin=2)
        if self.w_c.shape[0] != self.w_v.shape[0]:
            raise ValueError("w_c and w_v must cover the same number of iterations")
        if not (np.isfinite(self.w_c).all() and np.isfinite(self.w_v).all()):
            raise ValueError("NBP weights must be finite")

    @classmethod
    def ones(cls, iterations, m, n):
        return cls(np.ones((iterations, m)), np.ones((iterations, n)))

    @property
    def iterations(self):
        return self.w_c.shape[0]

    def copy(self):
        return NbpWeights(self.w_c.copy(), self.w_v.copy())


def init_priors(epsilon0):
    """LLR triple ``ln((1 - eps0) / (eps0 / 3))`` for each nonzero element."""
    if not 0.0 < epsilon0 < 1.0:
        raise ValueError(f"epsilon0 must lie in (0, 1), got {epsilon0}")
    return np.full(3, np.log((1.0 - epsilon0) / (epsilon0 / 3.0)))


def _quantize(gamma, own, other):
    """Belief quantization over the last axis of ``gamma`` (components 1, w, w-bar)."""
    lead = (1,) * (gamma.ndim - own.ndim - 1)
    own = own.reshape(lead + own.shape + (1,))
    other = other.reshape(lead + other.shape)
    g_own = np.take_along_axis(gamma, own, axis=-1)[..., 0]
    g_a = np.take_along_axis(gamma, other[..., :1], axis=-1)[..., 0]
    g_b = np.take_along_axis(gamma, other[..., 1:], axis=-1)[..., 0]
    return np.logaddexp(0.0, -g_own) - np.logaddexp(-g_a, -g_b)


def belief_quantize(lam, eta):
    """Scalar LLR of the commutation bit ``<e_i, eta>`` from an LLR triple."""
    if eta not in NONZERO:
        raise ValueError("eta must be a nonzero GF(4) element")
    lam = np.asarray(lam, dtype=np.float64)
    k = COMPONENT[eta]
    own = np.full(lam.shape[:-1], k, dtype=np.int64)
    other = np.broadcast_to(np.array([c for c in range(3) if c != k]), lam.shape[:-1] + (2,))
    return np.clip(_quantize(lam, own, other), -CLIP_LLR, CLIP_LLR)


# -- one flooding iteration -------------------------------------------------------

def initial_messages(graph, priors, batch):
    """``lambda_{i->j}`` before the first check update (unweighted priors)."""
    gamma = np.broadcast_to(priors, (graph.n_edges, 3))
    lam = np.clip(_quantize(gamma, graph.own, graph.other), -CLIP_LLR, CLIP_LLR)
    return np.broadcast_to(lam, (batch, graph.n_edges)).copy()


def _exclusive_products(graph, t):
    """``prod_{i' in N(j) \\ i} t`` per edge via prefix/suffix products."""
    B = t.shape[0]
    padded = np.concatenate([t, np.ones((B, 1))], axis=1)[:, graph.check_slots]  # (B, m, dc)
    ones = np.ones((B, graph.m, 1))
    pre = np.cumprod(np.concatenate([ones, padded[:, :, :-1]], axis=2), axis=2)
    suf = np.cumprod(np.concatenate([ones, padded[:, :, :0:-1]], axis=2), axis=2)[:, :, ::-1]
    return (pre * suf).reshape(B, -1)[:, graph.edge_slot]


def cn_update(graph, lam, z, w_c=None, cache=None):
    """Check-node messages ``Delta_{i<-j}`` for a batch of syndromes ``z``."""
    t = np.tanh(lam / 2.0)
    prod = _exclusive_products(graph, t)
    clipped = np.clip(prod, -ATANH_CLIP, ATANH_CLIP)
    a = np.arctanh(clipped)
    sign = 1.0 - 2.0 * np.asarray(z, dtype=np.float64)[:, graph.edge_check]
    w = 1.0 if w_c is None else w_c[graph.edge_check]
    raw = sign * 2.0 * w * a
    delta = np.clip(raw, -CLIP_LLR, CLIP_LLR)
    if cache is not None:
        cache.update(t=t, prod=prod, a=a, sign=sign, delta_raw=raw)
    return delta


def _totals(graph, delta):
    """Per-qubit sums of incoming ``Delta`` split by anticommuting component."""
    B = delta.shape[0]
    contrib = delta[:, :, None] * graph.mask  # (B, E, 3)
    tot = np.zeros((B, graph.n, 3))
    if graph.n_edges:
        tot[:, graph.active_vars] = np.add.reduceat(contrib[:, graph.var_perm], graph.var_starts, axis=1)
    return contrib, tot


def hard_decision_llrs(graph, delta, priors, w_v=None, cache=None):
    """Posterior LLR triples ``Gamma_i``.

    The triples are not clipped: on high-degree qubits their components
    routinely exceed ``CLIP_LLR`` and clipping would tie the argmin.
    """
    contrib, tot = _totals(graph, delta)
    w = np.ones(graph.n) if w_v is None else w_v
    base = w[:, None] * priors  # (n, 3)
    raw = base + tot
    if cache is not None:
        cache.update(gamma=raw, contrib=contrib, tot=tot, base=base)
    return raw


def vn_update(graph, delta, priors, w_v=None, cache=None):
    """Variable-node scalar messages ``lambda_{i->j}`` from check messages."""
    local = {} if cache is None else cache
    if "contrib" not in local:
        hard_decision_llrs(graph, delta, priors, w_v, cache=local)
    ev = graph.edge_var
    g = local["base"][ev] + local["tot"][:, ev] - local["contrib"]  # (B, E, 3)
    q = _quantize(g, graph.own, graph.other)
    if cache is not None:
        cache.update(g=g, q_raw=q)
    return np.clip(q, -CLIP_LLR, CLIP_LLR)


def hard_decision(gamma):
    """``e_i = 0`` if every component is positive, else the argmin component.

    Ties resolve in the order 1, omega, omega-bar.
    """
    idx = np.argmin(gamma, axis=-1)
    e = np.asarray(NONZERO, dtype=np.uint8)[idx]
    e[(gamma > 0).all(axis=-1)] = 0
    return e


# -- full decoder ----------------------------------------------------------------

@dataclass
class DecodeResult:
    e_hat: np.ndarray
    converged: bool
    iterations_used: int
    gammas: list = field(default_factory=list)

    def to_dict(self):
        from .gf4 import pauli_to_string

        return {"e_hat": pauli_to_string(self.e_hat), "converged": bool(self.converged),
                "iterations_used": int(self.iterations_used)}


@dataclass
class BatchDecodeResult:
    e_hat: np.ndarray        # (B, n)
    converged: np.ndarray    # (B,)
    iterations_used: np.ndarray  # (B,)
    gammas: np.ndarray | None = None  # (L, B, n, 3) when recorded

    def __len__(self):
        return len(self.converged)

    def __getitem__(self, b):
        g = [] if self.gammas is None else list(self.gammas[:, b])
        return DecodeResult(self.e_hat[b], bool(self.converged[b]), int(self.iterations_used[b]), g)


def _weights_for(weights, max_iter, m, n):
    if weights is None:
        return NbpWeights.ones(max_iter, m, n)
    if weights.iterations < max_iter:
        raise ValueError(f"weights cover {weights.iterations} iterations, decoder runs {max_iter}")
    if weights.w_c.shape[1] != m or weights.w_v.shape[1] != n:
        raise ValueError("weight shapes do not match the check matrix")
    return weights


def decode_batch(graph, z, epsilon0=0.1, max_iter=32, weights=None, early_stop=True,
                 record_gammas=False):
    """Flooding BP4 on a batch of syndromes.

    Each iteration runs the check update, the hard decision and the syndrome
    test, then (if needed) the variable update. Rows whose estimate matches
    their syndrome stop early unless ``early_stop`` is false.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.uint8))
    if z.shape[1] != graph.m:
        raise ValueError(f"syndrome length {z.shape[1]} does not match m = {graph.m}")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    weights = _weights_for(weights, max_iter, graph.m, graph.n)
    priors = init_priors(epsilon0)
    B = z.shape[0]
    e_hat = np.zeros((B, graph.n), dtype=np.uint8)
    converged = np.zeros(B, dtype=bool)
    used = np.full(B, max_iter, dtype=np.int64)
    gammas = np.zeros((max_iter, B, graph.n, 3)) if record_gammas else None

    active = np.arange(B)
    lam = initial_messages(graph, priors, B)
    za = z
    for it in range(max_iter):
        delta = cn_update(graph, lam, za, weights.w_c[it])
        cache = {}
        gamma = hard_decision_llrs(graph, delta, priors, weights.w_v[it], cache=cache)
        est = hard_decision(gamma)
        e_hat[active] = est
        if record_gammas:
            gammas[it, active] = gamma
        ok = (compute_syndrome(graph.s, est) == za).all(axis=1)
        converged[active] = ok
        if early_stop and ok.any():
            used[active[ok]] = it + 1
            keep = ~ok
            active, za, delta = active[keep], za[keep], delta[keep]
            cache = {"base": cache["base"], "tot": cache["tot"][keep], "contrib": cache["contrib"][keep]}
        if active.size == 0 or it == max_iter - 1:
            break
        lam = vn_update(graph, delta, priors, weights.w_v[it], cache=cache)
    if record_gammas and early_stop:
        # repeat the final posterior of stopped rows so every row has L entries
        for b in range(B):
            last = used[b] - 1
            gammas[last + 1:, b] = gammas[last, b]
    return BatchDecodeResult(e_hat, converged, used, gammas)


def decode(graph, z, epsilon0=0.1, max_iter=32, weights=None, early_stop=True, record_gammas=False):
    """Decode a single syndrome; see :func:`decode_batch`."""
    z = np.asarray(z, dtype=np.uint8)
    if z.ndim != 1:
        raise ValueError("decode expects a single syndrome; use decode_batch for batches")
    return decode_batch(graph, z[None], epsilon0, max_iter, weights, early_stop, record_gammas)[0]


# -- weight files ------------------------------------------------------------------

WEIGHTS_FORMAT = "qbp4-weights/1"


def save_weights(weights, path, graph):
    """JSON checkpoint; weight tensors are stored row-major by iteration."""
    data = {
        "format": WEIGHTS_FORMAT,
        "code_hash": graph.s.fingerprint(),
        "iterations": weights.iterations,
        "m": graph.m,
        "n": graph.n,
        "w_c": weights.w_c.ravel().tolist(),
        "w_v": weights.w_v.ravel().tolist(),
    }
    Path(path).write_text(json.dumps(data))
    return path


def load_weights(path, graph=None):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read weights file {path}: {exc}") from exc
    if data.get("format") != WEIGHTS_FORMAT:
        raise ValueError(f"{path}: unsupported weights format {data.get('format')!r}")
    if graph is not None and data["code_hash"] != graph.s.fingerprint():
        raise ValueError(f"{path}: weights were trained for a different check matrix")
    L, m, n = data["iterations"], data["m"], data["n"]
    return NbpWeights(np.reshape(data["w_c"], (L, m)), np.reshape(data["w_v"], (L, n)))
