"""Degeneracy-aware loss and training of NBP weights.

The decoder is unrolled for a fixed number of iterations and differentiated
by hand in reverse mode. Hard clips pass zero gradient outside their range.
"""
import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .channel import sample_fixed_weight, trial_rng
from .codes import compute_syndrome
from .decoder import (ATANH_CLIP, CLIP_LLR, NbpWeights, _quantize, cn_update, hard_decision_llrs,
                      init_priors, initial_messages, vn_update)
from .gf4 import COMPONENT, NONZERO, TRACE

log = logging.getLogger(__name__)

_OWN = np.array([0, 1, 2])
_OTHER = np.array([[1, 2], [0, 2], [0, 1]])


class TrainingDivergedError(RuntimeError):
    pass


# -- loss ----------------------------------------------------------------------

def _anticommute_probs(gamma):
    """``P(<e_i, eta> = 1 | z)`` for eta = 1, omega, omega-bar; shape ``gamma.shape``."""
    q = np.stack([_quantize(gamma, np.full(gamma.shape[:-1], k), np.broadcast_to(_OTHER[k], gamma.shape[:-1] + (2,)))
                  for k in range(3)], axis=-1)
    return expit(-q), q


def soft_equivalence_probability(gamma_i, eta):
    """Probability that the estimated error on one qubit anticommutes with ``eta``."""
    if eta not in NONZERO:
        raise ValueError("eta must be a nonzero GF(4) element")
    p, _ = _anticommute_probs(np.asarray(gamma_i, dtype=np.float64))
    return float(p[COMPONENT[eta]])


class _LossTerms:
    """Fixed gathering structure of the loss for one normalizer."""

    def __init__(self, s_perp):
        rows = s_perp.rows
        self.rows = rows
        self.nz = rows != 0
        comp = np.zeros(rows.shape, dtype=np.int64)
        for code, k in COMPONENT.items():
            comp[rows == code] = k
        self.comp = comp


def _f(x):
    return np.abs(np.sin(np.pi * x / 2.0))


def _df(x):
    return (np.pi / 2.0) * np.cos(np.pi * x / 2.0) * np.sign(np.sin(np.pi * x / 2.0))


def _loss_forward(gamma, e, terms):
    """Per-sample loss ``(B,)`` plus what the backward pass needs."""
    p1, _ = _anticommute_probs(gamma)                          # (B, n, 3)
    K, n = terms.rows.shape
    sel = np.take_along_axis(p1[:, None, :, :], terms.comp[None, :, :, None], axis=-1)[..., 0]  # (B, K, n)
    flip = TRACE[e[:, None, :], terms.rows[None, :, :]].astype(bool)   # <e_i, S_perp_ji>
    p = np.where(flip, 1.0 - sel, sel) * terms.nz
    x = p.sum(axis=2)
    return _f(x).sum(axis=1), (p1, flip, x)


def degeneracy_loss_batch(gammas, errors, s_perp):
    gammas = np.asarray(gammas, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.uint8)
    if gammas.shape[:-1] != errors.shape or errors.shape[-1] != s_perp.n:
        raise ValueError("gammas, errors and the normalizer disagree in shape")
    return _loss_forward(gammas, errors, _LossTerms(s_perp))[0]


def degeneracy_loss(gammas, e, s_perp):
    """Sum over normalizer rows of ``|sin(pi x / 2)|`` of the soft count of
    anticommutations between ``e + e_hat`` and that row."""
    return float(degeneracy_loss_batch(np.asarray(gammas)[None], np.asarray(e)[None], s_perp)[0])


def multi_loss(per_iteration_gammas, e, s_perp, mode="all"):
    """Average loss over decoder iterations.

    ``mode="best"`` averages only up to the iteration with the lowest loss.
    """
    if len(per_iteration_gammas) == 0:
        raise ValueError("empty Gamma history")
    losses = np.array([degeneracy_loss(g, e, s_perp) for g in per_iteration_gammas])
    if mode == "best":
        losses = losses[: int(np.argmin(losses)) + 1]
    return float(losses.mean())


def _loss_backward(gamma, coef, cache, terms):
    """d(coef * loss)/d(gamma) for one iteration."""
    p1, flip, x = cache
    g_x = coef[:, None] * _df(x)                                # (B, K)
    g_sel = np.where(flip, -1.0, 1.0) * terms.nz * g_x[:, :, None]  # (B, K, n)
    g_p1 = np.zeros_like(p1)
    for k in range(3):
        g_p1[..., k] = (g_sel * (terms.comp == k)).sum(axis=1)
    g_q = -g_p1 * p1 * (1.0 - p1)
    return sum(_quantize_grad(gamma, k, g_q[..., k]) for k in range(3))


def _quantize_grad(g, k, upstream):
    """Gradient of ``upstream * Q_k(g)`` with respect to the triple ``g``."""
    a, b = _OTHER[k]
    out = np.zeros(g.shape)
    out[..., k] = -expit(-g[..., k]) * upstream
    out[..., a] = expit(g[..., b] - g[..., a]) * upstream
    out[..., b] = expit(g[..., a] - g[..., b]) * upstream
    return out


def _quantize_grad_edges(graph, g, upstream):
    out = np.zeros(g.shape)
    idx = np.arange(graph.n_edges)
    a, b = graph.other[:, 0], graph.other[:, 1]
    ga, gb, go = g[:, idx, a], g[:, idx, b], g[:, idx, graph.own]
    out[:, idx, graph.own] = -expit(-go) * upstream
    out[:, idx, a] = expit(gb - ga) * upstream
    out[:, idx, b] = expit(ga - gb) * upstream
    return out


# -- unrolled forward / backward ------------------------------------------------------

@dataclass
class DecodeTrace:
    """Everything the reverse pass needs from a fixed-length forward pass."""

    z: np.ndarray
    errors: np.ndarray
    weights: NbpWeights
    priors: np.ndarray
    cn: list
    vn: list
    gammas: list
    loss_cache: list
    losses: np.ndarray  # (L, B)
    coef: np.ndarray    # (L, B) weight of each iteration's loss in the multi-loss

    @property
    def per_sample_loss(self):
        return (self.coef * self.losses).sum(axis=0)


def forward(graph, z, errors, weights, s_perp, epsilon0=0.1, mode="all", terms=None):
    """Unrolled decode without early stopping, recording per-iteration losses."""
    terms = terms or _LossTerms(s_perp)
    z = np.atleast_2d(np.asarray(z, dtype=np.uint8))
    errors = np.atleast_2d(np.asarray(errors, dtype=np.uint8))
    L = weights.iterations
    priors = init_priors(epsilon0)
    lam = initial_messages(graph, priors, z.shape[0])
    cn, vn, gammas, lc, losses = [], [], [], [], []
    for it in range(L):
        cc, vc = {}, {}
        delta = cn_update(graph, lam, z, weights.w_c[it], cache=cc)
        gamma = hard_decision_llrs(graph, delta, priors, weights.w_v[it], cache=vc)
        loss, cache = _loss_forward(gamma, errors, terms)
        if it < L - 1:
            lam = vn_update(graph, delta, priors, weights.w_v[it], cache=vc)
        cn.append(cc)
        vn.append(vc)
        gammas.append(gamma)
        lc.append(cache)
        losses.append(loss)
    losses = np.array(losses)
    if mode == "all":
        coef = np.full(losses.shape, 1.0 / L)
    elif mode == "best":
        stop = np.argmin(losses, axis=0)
        coef = (np.arange(L)[:, None] <= stop[None, :]) / (stop[None, :] + 1.0)
    else:
        raise ValueError(f"unknown multi-loss mode {mode!r}")
    return DecodeTrace(z, errors, weights, priors, cn, vn, gammas, lc, losses, coef)


def _per_var_sum(graph, x):
    out = np.zeros((x.shape[0], graph.n) + x.shape[2:])
    if graph.n_edges:
        out[:, graph.active_vars] = np.add.reduceat(x[:, graph.var_perm], graph.var_starts, axis=1)
    return out


def _per_check_sum(graph, x):
    out = np.zeros(graph.m)
    np.add.at(out, graph.edge_check, x)
    return out


def _exclusive_products_grad(graph, t, g_prod):
    """Backprop of ``prod_e = prod_{k != e} t_k`` within each check."""
    B = t.shape[0]
    E = graph.n_edges
    T = np.concatenate([t, np.ones((B, 1))], axis=1)[:, graph.check_slots]
    G = np.concatenate([g_prod, np.zeros((B, 1))], axis=1)[:, graph.check_slots]
    out = np.zeros_like(T)
    ones = np.ones((B, graph.m, 1))
    for a in range(graph.dc):
        u = T.copy()
        u[:, :, a] = 1.0
        pre = np.cumprod(np.concatenate([ones, u[:, :, :-1]], axis=2), axis=2)
        suf = np.cumprod(np.concatenate([ones, u[:, :, :0:-1]], axis=2), axis=2)[:, :, ::-1]
        contrib = G[:, :, a:a + 1] * pre * suf
        contrib[:, :, a] = 0.0
        out += contrib
    return out.reshape(B, -1)[:, graph.edge_slot][:, :E]


@dataclass
class GradientSet:
    d_wc: np.ndarray
    d_wv: np.ndarray


def backward(graph, trace, s_perp, terms=None):
    """Exact gradient of the batch-mean multi-loss with respect to all weights."""
    if trace is None or not trace.cn:
        raise ValueError("backward needs a recorded forward trace")
    terms = terms or _LossTerms(s_perp)
    w = trace.weights
    L = w.iterations
    B = trace.z.shape[0]
    priors = trace.priors
    d_wc = np.zeros_like(w.w_c)
    d_wv = np.zeros_like(w.w_v)
    g_lam = None
    for it in reversed(range(L)):
        cc, vc = trace.cn[it], trace.vn[it]
        coef = trace.coef[it] / B
        g_gamma = _loss_backward(trace.gammas[it], coef, trace.loss_cache[it], terms)  # (B, n, 3)
        g_tot = g_gamma
        d_wv[it] += (g_gamma @ priors).sum(axis=0)
        g_delta = np.zeros((B, graph.n_edges))
        if g_lam is not None:
            q = vc["q_raw"]
            g_q = g_lam * ((q > -CLIP_LLR) & (q < CLIP_LLR))
            g_g = _quantize_grad_edges(graph, vc["g"], g_q)            # (B, E, 3)
            per_var = _per_var_sum(graph, g_g)
            d_wv[it] += (per_var @ priors).sum(axis=0)
            g_tot = g_tot + per_var
            g_delta -= (g_g * graph.mask).sum(axis=2)
        g_delta += (g_tot[:, graph.edge_var] * graph.mask).sum(axis=2)
        raw = cc["delta_raw"]
        g_raw = g_delta * ((raw > -CLIP_LLR) & (raw < CLIP_LLR))
        d_wc[it] += _per_check_sum(graph, (g_raw * cc["sign"] * 2.0 * cc["a"]).sum(axis=0))
        g_a = g_raw * cc["sign"] * 2.0 * w.w_c[it][graph.edge_check]
        prod = cc["prod"]
        inside = (prod > -ATANH_CLIP) & (prod < ATANH_CLIP)
        g_prod = np.where(inside, g_a / (1.0 - np.where(inside, prod, 0.0) ** 2), 0.0)
        g_t = _exclusive_products_grad(graph, cc["t"], g_prod)
        g_lam = g_t * (1.0 - cc["t"] ** 2) / 2.0
    return GradientSet(d_wc, d_wv)


def loss_and_grad(graph, z, errors, weights, s_perp, epsilon0=0.1, mode="all"):
    """Batch-mean multi-loss and its gradient."""
    terms = _LossTerms(s_perp)
    trace = forward(graph, z, errors, weights, s_perp, epsilon0, mode, terms)
    return float(trace.per_sample_loss.mean()), backward(graph, trace, s_perp, terms)


# -- Adam ------------------------------------------------------------------------

@dataclass
class AdamState:
    m_c: np.ndarray
    m_v: np.ndarray
    v_c: np.ndarray
    v_v: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, weights):
        z = np.zeros_like
        return cls(z(weights.w_c), z(weights.w_v), z(weights.w_c), z(weights.w_v))


def adam_step(weights, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update; returns new weights and the advanced state."""
    t = state.step + 1
    out = []
    moments = []
    for w, g, m, v in ((weights.w_c, grads.d_wc, state.m_c, state.v_c),
                       (weights.w_v, grads.d_wv, state.m_v, state.v_v)):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        out.append(w - lr * m_hat / (np.sqrt(v_hat) + eps))
        moments.append((m, v))
    (mc, vcs), (mv, vv) = moments
    return NbpWeights(out[0], out[1]), AdamState(mc, mv, vcs, vv, t)


# -- training loop ---------------------------------------------------------------

@dataclass
class TrainingConfig:
    iterations: int = 3
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 100
    phase1_batches: int = 1500
    phase1_weights: tuple = (2, 3)
    phase2_batches: int = 600
    phase2_weights: tuple = (3, 4, 5, 6, 7, 8, 9)
    epsilon0: float = 0.1
    loss_mode: str = "all"
    rng_seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.iterations < 1:
            raise ValueError("learning rate, batch size and iterations must be positive")
        self.phase1_weights = tuple(self.phase1_weights)
        self.phase2_weights = tuple(self.phase2_weights)


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    def append(self, batch, phase, loss):
        self.rows.append({"batch": batch, "phase": phase, "mean_loss": loss})

    @property
    def losses(self):
        return np.array([r["mean_loss"] for r in self.rows])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["batch", "phase", "mean_loss"])
            w.writeheader()
            for r in self.rows:
                w.writerow({**r, "mean_loss": repr(r["mean_loss"])})


def training_batch(n, error_weights, size, seed, batch_index):
    """Fixed-weight errors, the weight drawn uniformly per sample."""
    rng = trial_rng(seed, batch_index, stream=2)
    ws = rng.choice(np.asarray(error_weights), size=size)
    return np.array([sample_fixed_weight(n, int(w), rng) for w in ws], dtype=np.uint8).reshape(size, n)


def train(graph, s_perp, cfg=TrainingConfig(), weights=None, checkpoint_dir=None):
    """Two-phase NBP training on the decoding graph (usually the overcomplete one).

    Phase 1 uses low-weight errors, phase 2 higher weights; Adam moments
    carry over between phases. Raises :class:`TrainingDivergedError` when the
    loss stops being finite.
    """
    weights = weights.copy() if weights is not None else NbpWeights.ones(cfg.iterations, graph.m, graph.n)
    state = AdamState.zeros_like(weights)
    terms = _LossTerms(s_perp)
    history = TrainingLog()
    schedule = [(1, cfg.phase1_batches, cfg.phase1_weights), (2, cfg.phase2_batches, cfg.phase2_weights)]
    counter = 0
    for phase, batches, ws in schedule:
        kept = tuple(w for w in ws if 0 <= w <= graph.n)
        if batches and not kept:
            raise ValueError(f"no phase-{phase} error weight fits a length-{graph.n} code")
        if kept != ws:
            log.warning("phase %d: dropping error weights above n=%d", phase, graph.n)
        ws = kept
        for _ in range(batches):
            errors = training_batch(graph.n, ws, cfg.batch_size, cfg.rng_seed, counter)
            z = compute_syndrome(graph.s, errors)
            trace = forward(graph, z, errors, weights, s_perp, cfg.epsilon0, cfg.loss_mode, terms)
            loss = float(trace.per_sample_loss.mean())
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss} at batch {counter} (phase {phase})")
            grads = backward(graph, trace, s_perp, terms)
            if not (np.isfinite(grads.d_wc).all() and np.isfinite(grads.d_wv).all()):
                raise TrainingDivergedError(f"non-finite gradient at batch {counter} (phase {phase})")
            weights, state = adam_step(weights, grads, state, cfg.learning_rate,
                                       cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
            history.append(counter, phase, loss)
            counter += 1
            if counter % 50 == 0:
                log.info("batch %d phase %d loss %.5f", counter, phase, loss)
            if checkpoint_dir and cfg.checkpoint_every and counter % cfg.checkpoint_every == 0:
                from .decoder import save_weights
                save_weights(weights, Path(checkpoint_dir) / f"weights_{counter:05d}.json", graph)
        if phase == 1 and batches:
            _log_degree_trend(graph, weights)
    return weights, history


def _log_degree_trend(graph, weights):
    deg = graph.check_degree
    if deg.min() == deg.max():
        return
    mean_w = weights.w_c.mean(axis=0)
    low = mean_w[deg == deg.min()].mean()
    high = mean_w[deg == deg.max()].mean()
    log.info("after phase 1: mean w_c on degree-%d checks %.4f, on degree-%d checks %.4f",
             deg.min(), low, deg.max(), high)


def config_to_dict(cfg):
    return asdict(cfg)


def config_from_dict(d):
    return TrainingConfig(**d)


def save_config(cfg, path):
    Path(path).write_text(json.dumps(asdict(cfg), indent=2))
