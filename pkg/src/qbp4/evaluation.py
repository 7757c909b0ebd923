"""Monte Carlo frame-error-rate harness.

Trials are numbered and each draws its error from its own seeded generator.
They are processed in fixed blocks of consecutive indices, so the outcome of
every trial, and therefore every :class:`FerRecord`, is the same for any
number of worker threads. The stop rule counts failures in trial-index
order and cuts the point exactly at the failure that reaches the target.
"""
import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .channel import DepolarizingConfig, depolarizing_batch, fixed_weight_batch
from .codes import check_logical_equivalence, compute_normalizer, compute_syndrome, to_quaternary
from .decoder import DecoderGraph, decode_batch
from .overcomplete import map_syndrome

log = logging.getLogger(__name__)

SUCCESS, FLAGGED, UNFLAGGED = 0, 1, 2
OUTCOME_NAMES = {SUCCESS: "success", FLAGGED: "flagged", UNFLAGGED: "unflagged"}


class Decoding:
    """A code prepared for simulation: the measured checks, the matrix the
    decoder runs on (original or overcomplete) and the decoder settings."""

    def __init__(self, code, overcomplete=None, max_iter=32, epsilon0=0.1, weights=None):
        self.code = code
        self.s = to_quaternary(code)
        self.s_perp = compute_normalizer(self.s)
        self.overcomplete = overcomplete
        self.graph = DecoderGraph(overcomplete.s_oc if overcomplete is not None else self.s)
        self.max_iter = max_iter
        self.epsilon0 = epsilon0
        self.weights = weights

    @property
    def n(self):
        return self.code.n

    def decoder_syndrome(self, errors):
        z = compute_syndrome(self.s, errors)
        return z if self.overcomplete is None else map_syndrome(self.overcomplete, z)

    def classify(self, errors):
        """Decode a batch of errors and return one outcome code per row."""
        errors = np.atleast_2d(errors)
        res = decode_batch(self.graph, self.decoder_syndrome(errors), self.epsilon0,
                           self.max_iter, self.weights)
        equivalent = check_logical_equivalence(errors, res.e_hat, self.s_perp)
        out = np.full(len(errors), SUCCESS, dtype=np.int8)
        out[~res.converged] = FLAGGED
        out[res.converged & ~equivalent] = UNFLAGGED
        return out


def _errors(decoding, kind, x, seed, indices):
    if kind == "epsilon":
        return depolarizing_batch(decoding.n, DepolarizingConfig(float(x), seed), indices)
    if kind == "weight":
        return fixed_weight_batch(decoding.n, int(x), seed, indices)
    raise ValueError(f"unknown sweep kind {kind!r}")


def run_trial(decoding, x=None, trial_index=0, kind="epsilon", seed=0, error=None):
    """Outcome name of one trial; ``error`` injects a fixed error instead of sampling."""
    e = np.asarray(error, dtype=np.uint8)[None] if error is not None else _errors(decoding, kind, x, seed, [trial_index])
    return OUTCOME_NAMES[int(decoding.classify(e)[0])]


@dataclass
class FerRecord:
    x: float
    trials: int
    flagged: int
    unflagged: int
    fer: float
    ci_lo: float
    ci_hi: float
    kind: str = "epsilon"
    low_confidence: bool = False
    wall_time: float = 0.0

    @classmethod
    def from_counts(cls, x, trials, flagged, unflagged, **kw):
        failures = flagged + unflagged
        if trials:
            ci = binomtest(failures, trials).proportion_ci(0.95, method="wilson")
            lo, hi, fer = float(ci.low), float(ci.high), failures / trials
        else:
            lo, hi, fer = 0.0, 1.0, 0.0
        return cls(x, trials, flagged, unflagged, fer, lo, hi, **kw)


@dataclass
class SimulationJob:
    decoding: Decoding
    points: list
    kind: str = "epsilon"
    target_errors: int = 300
    max_trials: int = 10_000_000
    seed: int = 0
    workers: int = 1
    block_size: int = 512

    def __post_init__(self):
        if not self.points:
            raise ValueError("simulation needs at least one sweep point")
        if self.target_errors < 1:
            raise ValueError("target_errors must be at least 1")


def _run_block(job, x, start):
    stop = min(start + job.block_size, job.max_trials)
    errors = _errors(job.decoding, job.kind, x, job.seed, range(start, stop))
    return job.decoding.classify(errors)


def run_point(job, x, pool=None):
    t0 = time.perf_counter()
    flagged = unflagged = trials = 0
    starts = iter(range(0, job.max_trials, job.block_size))
    done = False
    while not done:
        batch = [s for _, s in zip(range(max(1, job.workers)), starts)]
        if not batch:
            break
        if pool is not None and len(batch) > 1:
            results = list(pool.map(lambda s: _run_block(job, x, s), batch))
        else:
            results = [_run_block(job, x, s) for s in batch]
        for outcomes in results:
            fail = outcomes != SUCCESS
            need = job.target_errors - flagged - unflagged
            if fail.sum() >= need:
                cut = int(np.flatnonzero(fail)[need - 1]) + 1
                outcomes = outcomes[:cut]
                done = True
            trials += len(outcomes)
            flagged += int((outcomes == FLAGGED).sum())
            unflagged += int((outcomes == UNFLAGGED).sum())
            if done:
                break
    rec = FerRecord.from_counts(x, trials, flagged, unflagged, kind=job.kind,
                                low_confidence=not done, wall_time=time.perf_counter() - t0)
    log.info("%s=%g: %d trials, %d flagged, %d unflagged, FER %.4g", job.kind, x, trials,
             flagged, unflagged, rec.fer)
    return rec


def _sweep(job):
    if job.workers > 1:
        with ThreadPoolExecutor(job.workers) as pool:
            return [run_point(job, x, pool) for x in job.points]
    return [run_point(job, x) for x in job.points]


def run_fer_sweep(job):
    """FER versus depolarizing probability for every point of ``job``."""
    if job.kind != "epsilon":
        raise ValueError("run_fer_sweep expects an epsilon sweep")
    return _sweep(job)


def run_weight_sweep(job):
    """FER versus fixed error weight."""
    if job.kind != "weight":
        raise ValueError("run_weight_sweep expects a weight sweep")
    bad = [w for w in job.points if not 0 <= int(w) <= job.decoding.n]
    if bad:
        raise ValueError(f"error weights {bad} outside [0, {job.decoding.n}]")
    return _sweep(job)


# -- serialization -------------------------------------------------------------------

CSV_COLUMNS = ["x", "trials", "flagged", "unflagged", "fer", "ci_lo", "ci_hi"]


def write_results(records, path, fmt=None, include_timing=False):
    """Write records as CSV (plot-ready columns) or JSON; format follows the suffix."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(CSV_COLUMNS)
                for r in records:
                    w.writerow([repr(r.x), r.trials, r.flagged, r.unflagged, repr(r.fer),
                                repr(r.ci_lo), repr(r.ci_hi)])
        elif fmt == "json":
            rows = [asdict(r) for r in records]
            if not include_timing:
                for r in rows:
                    r.pop("wall_time")
            path.write_text(json.dumps(rows, indent=1))
        else:
            raise ValueError(f"unknown results format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_results(path):
    path = Path(path)
    if path.suffix == ".json":
        names = {f.name for f in fields(FerRecord)}
        return [FerRecord(**{k: v for k, v in r.items() if k in names}) for r in json.loads(path.read_text())]
    with open(path, newline="") as fh:
        return [FerRecord(float(r["x"]), int(r["trials"]), int(r["flagged"]), int(r["unflagged"]),
                          float(r["fer"]), float(r["ci_lo"]), float(r["ci_hi"]))
                for r in csv.DictReader(fh)]
