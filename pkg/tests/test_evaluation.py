import math

import numpy as np
import pytest

from qbp4.channel import DepolarizingConfig, depolarizing_batch
from qbp4.evaluation import (FLAGGED, SUCCESS, UNFLAGGED, Decoding, FerRecord, SimulationJob, read_results,
                             run_fer_sweep, run_point, run_trial, run_weight_sweep, write_results)
from qbp4.gf4 import pauli_from_string


def wilson(k, n, zq=1.959963984540054):
    p = k / n
    centre = (p + zq * zq / (2 * n)) / (1 + zq * zq / n)
    half = zq / (1 + zq * zq / n) * math.sqrt(p * (1 - p) / n + zq * zq / (4 * n * n))
    return centre - half, centre + half


def test_toy_classification(bch, bch_oc):
    e = pauli_from_string("IIIIIIY")
    assert run_trial(Decoding(bch, max_iter=1), error=e) == "unflagged"
    assert run_trial(Decoding(bch, bch_oc, max_iter=1), error=e) == "success"
    assert run_trial(Decoding(bch), error=np.zeros(7, np.uint8)) == "success"


def test_classify_codes(bch):
    d = Decoding(bch, max_iter=1)
    errors = np.array([pauli_from_string(s) for s in ["IIIIIII", "IIIIIIY"]])
    assert d.classify(errors).tolist() == [SUCCESS, UNFLAGGED]
    # one iteration on a weight-3 error that BP cannot fix
    out = Decoding(bch, max_iter=1).classify(depolarizing_batch(7, DepolarizingConfig(0.5, 1), range(300)))
    assert FLAGGED in out.tolist()


@pytest.mark.parametrize("k,n", [(0, 10), (3, 10), (300, 1912), (10, 10)])
def test_wilson_interval(k, n):
    rec = FerRecord.from_counts(0.1, n, k, 0)
    lo, hi = wilson(k, n)
    assert rec.fer == k / n
    assert rec.ci_lo == pytest.approx(max(lo, 0), abs=1e-12) and rec.ci_hi == pytest.approx(min(hi, 1), abs=1e-12)


def test_exact_cut_matches_serial_trials(bch):
    d = Decoding(bch)
    job = SimulationJob(d, [0.1], target_errors=25, seed=3, block_size=64)
    rec = run_point(job, 0.1)
    outcomes = d.classify(depolarizing_batch(7, DepolarizingConfig(0.1, 3), range(rec.trials)))
    assert rec.flagged + rec.unflagged == 25 == (outcomes != SUCCESS).sum()
    assert outcomes[-1] != SUCCESS
    assert rec.flagged == (outcomes == FLAGGED).sum()
    assert not rec.low_confidence


@pytest.mark.parametrize("workers", [1, 4, 16])
def test_worker_count_does_not_change_results(bch, workers):
    job = SimulationJob(Decoding(bch), [0.05, 0.1], target_errors=20, seed=11, workers=workers, block_size=32)
    recs = run_fer_sweep(job)
    ref = run_fer_sweep(SimulationJob(Decoding(bch), [0.05, 0.1], target_errors=20, seed=11, block_size=32))
    assert [(r.trials, r.flagged, r.unflagged) for r in recs] == [(r.trials, r.flagged, r.unflagged) for r in ref]


def test_max_trials_cap(bch):
    rec = run_point(SimulationJob(Decoding(bch), [0.001], target_errors=300, max_trials=100), 0.001)
    assert rec.trials == 100 and rec.low_confidence


def test_weight_sweep(bch, bch_oc):
    recs = run_weight_sweep(SimulationJob(Decoding(bch, bch_oc), [0, 1], kind="weight", target_errors=5,
                                          max_trials=500))
    assert recs[0].fer == 0.0 and recs[0].trials == 500
    # on the overcomplete matrix every single-qubit error is corrected
    assert recs[1].fer == 0.0
    # on the original matrix some single-qubit Y errors are not
    assert run_weight_sweep(SimulationJob(Decoding(bch), [1], kind="weight", target_errors=5))[0].fer > 0
    with pytest.raises(ValueError):
        run_weight_sweep(SimulationJob(Decoding(bch), [8], kind="weight"))
    with pytest.raises(ValueError):
        run_fer_sweep(SimulationJob(Decoding(bch), [1], kind="weight"))


def test_job_validation(bch):
    with pytest.raises(ValueError):
        SimulationJob(Decoding(bch), [])
    with pytest.raises(ValueError):
        SimulationJob(Decoding(bch), [0.1], target_errors=0)


@pytest.mark.parametrize("suffix", [".csv", ".json"])
def test_results_roundtrip(tmp_path, suffix):
    recs = [FerRecord.from_counts(0.1, 1000, 30, 12), FerRecord.from_counts(0.02, 5000, 3, 1)]
    path = write_results(recs, tmp_path / ("r" + suffix))
    again = read_results(path)
    for a, b in zip(recs, again):
        assert (a.x, a.trials, a.flagged, a.unflagged, a.fer, a.ci_lo, a.ci_hi) == \
            (b.x, b.trials, b.flagged, b.unflagged, b.fer, b.ci_lo, b.ci_hi)
    if suffix == ".csv":
        assert path.read_text().splitlines()[0] == "x,trials,flagged,unflagged,fer,ci_lo,ci_hi"


def test_results_bad_format(tmp_path):
    with pytest.raises(ValueError):
        write_results([], tmp_path / "r.txt", fmt="xml")
