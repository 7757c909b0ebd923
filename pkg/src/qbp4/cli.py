"""Command-line entry point.

Subcommands: ``code validate``, ``oc gen``, ``decode``, ``train``,
``simulate`` and ``report``. Every file written is accompanied by a
``<file>.manifest.json`` that can be passed back with ``--config`` to
repeat the run.
"""
import argparse
import hashlib
import json
import logging
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .codes import InvalidCodeError, compute_syndrome, load_code, to_quaternary, validate_css
from .decoder import DecoderGraph, decode, load_weights, save_weights
from .evaluation import Decoding, SimulationJob, read_results, run_fer_sweep, run_weight_sweep, write_results
from .gf4 import pauli_from_string
from .overcomplete import (SearchEffort, generate_overcomplete, load_overcomplete, map_syndrome,
                           save_overcomplete)
from .training import TrainingConfig, TrainingDivergedError, train

log = logging.getLogger("qbp4")


def _version():
    try:
        return version("qbp4")
    except PackageNotFoundError:
        return "unknown"


class UsageError(Exception):
    pass


# -- argument parsing -------------------------------------------------------------

def _int_list(text):
    out = []
    for part in text.split(","):
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part.strip():
            out.append(int(part))
    return out


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _budget(text):
    budget = {}
    for part in text.split(","):
        w, c = part.split(":")
        budget[int(w)] = int(c)
    return budget


def _add_decoder_flags(p, iters=None):
    p.add_argument("--code", help="code definition JSON or built-in name (bch713)")
    p.add_argument("--matrix", default="original", help="'original' or an overcomplete matrix file")
    p.add_argument("--weights", help="NBP weights JSON")
    p.add_argument("--iters", type=int, default=iters,
                   help="decoder iterations L (default: the weights file, else 32)")
    p.add_argument("--epsilon0", type=float, default=0.1, help="prior error probability")


def build_parser():
    parser = argparse.ArgumentParser(prog="qbp4", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file (or run manifest) providing flag values")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command")
    commands = {}

    code = sub.add_parser("code", help="code utilities").add_subparsers(dest="action")
    p = code.add_parser("validate", help="check the commutation criterion of a code")
    p.add_argument("--code", help="code definition JSON or built-in name")
    commands["code validate"] = p

    oc = sub.add_parser("oc", help="overcomplete check matrices").add_subparsers(dest="action")
    p = oc.add_parser("gen", help="generate an overcomplete check matrix")
    p.add_argument("--code")
    p.add_argument("--max-weight", type=int, help="largest redundant row weight")
    p.add_argument("--count", type=_budget, help="rows per weight, e.g. 8:48,12:1952 (both sides)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--effort-iters", type=int, default=200, help="information sets to try")
    p.add_argument("--max-combination", type=int, default=3, help="reduced rows combined per set")
    p.add_argument("--all-combinations", action="store_true", help="enumerate every row combination")
    p.add_argument("--out", help="output JSON")
    commands["oc gen"] = p

    p = sub.add_parser("decode", help="decode one syndrome or error")
    _add_decoder_flags(p)
    p.add_argument("--syndrome", help="syndrome as a 0/1 string or 0x-prefixed hex")
    p.add_argument("--error", help="Pauli string such as IIIIIIY; its syndrome is decoded")
    commands["decode"] = p

    p = sub.add_parser("train", help="train NBP weights")
    p.add_argument("--code")
    p.add_argument("--oc-matrix", help="overcomplete matrix file (default: original matrix)")
    p.add_argument("--iters", type=int, default=3)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batches-phase1", type=int, default=1500)
    p.add_argument("--batches-phase2", type=int, default=600)
    p.add_argument("--phase1-weights", type=_int_list, default=[2, 3])
    p.add_argument("--phase2-weights", type=_int_list, default=list(range(3, 10)))
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--epsilon0", type=float, default=0.1)
    p.add_argument("--loss-mode", choices=["all", "best"], default="all")
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="weights JSON")
    p.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    commands["train"] = p

    p = sub.add_parser("simulate", help="Monte Carlo FER sweep")
    _add_decoder_flags(p)
    p.add_argument("--epsilons", type=_float_list, help="comma-separated depolarizing probabilities")
    p.add_argument("--error-weights", type=_int_list, help="weights, e.g. 1..10 or 2,3,4")
    p.add_argument("--target-errors", type=int, default=300)
    p.add_argument("--max-trials", type=int, default=10_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="results CSV (or .json)")
    commands["simulate"] = p

    p = sub.add_parser("report", help="turn results into a pgfplots/gnuplot table")
    p.add_argument("--results", help="results CSV or JSON")
    p.add_argument("--axis", choices=["auto", "loglog", "linear"], default="auto")
    p.add_argument("--out", help="output .dat (default: stdout)")
    commands["report"] = p
    for p in commands.values():
        p.add_argument("--config", default=argparse.SUPPRESS,
                       help="JSON file (or run manifest) providing flag values")
    return parser, commands


def parse(argv):
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    name = " ".join(x for x in (args.command, getattr(args, "action", None)) if x)
    if name not in commands:
        parser.print_help(sys.stderr)
        raise UsageError("missing or incomplete subcommand")
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        cfg = cfg.get("config", cfg)
        known = {a.dest for a in commands[name]._actions}
        unknown = set(cfg) - known - {"command", "action", "config", "verbose"}
        if unknown:
            raise UsageError(f"unknown keys in config file: {sorted(unknown)}")
        commands[name].set_defaults(**{k: v for k, v in cfg.items() if k in known})
        args = parser.parse_args(argv)
    return name, args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


# -- manifests ------------------------------------------------------------------------

def _file_hash(path):
    p = Path(path)
    if not p.is_file():
        return None
    return hashlib.sha256(p.read_bytes()).hexdigest()


def write_manifest(out, command, args, inputs):
    config = {k: v for k, v in vars(args).items() if k not in ("command", "action", "config", "verbose")}
    manifest = {
        "subcommand": command,
        "config": config,
        "seed": config.get("seed"),
        "inputs": {str(p): _file_hash(p) for p in inputs if p and p != "original"},
        "tool_version": _version(),
    }
    path = Path(str(out) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return path


# -- subcommands ------------------------------------------------------------------------

def _load_matrix(code, matrix):
    if matrix in (None, "original"):
        return None
    return load_overcomplete(matrix, code)


def cmd_code_validate(args):
    _require(args, "code")
    code = load_code(args.code)
    report = validate_css(code)
    info = {"name": code.name, "n": code.n, "m": code.m, "passed": report.passed,
            "offending_pairs": report.offending}
    if report.passed and hasattr(code, "k"):
        info["k"] = code.k
    print(str(report))
    print(json.dumps(info))
    return 0 if report.passed else 1


def cmd_oc_gen(args):
    _require(args, "code", "out")
    code = load_code(args.code)
    max_weight = args.max_weight if args.max_weight is not None else code.n
    effort = SearchEffort(iterations=args.effort_iters, max_combination=args.max_combination,
                          rng_seed=args.seed, exhaustive=args.all_combinations)
    oc = generate_overcomplete(code, max_weight, budget=args.count, effort=effort, seed=args.seed)
    save_overcomplete(oc, args.out)
    write_manifest(args.out, "oc gen", args, [args.code])
    counts = {int(w): int(c) for w, c in zip(*np.unique(oc.weights(), return_counts=True))}
    print(json.dumps({"m_oc": oc.m_oc, "rows_by_weight": counts, "out": str(args.out)}))
    return 0


def _parse_syndrome(text, length):
    text = text.strip()
    if text.lower().startswith("0x"):
        bits = bin(int(text, 16))[2:].zfill(length)
    else:
        bits = text.replace(" ", "")
    if set(bits) - {"0", "1"} or len(bits) != length:
        raise UsageError(f"syndrome must have {length} binary digits")
    return np.array([int(b) for b in bits], dtype=np.uint8)


def cmd_decode(args):
    _require(args, "code")
    if (args.syndrome is None) == (args.error is None):
        raise UsageError("give exactly one of --syndrome or --error")
    code = load_code(args.code)
    s = to_quaternary(code)
    oc = _load_matrix(code, args.matrix)
    graph = DecoderGraph(oc.s_oc if oc is not None else s)
    if args.error is not None:
        e = pauli_from_string(args.error)
        if len(e) != code.n:
            raise UsageError(f"error must have length {code.n}")
        z = compute_syndrome(s, e)
    else:
        lengths = {s.m} | ({graph.m} if oc is not None else set())
        text = args.syndrome.replace(" ", "")
        n_bits = len(text) if not text.lower().startswith("0x") else s.m
        if n_bits not in lengths:
            raise UsageError(f"syndrome must have {s.m} bits" + (f" (or {graph.m} for z_oc)" if oc else ""))
        z = _parse_syndrome(text, n_bits)
    if oc is not None and len(z) == s.m:
        z = map_syndrome(oc, z)
    weights = load_weights(args.weights, graph) if args.weights else None
    iters = args.iters or (weights.iterations if weights else 32)
    res = decode(graph, z, args.epsilon0, iters, weights)
    print(json.dumps(res.to_dict()))
    return 0


def cmd_train(args):
    _require(args, "code", "out")
    code = load_code(args.code)
    s = to_quaternary(code)
    oc = load_overcomplete(args.oc_matrix, code) if args.oc_matrix else None
    graph = DecoderGraph(oc.s_oc if oc is not None else s)
    from .codes import compute_normalizer
    cfg = TrainingConfig(iterations=args.iters, learning_rate=args.lr, batch_size=args.batch_size,
                         phase1_batches=args.batches_phase1, phase1_weights=args.phase1_weights,
                         phase2_batches=args.batches_phase2, phase2_weights=args.phase2_weights,
                         epsilon0=args.epsilon0, loss_mode=args.loss_mode, rng_seed=args.seed,
                         checkpoint_every=args.checkpoint_every)
    ckpt = Path(str(args.out) + ".checkpoints") if args.checkpoint_every else None
    if ckpt:
        ckpt.mkdir(exist_ok=True)
    weights, history = train(graph, compute_normalizer(s), cfg, checkpoint_dir=ckpt)
    save_weights(weights, args.out, graph)
    log_path = args.log or str(args.out) + ".log.csv"
    history.write_csv(log_path)
    write_manifest(args.out, "train", args, [args.code, args.oc_matrix])
    losses = history.losses
    print(json.dumps({"out": str(args.out), "log": log_path, "batches": len(losses),
                      "first_loss": float(losses[0]) if len(losses) else None,
                      "last_loss": float(losses[-1]) if len(losses) else None}))
    return 0


def cmd_simulate(args):
    _require(args, "code", "out")
    if (args.epsilons is None) == (args.error_weights is None):
        raise UsageError("give exactly one of --epsilons or --error-weights")
    code = load_code(args.code)
    oc = _load_matrix(code, args.matrix)
    decoding = Decoding(code, oc, max_iter=32, epsilon0=args.epsilon0)
    weights = load_weights(args.weights, decoding.graph) if args.weights else None
    decoding.weights = weights
    decoding.max_iter = args.iters or (weights.iterations if weights else 32)
    kind = "epsilon" if args.epsilons is not None else "weight"
    job = SimulationJob(decoding, args.epsilons or args.error_weights, kind=kind,
                        target_errors=args.target_errors, max_trials=args.max_trials,
                        seed=args.seed, workers=args.threads)
    records = run_fer_sweep(job) if kind == "epsilon" else run_weight_sweep(job)
    write_results(records, args.out)
    write_manifest(args.out, "simulate", args, [args.code, args.matrix, args.weights])
    for r in records:
        flag = " (max trials reached)" if r.low_confidence else ""
        print(f"{kind}={r.x:g} trials={r.trials} flagged={r.flagged} unflagged={r.unflagged} "
              f"FER={r.fer:.6g} CI=[{r.ci_lo:.4g}, {r.ci_hi:.4g}]{flag}")
    return 0


def cmd_report(args):
    _require(args, "results")
    records = read_results(args.results)
    axis = args.axis
    if axis == "auto":
        axis = "linear" if records and all(float(r.x).is_integer() and r.x >= 1 for r in records) else "loglog"
    xlabel = "error_weight" if axis == "linear" else "epsilon"
    lines = [f"# axis: {axis} ({'FER vs error weight' if axis == 'linear' else 'log-log FER vs epsilon'})",
             f"{xlabel} fer ci_lo ci_hi trials"]
    for r in sorted(records, key=lambda r: r.x):
        lines.append(f"{r.x:g} {r.fer:.10g} {r.ci_lo:.10g} {r.ci_hi:.10g} {r.trials}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        write_manifest(args.out, "report", args, [args.results])
    else:
        sys.stdout.write(text)
    return 0


HANDLERS = {
    "code validate": cmd_code_validate,
    "oc gen": cmd_oc_gen,
    "decode": cmd_decode,
    "train": cmd_train,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def main(argv=None):
    try:
        name, args = parse(argv)
    except UsageError as exc:
        print(json.dumps({"error": str(exc), "type": "usage"}), file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[name](args)
    except UsageError as exc:
        print(json.dumps({"error": str(exc), "type": "usage"}), file=sys.stderr)
        return 2
    except (InvalidCodeError, ValueError, OSError, KeyError, TrainingDivergedError) as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
