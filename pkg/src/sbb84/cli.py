"""Command-line harness: ``sbb84 {run,reconcile,verify,analyze}``.

Exit codes: 0 on completion (aborted sessions are data, not failures),
2 for invalid input or configuration, 3 for I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import analysis
from .errors import ProtocolAbort
from .gf2 import BitVec, concat
from .reconcile import DEFAULT_MAX_ROUNDS, crude_cascade, partition_subsets
from .session import ProtocolConfig, SessionResult, run_session
from .transcript import SeedStreams
from .verify import gen_parity_strings, verify_subset

SCHEMA_VERSION = 1

# flag name -> flat config key
OVERRIDES = {
    "eps_b": "eps_b",
    "eps_p": "eps_p",
    "eps_bp": "eps_bp",
    "n": "n",
    "ns": "n_s",
    "m": "m",
    "eta": "eta",
    "delta": "delta",
    "threshold_bit": "abort_threshold_bit",
    "threshold_phase": "abort_threshold_phase",
    "target_residual": "target_residual",
    "max_rounds": "max_rounds",
    "key_margin": "key_margin",
    "eve_intercept": "eve_intercept",
}


class UsageError(Exception):
    pass


# bit files: one "hex len" pair per line


def read_bits(path: str | Path) -> BitVec:
    text = Path(path).read_text()
    parts = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise UsageError(f"{path}:{lineno}: expected '<hex> <bit length>'")
        try:
            parts.append(BitVec.from_hex(fields[0], int(fields[1])))
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from exc
    bits = concat(parts)
    if bits.nbits == 0:
        raise UsageError(f"{path}: no bits")
    return bits


def write_bits(path: str | Path, chunks: list[BitVec]) -> None:
    Path(path).write_text("".join(f"{c.to_hex()} {c.nbits}\n" for c in chunks))


def _dump(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# run


def trial_row(index: int, seed: int, result: SessionResult) -> dict:
    st = result.stats
    est = st.estimate
    return {
        "trial": index,
        "seed": seed,
        "status": result.status,
        "stage": result.stage,
        "reason": result.reason,
        "n_qubits": st.n_qubits,
        "n_sifted": st.n_sifted,
        "eps_b_hat": est.eps_b_hat if est else None,
        "eps_p_hat": est.eps_p_hat if est else None,
        "rounds": len(st.rounds),
        "q": st.q,
        "g": st.g,
        "k": st.k,
        "key_len": st.key_len,
        "keys_match": result.keys_match,
        "leaked_parity_bits": st.leaked_parity_bits,
        "eps_1": st.eps_1,
        "bound": st.bound.value if st.bound else None,
    }


def aggregate(rows: list[dict], m: int) -> tuple[dict, dict]:
    """Aggregate and comparison blocks, computed only from the per-trial rows."""
    trials = len(rows)
    successes = [r for r in rows if r["status"] == "success"]
    correct = sum(1 for r in successes if r["keys_match"])
    mismatches = len(successes) - correct
    qubits = sum(r["n_qubits"] for r in rows)
    agg = {
        "trials": trials,
        "successes": len(successes),
        "correct_keys": correct,
        "key_mismatches": mismatches,
        "success_rate": correct / trials if trials else 0.0,
        "abort_reasons": dict(sorted(Counter(r["reason"] for r in rows if r["status"] != "success").items())),
        "mean_key_len": sum(r["key_len"] for r in rows) / trials if trials else 0.0,
        "key_rate": sum(r["key_len"] for r in rows) / qubits if qubits else 0.0,
        "mean_rounds": sum(r["rounds"] for r in successes) / len(successes) if successes else 0.0,
        "mean_g": sum(r["g"] for r in successes) / len(successes) if successes else 0.0,
    }
    bounds = [r["bound"] for r in rows if r["bound"] is not None]
    mean_bound = sum(bounds) / len(bounds) if bounds else None
    max_g = max((r["g"] for r in successes), default=0)
    cmp = {
        "mean_success_lower_bound": mean_bound,
        "min_success_lower_bound": min(bounds) if bounds else None,
        "success_rate_meets_bound": None if mean_bound is None else agg["success_rate"] >= mean_bound,
        "mismatch_bound": max_g * 2.0 ** (-m),
        "mismatch_rate": mismatches / len(successes) if successes else 0.0,
    }
    return agg, cmp


def run_trials(config: ProtocolConfig, trials: int, seed: int, workers: int = 1) -> list[SessionResult]:
    configs = [replace(config, seed=(seed + i) % 2**64) for i in range(trials)]
    if workers <= 1:
        return [run_session(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_session, configs))


def build_report(config: ProtocolConfig, trials: int, seed: int, workers: int = 1,
                 transcripts: str | None = None) -> dict:
    t0 = time.perf_counter()
    results = run_trials(config, trials, seed, workers)
    elapsed = time.perf_counter() - t0
    rows = [trial_row(i, (seed + i) % 2**64, res) for i, res in enumerate(results)]
    if transcripts:
        out = Path(transcripts)
        out.mkdir(parents=True, exist_ok=True)
        for row, res in zip(rows, results):
            res.transcript.save(out / f"trial_{row['trial']:05d}.jsonl")
    agg, cmp = aggregate(rows, config.m)
    flat = config.to_flat()
    flat["seed"] = seed
    return {
        "schema_version": SCHEMA_VERSION,
        "config": flat,
        "trials": rows,
        "aggregate": agg,
        "comparison": cmp,
        "timing": {"wall_seconds": elapsed, "per_trial_seconds": elapsed / trials if trials else 0.0,
                   "workers": workers},
    }


def _load_config(args) -> ProtocolConfig:
    flat: dict = {}
    if args.config:
        try:
            flat = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(flat, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
    for flag, key in OVERRIDES.items():
        val = getattr(args, flag, None)
        if val is not None:
            flat[key] = val
    if args.seed is not None:
        flat["seed"] = args.seed
    try:
        return ProtocolConfig.from_flat(flat)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc


def cmd_run(args) -> int:
    config = _load_config(args)
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    report = build_report(config, args.trials, config.seed, args.workers, args.transcripts)
    _dump(report, args.out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(report["trials"][0]) if report["trials"] else ["trial"])
            w.writeheader()
            w.writerows(report["trials"])
    return 0


# reconcile / verify


def _verify_all(a: BitVec, b: BitVec, n_s: int, m: int, rng) -> tuple[list[BitVec], list[BitVec], list[dict]]:
    kept_a, kept_b, outcomes = [], [], []
    for i, (s_a, s_b) in enumerate(partition_subsets(a, b, n_s)):
        out = verify_subset(s_a, s_b, gen_parity_strings(n_s, m, rng, subset=i), subset=i)
        outcomes.append({"subset": i, "accepted": out.accepted, "failed_round": out.failed_round,
                         "differences": (s_a ^ s_b).weight()})
        if out.accepted:
            kept_a.append(out.alice)
            kept_b.append(out.bob)
    return kept_a, kept_b, outcomes


def _pair_inputs(args) -> tuple[BitVec, BitVec]:
    a, b = read_bits(args.alice), read_bits(args.bob)
    if a.nbits != b.nbits:
        raise UsageError(f"length mismatch: {a.nbits} vs {b.nbits} bits")
    return a, b


def _finish(args, kept_a, kept_b, stats) -> int:
    if args.out_alice:
        write_bits(args.out_alice, kept_a)
    if args.out_bob:
        write_bits(args.out_bob, kept_b)
    stats["accepted_bits"] = sum(k.nbits for k in kept_a)
    stats["residual_disagreements"] = sum((x ^ y).weight() for x, y in zip(kept_a, kept_b))
    _dump({"schema_version": SCHEMA_VERSION, **stats}, args.stats)
    return 0


def cmd_reconcile(args) -> int:
    a, b = _pair_inputs(args)
    streams = SeedStreams(args.seed)
    stats: dict = {"input_bits": a.nbits, "input_disagreements": (a ^ b).weight()}
    kept_a: list[BitVec] = []
    kept_b: list[BitVec] = []
    try:
        ra, rb, rounds = crude_cascade(a, b, args.target, args.max_rounds, streams["pairing"])
        stats["rounds"] = [r.to_json() for r in rounds]
        kept_a, kept_b, stats["subsets"] = _verify_all(ra, rb, args.ns, args.m, streams["parity-strings"])
        stats["status"] = "success"
    except ProtocolAbort as exc:
        stats.update(status="abort", stage=exc.stage, reason=exc.reason, message=str(exc))
        if "rounds" in exc.details:
            stats["rounds"] = [r.to_json() for r in exc.details["rounds"]]
    return _finish(args, kept_a, kept_b, stats)


def cmd_verify(args) -> int:
    a, b = _pair_inputs(args)
    stats: dict = {"input_bits": a.nbits, "input_disagreements": (a ^ b).weight()}
    kept_a: list[BitVec] = []
    kept_b: list[BitVec] = []
    try:
        kept_a, kept_b, stats["subsets"] = _verify_all(a, b, args.ns, args.m, SeedStreams(args.seed)["parity-strings"])
        stats["status"] = "success"
    except ProtocolAbort as exc:
        stats.update(status="abort", stage=exc.stage, reason=exc.reason, message=str(exc))
    return _finish(args, kept_a, kept_b, stats)


# analyze


def cmd_analyze(args) -> int:
    try:
        pu = analysis.phase_update(args.eps_b, args.eps_p, args.eps_bp)
        conf = analysis.epsilon1_confidence(args.eta, args.n, args.eps_p)
        disc = analysis.subset_discard_prob(args.ns, args.eps_bc)
        succ = analysis.success_lower_bound(args.g, args.m, args.eta, args.n, args.eps_p)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _dump({
        "schema_version": SCHEMA_VERSION,
        "params": {k: getattr(args, k) for k in ("eps_b", "eps_p", "eps_bp", "eta", "n", "ns", "eps_bc", "g", "m")},
        "phase_update": {"exact": pu.exact, "upper_bound": pu.upper_bound},
        "eps_1": pu.upper_bound + args.eta,
        "epsilon1_confidence": conf,
        "subset_discard_prob": {"single_error": disc.single_error, "all_errors": disc.all_errors},
        "key_correctness_bound": analysis.key_correctness_bound(args.g, args.m),
        "success_lower_bound": {"value": succ.value, "vacuous": succ.vacuous},
    }, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbb84", description="Simplified BB84 simulator and reconciliation tools")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a batch of protocol sessions")
    run.add_argument("--config", help="JSON file with flat ProtocolConfig keys")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--seed", type=int, help="seed of the first trial; trial i uses seed + i")
    run.add_argument("--out", help="report path (default: stdout)")
    run.add_argument("--csv", help="also write per-trial rows as CSV")
    run.add_argument("--workers", type=int, default=1, help="parallel threads; output is identical for any value")
    run.add_argument("--transcripts", help="directory for per-trial JSONL transcripts")
    for flag, key in OVERRIDES.items():
        typ = int if key in ("n", "n_s", "m", "max_rounds", "key_margin") else float
        run.add_argument("--" + flag.replace("_", "-"), dest=flag, type=typ)
    run.set_defaults(func=cmd_run)

    for name, func in (("reconcile", cmd_reconcile), ("verify", cmd_verify)):
        sp = sub.add_parser(name, help=f"{name} a pair of bit files")
        sp.add_argument("alice")
        sp.add_argument("bob")
        sp.add_argument("--ns", type=int, default=100)
        sp.add_argument("--m", type=int, default=20)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-alice")
        sp.add_argument("--out-bob")
        sp.add_argument("--stats", help="stats JSON path (default: stdout)")
        if name == "reconcile":
            sp.add_argument("--target", type=float, default=1e-3)
            sp.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)
        sp.set_defaults(func=func)

    an = sub.add_parser("analyze", help="evaluate the closed-form bounds")
    an.add_argument("--eps-b", type=float, default=0.03)
    an.add_argument("--eps-p", type=float, default=0.03)
    an.add_argument("--eps-bp", type=float, default=0.0)
    an.add_argument("--eta", type=float, default=0.02)
    an.add_argument("--n", type=int, default=2000)
    an.add_argument("--ns", type=int, default=100)
    an.add_argument("--eps-bc", type=float, default=1e-3)
    an.add_argument("--g", type=int, default=10)
    an.add_argument("--m", type=int, default=20)
    an.add_argument("--out")
    an.set_defaults(func=cmd_analyze)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"sbb84 {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"sbb84 {args.command}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
