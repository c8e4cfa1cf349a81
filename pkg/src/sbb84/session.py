"""One run of the simplified BB84 protocol, from state preparation to key.

Preparation, transmission, sifting, check-bit selection, error estimation
and the abort test live here; distillation and key extraction call into
``reconcile``, ``verify`` and ``privacy``.
All randomness comes from ``SeedStreams(config.seed)``, one labelled stream
per role, and every public message goes through the transcript.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .analysis import SuccessBound, phase_update, success_lower_bound
from .errors import CheckFailure, EmptyCheckSet, ImbalancedSift, InsufficientSiftedBits, NoSubsetsAccepted, ProtocolAbort
from .gf2 import BitMatrix, BitVec, DimensionError, concat, mat_vec, parity_check_of
from .privacy import KeyLengthRule, alice_announce, bob_recover, build_code, extract_key
from .qsim import Basis, ChannelParams, InterceptResend
from .reconcile import DEFAULT_MAX_ROUNDS, RoundStats, crude_cascade, partition_subsets
from .transcript import SeedStreams, SessionTranscript
from .verify import gen_parity_strings, verify_subset


@dataclass(frozen=True)
class ProtocolConfig:
    n: int = 1000
    delta: float = 1.0
    m: int = 20
    n_s: int = 100
    target_residual: float = 1e-3
    max_rounds: int = DEFAULT_MAX_ROUNDS
    abort_threshold_bit: float = 0.11
    abort_threshold_phase: float = 0.11
    eta: float = 0.02
    key_len_rule: KeyLengthRule = field(default_factory=KeyLengthRule)
    channel: ChannelParams = field(default_factory=ChannelParams)
    eve: InterceptResend | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.n_s < 1:
            raise ValueError("n_s must be >= 1")
        if not 0 < self.m < self.n_s:
            raise ValueError("need 0 < m < n_s")
        if not 0 < self.target_residual < 1:
            raise ValueError("target_residual must be in (0, 1)")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        for name in ("abort_threshold_bit", "abort_threshold_phase", "eta"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must be in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def n_qubits(self) -> int:
        return math.ceil(round((4 + self.delta) * self.n, 9))

    def to_flat(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "m": self.m,
            "n_s": self.n_s,
            "target_residual": self.target_residual,
            "max_rounds": self.max_rounds,
            "abort_threshold_bit": self.abort_threshold_bit,
            "abort_threshold_phase": self.abort_threshold_phase,
            "eta": self.eta,
            "key_margin": self.key_len_rule.margin,
            "key_len_fixed": self.key_len_rule.fixed,
            "eps_b": self.channel.eps_b,
            "eps_p": self.channel.eps_p,
            "eps_bp": self.channel.eps_bp,
            "eve_intercept": self.eve.p_attack if self.eve is not None else 0.0,
            "seed": self.seed,
        }

    @classmethod
    def from_flat(cls, flat: dict) -> ProtocolConfig:
        """Build from the flat key layout used by config files."""
        known = set(cls().to_flat())
        unknown = set(flat) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        d = {**cls().to_flat(), **flat}
        p = float(d["eve_intercept"])
        return cls(
            n=int(d["n"]),
            delta=float(d["delta"]),
            m=int(d["m"]),
            n_s=int(d["n_s"]),
            target_residual=float(d["target_residual"]),
            max_rounds=int(d["max_rounds"]),
            abort_threshold_bit=float(d["abort_threshold_bit"]),
            abort_threshold_phase=float(d["abort_threshold_phase"]),
            eta=float(d["eta"]),
            key_len_rule=KeyLengthRule(int(d["key_margin"]), None if d["key_len_fixed"] is None else int(d["key_len_fixed"])),
            channel=ChannelParams(float(d["eps_b"]), float(d["eps_p"]), float(d["eps_bp"])),
            eve=InterceptResend(p) if p > 0 else None,
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class PrepRecords:
    w: np.ndarray  # draws from {1, 2, 3, 4}; 1 selects the X basis
    bases: np.ndarray
    bits: np.ndarray


@dataclass(frozen=True)
class MeasureRecords:
    bases: np.ndarray
    bits: np.ndarray


@dataclass(frozen=True)
class SiftedData:
    positions: np.ndarray
    alice_bits: BitVec
    bob_bits: BitVec
    bases: np.ndarray

    def __len__(self) -> int:
        return self.positions.size


@dataclass(frozen=True)
class CheckSelection:
    """Indices into the sifted arrays."""

    x_checks: np.ndarray
    z_checks: np.ndarray
    code: np.ndarray
    discarded: np.ndarray


@dataclass(frozen=True)
class CheckEstimate:
    eps_b_hat: float
    eps_p_hat: float
    n_bit_checks: int
    n_phase_checks: int
    bit_errors: int
    phase_errors: int


@dataclass
class SessionStats:
    n_qubits: int = 0
    n_sifted: int = 0
    n_x_checks: int = 0
    n_z_checks: int = 0
    n_discarded: int = 0
    estimate: CheckEstimate | None = None
    rounds: list[RoundStats] = field(default_factory=list)
    q: int = 0
    g: int = 0
    rejected: int = 0
    verify_parities: int = 0
    k: int = 0
    key_len: int = 0
    eps_1: float | None = None
    bound: SuccessBound | None = None

    @property
    def leaked_parity_bits(self) -> int:
        return sum(r.leaked_bits for r in self.rounds) + self.verify_parities


@dataclass
class SessionResult:
    status: str
    stats: SessionStats
    transcript: SessionTranscript
    key_a: BitVec | None = None
    key_b: BitVec | None = None
    stage: str | None = None
    reason: str | None = None
    message: str | None = None
    alice_raw: np.ndarray | None = field(default=None, repr=False)
    bob_raw: np.ndarray | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "success"

    @property
    def keys_match(self) -> bool | None:
        if not self.ok:
            return None
        return self.key_a == self.key_b


def alice_prepare_batch(config: ProtocolConfig, streams: SeedStreams) -> tuple[PrepRecords, np.ndarray]:
    n = config.n_qubits
    w = streams["alice-bases"].integers(1, 5, size=n, dtype=np.uint8)
    bases = np.where(w == 1, Basis.X, Basis.Z).astype(np.uint8)
    bits = streams["alice-bits"].integers(0, 2, size=n, dtype=np.uint8)
    bases, bits = qsim.prepare_batch(bases, bits)
    return PrepRecords(w, bases, bits), (2 * bases + bits).astype(np.uint8)


def transmit_and_measure(states: np.ndarray, config: ProtocolConfig, streams: SeedStreams) -> MeasureRecords:
    bases, bits = states >> 1, states & 1
    bases, bits = qsim.eve_act_batch(bases, bits, config.eve, streams["eve"])
    bits = qsim.channel_transmit_batch(bases, bits, config.channel, streams["channel"])
    bob_bases = streams["bob-bases"].integers(0, 2, size=states.size, dtype=np.uint8)
    bob_bits = qsim.measure_batch(bases, bits, bob_bases, streams["bob-outcomes"])
    return MeasureRecords(bob_bases, bob_bits)


def sift(
    alice: PrepRecords, bob: MeasureRecords, transcript: SessionTranscript | None = None, min_kept: int = 0
) -> SiftedData:
    if alice.bases.size != bob.bases.size:
        raise DimensionError("Alice and Bob records differ in length")
    if transcript is not None:
        transcript.announce("A", "bases", BitVec.from_bits(alice.bases).to_json())
        transcript.announce("B", "bases", BitVec.from_bits(bob.bases).to_json())
    keep = np.flatnonzero(alice.bases == bob.bases)
    if keep.size < min_kept:
        raise InsufficientSiftedBits(f"{keep.size} sifted bits, need {min_kept}", kept=int(keep.size))
    return SiftedData(keep, BitVec.from_bits(alice.bits[keep]), BitVec.from_bits(bob.bits[keep]), alice.bases[keep])


def select_check_bits(
    sifted: SiftedData, n: int, rng: np.random.Generator, transcript: SessionTranscript | None = None
) -> CheckSelection:
    """Every X-basis survivor is a check bit, plus as many random Z-basis ones.
    Of the Z-basis bits left, a random excess is discarded to leave exactly n."""
    x_idx = np.flatnonzero(sifted.bases == Basis.X)
    z_idx = np.flatnonzero(sifted.bases == Basis.Z)
    kx = x_idx.size
    if kx == 0:
        raise ImbalancedSift("no X-basis survivors, phase errors cannot be estimated")
    if z_idx.size - kx < n:
        raise ImbalancedSift(f"{z_idx.size} Z-basis bits cannot cover {kx} checks and {n} code bits")
    z_checks = np.sort(rng.choice(z_idx, size=kx, replace=False))
    rest = np.setdiff1d(z_idx, z_checks)
    discarded = np.sort(rng.choice(rest, size=rest.size - n, replace=False))
    code = np.setdiff1d(rest, discarded)
    if transcript is not None:
        transcript.announce("B", "check_reveal", {
            "z_checks": sifted.positions[z_checks].tolist(),
            "discarded": sifted.positions[discarded].tolist(),
        })
    return CheckSelection(x_idx, z_checks, code, discarded)


def estimate_errors(
    sifted: SiftedData, selection: CheckSelection, transcript: SessionTranscript | None = None
) -> CheckEstimate:
    if selection.x_checks.size == 0 or selection.z_checks.size == 0:
        raise EmptyCheckSet("both check partitions must be nonempty")
    order = np.concatenate([selection.x_checks, selection.z_checks])
    a = sifted.alice_bits.to_array()[order]
    b = sifted.bob_bits.to_array()[order]
    if transcript is not None:
        transcript.announce("A", "check_reveal", {"values": BitVec.from_bits(a).to_json()})
        transcript.announce("B", "check_reveal", {"values": BitVec.from_bits(b).to_json()})
    kx = selection.x_checks.size
    diff = a != b
    phase_err = int(diff[:kx].sum())
    bit_err = int(diff[kx:].sum())
    kz = selection.z_checks.size
    return CheckEstimate(bit_err / kz, phase_err / kx, kz, kx, bit_err, phase_err)


def abort_decision(estimate: CheckEstimate, config: ProtocolConfig) -> str | None:
    """None to proceed, otherwise the reason. Equality with a threshold proceeds."""
    if estimate.eps_b_hat > config.abort_threshold_bit:
        return f"bit error estimate {estimate.eps_b_hat:.4f} > {config.abort_threshold_bit}"
    if estimate.eps_p_hat > config.abort_threshold_phase:
        return f"phase error estimate {estimate.eps_p_hat:.4f} > {config.abort_threshold_phase}"
    return None


def _distill(config, streams, transcript, x_a, x_b, stats):
    """Crude correction, partition into subsets, verification."""
    a, b, stats.rounds = crude_cascade(
        x_a, x_b, config.target_residual, config.max_rounds, streams["pairing"], transcript
    )
    subsets = partition_subsets(a, b, config.n_s)
    stats.q = len(subsets)
    rng = streams["parity-strings"]
    kept_a, kept_b = [], []
    for i, (s_a, s_b) in enumerate(subsets):
        strings = gen_parity_strings(config.n_s, config.m, rng, transcript, subset=i)
        out = verify_subset(s_a, s_b, strings, transcript, subset=i)
        stats.verify_parities += out.failed_round or config.m
        if out.accepted:
            kept_a.append(out.alice)
            kept_b.append(out.bob)
    stats.g = len(kept_a)
    stats.rejected = stats.q - stats.g
    if not kept_a:
        raise NoSubsetsAccepted(f"all {stats.q} subsets rejected")
    return concat(kept_a), concat(kept_b)


def run_session(config: ProtocolConfig) -> SessionResult:
    streams = SeedStreams(config.seed)
    transcript = SessionTranscript()
    stats = SessionStats(n_qubits=config.n_qubits)
    prep, states = alice_prepare_batch(config, streams)
    bob = transmit_and_measure(states, config, streams)
    result = SessionResult("abort", stats, transcript, alice_raw=prep.bits, bob_raw=bob.bits)
    try:
        sifted = sift(prep, bob, transcript, min_kept=2 * config.n)
        stats.n_sifted = len(sifted)
        sel = select_check_bits(sifted, config.n, streams["check-select"], transcript)
        stats.n_x_checks, stats.n_z_checks, stats.n_discarded = sel.x_checks.size, sel.z_checks.size, sel.discarded.size
        est = estimate_errors(sifted, sel, transcript)
        stats.estimate = est
        why = abort_decision(est, config)
        if why is not None:
            raise CheckFailure(why)

        x_a = sifted.alice_bits.take(sel.code)
        x_b = sifted.bob_bits.take(sel.code)
        dist_a, dist_b = _distill(config, streams, transcript, x_a, x_b, stats)
        stats.k = dist_a.nbits

        eps_1 = phase_update(est.eps_b_hat, est.eps_p_hat, 0.0).upper_bound + config.eta
        stats.eps_1 = eps_1
        stats.bound = success_lower_bound(stats.g, config.m, config.eta, config.n, est.eps_p_hat)
        spec = build_code(stats.k, eps_1, config.key_len_rule, streams["code"], transcript)
        stats.key_len = spec.key_len
        v, announcement = alice_announce(dist_a, streams["privacy-v"], transcript)
        v_b = bob_recover(dist_b, announcement)
        result.key_a = extract_key(v, spec, "A").key
        result.key_b = extract_key(v_b, spec, "B").key
        result.status = "success"
    except ProtocolAbort as exc:
        sender = "B" if exc.stage in ("sift", "select") else "A"
        transcript.announce(sender, "abort", {"stage": exc.stage, "reason": exc.reason})
        result.stage, result.reason, result.message = exc.stage, exc.reason, str(exc)
    return result


def replay_key(transcript: SessionTranscript, raw_bits: np.ndarray) -> BitVec | None:
    """Recompute one party's final key from its raw bits and the public record.

    ``raw_bits`` are that party's per-qubit values (Alice's prepared bits or
    Bob's outcomes). Returns None when the transcript ends in an abort.
    """
    recs = transcript.records
    if any(r.kind == "abort" for r in recs):
        return None
    bases = [BitVec.from_json(r.data).to_array() for r in recs if r.kind == "bases"]
    positions = np.flatnonzero(bases[0] == bases[1])
    sifted_bases = bases[0][positions]
    selection = next(r.data for r in recs if r.kind == "check_reveal" and r.sender == "B" and "z_checks" in r.data)
    z_pos = positions[sifted_bases == Basis.Z]
    code = np.setdiff1d(z_pos, np.union1d(selection["z_checks"], selection["discarded"]))
    bits = np.asarray(raw_bits, dtype=np.uint8)[code]

    # crude rounds: each pairing is followed by both parties' parity lists
    crude = {}
    verify = {}
    strings = {}
    for r in recs:
        d = r.data if r.kind in ("pairing", "parity_ack", "R_string") else None
        if r.kind == "pairing":
            crude.setdefault(d["round"], {})["perm"] = np.asarray(d["perm"])
        elif r.kind == "parity_ack" and d["stage"] == "crude":
            crude[d["round"]][r.sender] = BitVec.from_json(d["parities"]).to_array()
        elif r.kind == "parity_ack":
            verify.setdefault(d["subset"], {}).setdefault(d["round"], {})[r.sender] = d["parity"]
        elif r.kind == "R_string":
            strings.setdefault(d["subset"], {})[d["round"]] = BitVec.from_json(d)
    for rnd in sorted(crude):
        perm = crude[rnd]["perm"]
        half = 2 * (perm.size // 2)
        agree = crude[rnd]["A"] == crude[rnd]["B"]
        bits = bits[perm[0:half:2][agree]]

    n_s = strings[0][1].nbits
    kept = []
    for i in sorted(strings):
        s = BitVec.from_bits(bits[i * n_s : (i + 1) * n_s])
        rounds = verify[i]
        if any(rounds[j]["A"] != rounds[j]["B"] for j in rounds) or len(rounds) < len(strings[i]):
            continue
        for j in sorted(strings[i]):
            s = s.delete(strings[i][j].last_one())
        kept.append(s)
    x = concat(kept)

    code_spec = next(r.data for r in recs if r.kind == "code_spec")
    h2 = parity_check_of(BitMatrix.from_json(code_spec["G2"]))
    announcement = BitVec.from_json(next(r.data for r in recs if r.kind == "xv_announce"))
    return mat_vec(h2, announcement ^ x)
