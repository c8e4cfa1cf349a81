"""Crude bit-flip error correction by random pair parity comparison.

Each round Alice announces a random permutation of the current bits; the
adjacent elements form pairs. Both sides announce the parity of every pair.
Agreeing pairs keep their first bit, disagreeing pairs are dropped, and an
odd leftover bit is dropped too. Roughly, the error rate squares each round
while the population halves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .analysis import kept_error_rate
from .errors import PopulationExhausted, RoundsExhausted, TooFewBits
from .gf2 import BitVec, DimensionError
from .transcript import SessionTranscript, maybe_announce

DEFAULT_MAX_ROUNDS = 16


@dataclass(frozen=True)
class PairingPlan:
    perm: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("pairing plan is not a permutation")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> PairingPlan:
        return cls(rng.permutation(n))

    @property
    def size(self) -> int:
        return self.perm.size

    @property
    def firsts(self) -> np.ndarray:
        return self.perm[0 : 2 * (self.size // 2) : 2]

    @property
    def seconds(self) -> np.ndarray:
        return self.perm[1 : 2 * (self.size // 2) : 2]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.firsts.tolist(), self.seconds.tolist()))

    @property
    def leftover(self) -> int | None:
        return int(self.perm[-1]) if self.size % 2 else None


@dataclass(frozen=True)
class RoundStats:
    round: int
    input_count: int
    pairs: int
    disagreements: int
    kept: int
    residual: float
    anomalous: bool = False

    @property
    def leaked_bits(self) -> int:
        # one announced parity per pair, identical information on both sides
        return self.pairs

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "input_count": self.input_count,
            "pairs": self.pairs,
            "disagreements": self.disagreements,
            "kept": self.kept,
            "residual": self.residual,
            "anomalous": self.anomalous,
        }


class ResidualEstimate(NamedTuple):
    input_rate: float
    output_rate: float
    anomalous: bool


def estimate_residual(disagree_fraction: float) -> ResidualEstimate:
    """Invert f = 2e(1-e) for the round's input error rate, then push it
    through the kept-bit rate. Fractions above 1/2 saturate at e = 1/2."""
    if disagree_fraction < 0:
        raise ValueError("disagreement fraction must be >= 0")
    anomalous = disagree_fraction > 0.5
    f = min(disagree_fraction, 0.5)
    eps = (1.0 - math.sqrt(max(0.0, 1.0 - 2.0 * f))) / 2.0
    return ResidualEstimate(eps, kept_error_rate(eps), anomalous)


def crude_round(
    alice_bits: BitVec,
    bob_bits: BitVec,
    plan: PairingPlan,
    transcript: SessionTranscript | None = None,
    round_index: int = 1,
) -> tuple[BitVec, BitVec, RoundStats]:
    if alice_bits.nbits != bob_bits.nbits:
        raise DimensionError(f"length mismatch: {alice_bits.nbits} vs {bob_bits.nbits}")
    n = alice_bits.nbits
    if n < 2:
        raise DimensionError("a pairing round needs at least two bits")
    if plan.size != n:
        raise DimensionError(f"plan covers {plan.size} indices, strings have {n}")

    a = alice_bits.to_array()
    b = bob_bits.to_array()
    first, second = plan.firsts, plan.seconds
    par_a = a[first] ^ a[second]
    par_b = b[first] ^ b[second]
    maybe_announce(transcript, "A", "pairing", {"round": round_index, "perm": plan.perm.tolist()})
    maybe_announce(transcript, "A", "parity_ack",
                   {"stage": "crude", "round": round_index, "parities": BitVec.from_bits(par_a).to_json()})
    maybe_announce(transcript, "B", "parity_ack",
                   {"stage": "crude", "round": round_index, "parities": BitVec.from_bits(par_b).to_json()})

    agree = par_a == par_b
    keep = first[agree]
    pairs = first.size
    disagreements = int(pairs - agree.sum())
    est = estimate_residual(disagreements / pairs)
    stats = RoundStats(round_index, n, pairs, disagreements, int(keep.size), est.output_rate, est.anomalous)
    return BitVec.from_bits(a[keep]), BitVec.from_bits(b[keep]), stats


def crude_cascade(
    alice_bits: BitVec,
    bob_bits: BitVec,
    target_residual: float,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    rng: np.random.Generator | None = None,
    transcript: SessionTranscript | None = None,
) -> tuple[BitVec, BitVec, list[RoundStats]]:
    """Repeat pairing rounds until the estimated residual rate reaches the target.

    Raises ``RoundsExhausted`` if ``max_rounds`` pass without reaching it and
    ``PopulationExhausted`` if fewer than two bits are left to pair.
    """
    if not 0.0 < target_residual < 1.0:
        raise ValueError("target_residual must be in (0, 1)")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    stats: list[RoundStats] = []
    a, b = alice_bits, bob_bits
    for r in range(1, max_rounds + 1):
        if a.nbits < 2:
            raise PopulationExhausted(f"{a.nbits} bits left before round {r}", rounds=stats)
        a, b, st = crude_round(a, b, PairingPlan.random(a.nbits, rng), transcript, r)
        stats.append(st)
        if st.residual <= target_residual:
            return a, b, stats
    raise RoundsExhausted(
        f"residual estimate {stats[-1].residual:.3g} above target after {max_rounds} rounds", rounds=stats
    )


def partition_subsets(bits_a: BitVec, bits_b: BitVec, n_s: int) -> list[tuple[BitVec, BitVec]]:
    """Consecutive blocks of ``n_s`` bits; the trailing remainder is dropped."""
    if bits_a.nbits != bits_b.nbits:
        raise DimensionError(f"length mismatch: {bits_a.nbits} vs {bits_b.nbits}")
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    q = bits_a.nbits // n_s
    if q == 0:
        raise TooFewBits(f"{bits_a.nbits} bits cannot fill a subset of {n_s}")
    a, b = bits_a.to_array(), bits_b.to_array()
    return [
        (BitVec.from_bits(a[i * n_s : (i + 1) * n_s]), BitVec.from_bits(b[i * n_s : (i + 1) * n_s]))
        for i in range(q)
    ]
