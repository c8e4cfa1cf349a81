"""Key extraction as the coset label of v + C2.

C1 is the whole space F_2^k, so no bit-error decoding is needed anywhere:
Alice masks her string x with a uniform v, Bob unmasks with his own copy of
x, and both publish nothing else. The final key is H2 v for a parity check
matrix H2 of C2, which is constant on each coset of C2 and distinct across
cosets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import binary_entropy
from .errors import NoKeyCapacity
from .gf2 import BitMatrix, BitVec, DimensionError, RankDeficientError, mat_vec, parity_check_of
from .transcript import SessionTranscript, maybe_announce

CODE_STREAM = "code"


@dataclass(frozen=True)
class KeyLengthRule:
    """key_len = floor(k * (1 - h(eps_1))) - margin, clamped to [0, k].

    Not derived from any security proof; a configurable placeholder. Set
    ``fixed`` to bypass the formula entirely.
    """

    margin: int = 10
    fixed: int | None = None

    def key_len(self, k: int, eps_1: float) -> int:
        if self.fixed is not None:
            return max(0, min(k, self.fixed))
        if eps_1 >= 0.5:
            return 0
        raw = math.floor(k * (1.0 - binary_entropy(eps_1))) - self.margin
        return max(0, min(k, raw))


@dataclass(frozen=True)
class CodeSpec:
    k: int
    key_len: int
    g2: BitMatrix
    h2: BitMatrix

    def __post_init__(self):
        if self.g2.shape != (self.k - self.key_len, self.k):
            raise DimensionError(f"G2 shape {self.g2.shape} inconsistent with k={self.k}, key_len={self.key_len}")
        if self.h2.shape != (self.key_len, self.k):
            raise DimensionError(f"H2 shape {self.h2.shape} inconsistent with k={self.k}, key_len={self.key_len}")

    @classmethod
    def from_generator(cls, g2: BitMatrix) -> CodeSpec:
        h2 = parity_check_of(g2)
        return cls(g2.ncols, h2.nrows, g2, h2)

    def to_json(self) -> dict:
        return {"k": self.k, "key_len": self.key_len, "G2": self.g2.to_json(), "stream": CODE_STREAM}


@dataclass(frozen=True)
class KeyMaterial:
    key: BitVec
    side: str


def random_code(k: int, key_len: int, rng: np.random.Generator) -> CodeSpec:
    """C2 from a uniformly random full-rank generator, redrawn until full rank."""
    while True:
        g2 = BitMatrix.random(k - key_len, k, rng)
        try:
            return CodeSpec.from_generator(g2)
        except RankDeficientError:
            continue


def build_code(
    k: int,
    eps_1: float,
    rule: KeyLengthRule | None = None,
    rng: np.random.Generator | None = None,
    transcript: SessionTranscript | None = None,
) -> CodeSpec:
    if k < 1:
        raise ValueError("k must be >= 1")
    if eps_1 < 0:
        raise ValueError("eps_1 must be >= 0")
    rule = rule or KeyLengthRule()
    key_len = rule.key_len(k, eps_1)
    if key_len <= 0:
        raise NoKeyCapacity(f"no key capacity at k={k}, eps_1={eps_1:.4g}")
    rng = rng if rng is not None else np.random.default_rng()
    spec = random_code(k, key_len, rng)
    maybe_announce(transcript, "A", "code_spec", spec.to_json())
    return spec


def alice_announce(
    x: BitVec, rng: np.random.Generator, transcript: SessionTranscript | None = None
) -> tuple[BitVec, BitVec]:
    v = BitVec.random(x.nbits, rng)
    announcement = x ^ v
    maybe_announce(transcript, "A", "xv_announce", announcement.to_json())
    return v, announcement


def bob_recover(x_b: BitVec, announcement: BitVec) -> BitVec:
    return announcement ^ x_b


def extract_key(v: BitVec, spec: CodeSpec, side: str = "A") -> KeyMaterial:
    if v.nbits != spec.k:
        raise DimensionError(f"v has {v.nbits} bits, code has k={spec.k}")
    return KeyMaterial(mat_vec(spec.h2, v), side)
