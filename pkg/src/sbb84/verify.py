"""Zero-error verification of a subset by announced random parity strings.

For round j Alice's string R_j has length n_s - j + 1. Both sides announce
the parity of their current string against R_j. On agreement each removes
the position of R_j's last set bit (so that the announced parity tells Eve
nothing about the survivors); on disagreement the whole subset is dropped.
A subset that still differs slips through all m rounds with probability at
most 2**-m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gf2 import BitVec, DimensionError, _random_word
from .transcript import SessionTranscript, maybe_announce


@dataclass(frozen=True)
class ParityStringSet:
    strings: tuple[BitVec, ...]

    def __post_init__(self):
        object.__setattr__(self, "strings", tuple(self.strings))
        if not self.strings:
            raise ValueError("need at least one parity string")
        n_s = self.strings[0].nbits
        for j, r in enumerate(self.strings):
            if r.nbits != n_s - j:
                raise DimensionError(f"string {j + 1} has length {r.nbits}, expected {n_s - j}")
            if not r.any():
                raise ValueError(f"string {j + 1} is all zero")

    @property
    def n_s(self) -> int:
        return self.strings[0].nbits

    @property
    def m(self) -> int:
        return len(self.strings)


@dataclass(frozen=True)
class VerifyOutcome:
    accepted: bool
    alice: BitVec | None = None
    bob: BitVec | None = None
    failed_round: int | None = None


def gen_parity_strings(
    n_s: int,
    m: int,
    rng: np.random.Generator,
    transcript: SessionTranscript | None = None,
    subset: int = 0,
) -> ParityStringSet:
    if not 1 <= m < n_s:
        raise ValueError(f"need 1 <= m < n_s, got m={m}, n_s={n_s}")
    # one block of coin flips cut into the m strings; all-zero strings are redrawn
    lengths = range(n_s, n_s - m, -1)
    pool = _random_word(sum(lengths), rng)
    strings = []
    for j, nbits in enumerate(lengths, 1):
        word = pool & ((1 << nbits) - 1)
        pool >>= nbits
        while word == 0:
            word = _random_word(nbits, rng)
        r = BitVec(nbits, word)
        strings.append(r)
        if transcript is not None:
            transcript.announce("A", "R_string", {"subset": subset, "round": j, **r.to_json()})
    return ParityStringSet(tuple(strings))


def _remove(word: int, shift: int) -> int:
    # shift is the storage bit index (0 = last position)
    return ((word >> (shift + 1)) << shift) | (word & ((1 << shift) - 1))


def verify_round(
    s_a: BitVec,
    s_b: BitVec,
    r: BitVec,
    transcript: SessionTranscript | None = None,
    subset: int = 0,
    round_index: int = 1,
) -> tuple[BitVec, BitVec] | None:
    """One parity comparison. Returns the shortened strings, or None on mismatch."""
    if not (s_a.nbits == s_b.nbits == r.nbits):
        raise DimensionError(f"lengths {s_a.nbits}, {s_b.nbits}, {r.nbits} differ")
    if not r.any():
        raise ValueError("parity string is all zero")
    pa = (s_a.value & r.value).bit_count() & 1
    pb = (s_b.value & r.value).bit_count() & 1
    for sender, p in (("A", pa), ("B", pb)):
        maybe_announce(transcript, sender, "parity_ack", {"stage": "verify", "subset": subset, "round": round_index, "parity": p})
    if pa != pb:
        return None
    p_k = r.last_one()
    return s_a.delete(p_k), s_b.delete(p_k)


def verify_subset(
    s_a: BitVec,
    s_b: BitVec,
    strings: ParityStringSet,
    transcript: SessionTranscript | None = None,
    subset: int = 0,
) -> VerifyOutcome:
    if not (s_a.nbits == s_b.nbits == strings.n_s):
        raise DimensionError(f"subset lengths {s_a.nbits}, {s_b.nbits} do not match n_s={strings.n_s}")
    a, b, n = s_a.value, s_b.value, s_a.nbits
    for j, r in enumerate(strings.strings, start=1):
        rw = r.value
        pa = (a & rw).bit_count() & 1
        pb = (b & rw).bit_count() & 1
        if transcript is not None:
            for sender, p in (("A", pa), ("B", pb)):
                transcript.announce(sender, "parity_ack", {"stage": "verify", "subset": subset, "round": j, "parity": p})
        if pa != pb:
            return VerifyOutcome(False, failed_round=j)
        shift = (rw & -rw).bit_length() - 1
        a, b = _remove(a, shift), _remove(b, shift)
        n -= 1
    return VerifyOutcome(True, BitVec(n, a), BitVec(n, b))
