"""Packed GF(2) vectors and matrices.

A ``BitVec`` stores its bits in a single Python integer, bit 1 (the
leftmost position) in the most significant place, so ``int(str(v), 2)``
is the storage word. Public positions are 1-based; ``v.bit(1)`` is the
first bit of the string.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Operands have incompatible lengths or shapes."""


class RankDeficientError(ValueError):
    """A generator matrix was expected to have full row rank."""


def _random_word(nbits: int, rng: np.random.Generator) -> int:
    """``nbits`` fair coin flips packed into an int."""
    if nbits == 0:
        return 0
    nwords = (nbits + 63) // 64
    raw = rng.bit_generator.random_raw(nwords)
    return int.from_bytes(raw.tobytes(), "little") >> (64 * nwords - nbits)


@dataclass(frozen=True, slots=True)
class BitVec:
    nbits: int
    value: int = 0

    def __post_init__(self):
        if self.nbits < 0:
            raise DimensionError("negative length")
        if self.value < 0 or self.value >> self.nbits:
            raise ValueError("bits set beyond length")

    # construction

    @classmethod
    def zeros(cls, nbits: int) -> BitVec:
        return cls(nbits, 0)

    @classmethod
    def ones(cls, nbits: int) -> BitVec:
        return cls(nbits, (1 << nbits) - 1)

    @classmethod
    def from_str(cls, s: str) -> BitVec:
        s = s.strip()
        if s and set(s) - {"0", "1"}:
            raise ValueError(f"not a bit string: {s!r}")
        return cls(len(s), int(s, 2) if s else 0)

    @classmethod
    def from_bits(cls, bits: Iterable[int] | np.ndarray) -> BitVec:
        arr = np.asarray(bits, dtype=np.uint8).ravel()
        n = arr.size
        if n == 0:
            return cls(0, 0)
        packed = np.packbits(arr & 1).tobytes()
        return cls(n, int.from_bytes(packed, "big") >> (8 * len(packed) - n))

    @classmethod
    def from_hex(cls, hexstr: str, nbits: int) -> BitVec:
        return cls(nbits, int(hexstr, 16) if hexstr else 0)

    @classmethod
    def random(cls, nbits: int, rng: np.random.Generator) -> BitVec:
        return cls(nbits, _random_word(nbits, rng))

    # conversion

    def to_array(self) -> np.ndarray:
        """Bits as a uint8 array, index 0 holding position 1."""
        n = self.nbits
        if n == 0:
            return np.zeros(0, dtype=np.uint8)
        nbytes = (n + 7) // 8
        raw = (self.value << (8 * nbytes - n)).to_bytes(nbytes, "big")
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:n]

    def to_hex(self) -> str:
        return format(self.value, f"0{(self.nbits + 3) // 4}x") if self.nbits else ""

    def to_json(self) -> dict:
        return {"hex": self.to_hex(), "len": self.nbits}

    @classmethod
    def from_json(cls, obj: dict) -> BitVec:
        return cls.from_hex(obj["hex"], obj["len"])

    def __str__(self) -> str:
        return format(self.value, f"0{self.nbits}b") if self.nbits else ""

    def __repr__(self) -> str:
        if self.nbits <= 64:
            return f"BitVec('{self}')"
        return f"BitVec(nbits={self.nbits}, hex={self.to_hex()[:16]}...)"

    # positional access (1-based)

    def __len__(self) -> int:
        return self.nbits

    def __iter__(self):
        return iter(self.to_array().tolist())

    def bit(self, pos: int) -> int:
        if not 1 <= pos <= self.nbits:
            raise IndexError(pos)
        return (self.value >> (self.nbits - pos)) & 1

    def flip(self, pos: int) -> BitVec:
        if not 1 <= pos <= self.nbits:
            raise IndexError(pos)
        return BitVec(self.nbits, self.value ^ (1 << (self.nbits - pos)))

    def delete(self, pos: int) -> BitVec:
        """Drop position ``pos``; later positions shift down by one."""
        if not 1 <= pos <= self.nbits:
            raise IndexError(pos)
        shift = self.nbits - pos
        low = self.value & ((1 << shift) - 1)
        return BitVec(self.nbits - 1, ((self.value >> (shift + 1)) << shift) | low)

    def last_one(self) -> int:
        """1-based position of the last set bit, or 0 for the zero vector."""
        if self.value == 0:
            return 0
        lsb = (self.value & -self.value).bit_length() - 1
        return self.nbits - lsb

    def ones_positions(self) -> list[int]:
        return (np.flatnonzero(self.to_array()) + 1).tolist()

    def weight(self) -> int:
        return self.value.bit_count()

    def any(self) -> bool:
        return self.value != 0

    def concat(self, other: BitVec) -> BitVec:
        return BitVec(self.nbits + other.nbits, (self.value << other.nbits) | other.value)

    def take(self, indices: Sequence[int] | np.ndarray) -> BitVec:
        """Sub-vector at 0-based ``indices`` (array-style selection)."""
        return BitVec.from_bits(self.to_array()[np.asarray(indices, dtype=np.intp)])

    # algebra

    def _check(self, other: BitVec):
        if self.nbits != other.nbits:
            raise DimensionError(f"length mismatch: {self.nbits} vs {other.nbits}")

    def __xor__(self, other: BitVec) -> BitVec:
        self._check(other)
        return BitVec(self.nbits, self.value ^ other.value)

    def __and__(self, other: BitVec) -> BitVec:
        self._check(other)
        return BitVec(self.nbits, self.value & other.value)


def concat(vectors: Iterable[BitVec]) -> BitVec:
    out = BitVec(0, 0)
    for v in vectors:
        out = out.concat(v)
    return out


def dot(a: BitVec, b: BitVec) -> int:
    """Mod-2 inner product."""
    a._check(b)
    return (a.value & b.value).bit_count() & 1


def parity(a: BitVec) -> int:
    return a.value.bit_count() & 1


@dataclass(frozen=True)
class BitMatrix:
    rows: tuple[BitVec, ...]
    ncols: int

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        for r in self.rows:
            if r.nbits != self.ncols:
                raise DimensionError(f"row of length {r.nbits} in matrix with {self.ncols} columns")

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @classmethod
    def from_rows(cls, rows: Sequence[str | BitVec], ncols: int | None = None) -> BitMatrix:
        vecs = [BitVec.from_str(r) if isinstance(r, str) else r for r in rows]
        if ncols is None:
            if not vecs:
                raise DimensionError("ncols required for an empty matrix")
            ncols = vecs[0].nbits
        return cls(tuple(vecs), ncols)

    @classmethod
    def from_words(cls, words: Iterable[int], ncols: int) -> BitMatrix:
        return cls(tuple(BitVec(ncols, w) for w in words), ncols)

    @classmethod
    def from_array(cls, arr) -> BitMatrix:
        a = np.asarray(arr, dtype=np.uint8)
        return cls(tuple(BitVec.from_bits(r) for r in a), a.shape[1])

    @classmethod
    def identity(cls, n: int) -> BitMatrix:
        return cls.from_words((1 << (n - 1 - i) for i in range(n)), n)

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> BitMatrix:
        return cls.from_words([0] * nrows, ncols)

    @classmethod
    def random(cls, nrows: int, ncols: int, rng: np.random.Generator) -> BitMatrix:
        return cls.from_words((_random_word(ncols, rng) for _ in range(nrows)), ncols)

    def to_array(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, self.ncols), dtype=np.uint8)
        return np.stack([r.to_array() for r in self.rows])

    def words(self) -> list[int]:
        return [r.value for r in self.rows]

    def to_json(self) -> dict:
        return {"rows": self.nrows, "cols": self.ncols, "hex": [r.to_hex() for r in self.rows]}

    @classmethod
    def from_json(cls, obj: dict) -> BitMatrix:
        return cls.from_words((int(h, 16) if h else 0 for h in obj["hex"]), obj["cols"])

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rows)


def _rref(words: list[int], ncols: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form over GF(2).

    Columns are scanned left to right; the pivot for a column is the first
    remaining row holding a one there. Returns the nonzero reduced rows and
    their 0-based pivot columns (counted from the left).
    """
    rows = list(words)
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        mask = 1 << (ncols - 1 - col)
        for i in range(r, len(rows)):
            if rows[i] & mask:
                break
        else:
            continue
        rows[r], rows[i] = rows[i], rows[r]
        pivot = rows[r]
        for j in range(len(rows)):
            if j != r and rows[j] & mask:
                rows[j] ^= pivot
        pivots.append(col)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def rank(m: BitMatrix) -> int:
    return len(_rref(m.words(), m.ncols)[1])


def parity_check_of(g: BitMatrix) -> BitMatrix:
    """Parity-check matrix whose kernel is exactly the row space of ``g``.

    ``g`` must have full row rank. The result has ``ncols - rank`` rows,
    one per non-pivot column of the reduced form, in column order.
    """
    k = g.ncols
    reduced, pivots = _rref(g.words(), k)
    if len(pivots) != g.nrows:
        raise RankDeficientError(f"generator has rank {len(pivots)} < {g.nrows} rows")
    free = np.setdiff1d(np.arange(k), pivots)
    h = np.zeros((free.size, k), dtype=np.uint8)
    h[np.arange(free.size), free] = 1
    if reduced:
        red = BitMatrix.from_words(reduced, k).to_array()
        h[:, pivots] = red[:, free].T
    return BitMatrix.from_array(h) if free.size else BitMatrix.zeros(0, k)


def mat_vec(m: BitMatrix, v: BitVec) -> BitVec:
    if m.ncols != v.nbits:
        raise DimensionError(f"matrix has {m.ncols} columns, vector has {v.nbits} bits")
    x = v.value
    out = 0
    for w in m.words():
        out = (out << 1) | ((w & x).bit_count() & 1)
    return BitVec(m.nrows, out)


def row_space(m: BitMatrix) -> list[BitVec]:
    """Every vector in the row space; exponential, for small matrices only."""
    reduced, _ = _rref(m.words(), m.ncols)
    span = {0}
    for w in reduced:
        span |= {s ^ w for s in span}
    return [BitVec(m.ncols, s) for s in sorted(span)]
