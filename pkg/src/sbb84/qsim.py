"""Four-state qubit model for BB84.

Prepared states, Pauli errors and measurements in the protocol all stay
inside {|0>, |1>, |+>, |->}, so a state is just a (basis, bit) pair and
global phases are dropped. Batch variants act on parallel numpy arrays of
bases and bits and are what the session driver uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Basis(IntEnum):
    Z = 0
    X = 1


class Pauli(IntEnum):
    I = 0  # noqa: E741
    X = 1
    Z = 2
    Y = 3


class QubitState(IntEnum):
    Z0 = 0
    Z1 = 1
    XPLUS = 2
    XMINUS = 3

    @property
    def basis(self) -> Basis:
        return Basis(self >> 1)

    @property
    def bit(self) -> int:
        return int(self) & 1


@dataclass(frozen=True)
class ChannelParams:
    """Pauli channel given by its marginal error rates.

    eps_b counts sigma_x and sigma_y events (bit flips), eps_p counts
    sigma_z and sigma_y events (phase flips), eps_bp the sigma_y events.
    """

    eps_b: float = 0.0
    eps_p: float = 0.0
    eps_bp: float = 0.0

    def __post_init__(self):
        for name in ("eps_b", "eps_p", "eps_bp"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.eps_bp > min(self.eps_b, self.eps_p):
            raise ValueError("eps_bp must not exceed min(eps_b, eps_p)")
        if self.eps_b + self.eps_p - self.eps_bp > 1.0 + 1e-12:
            raise ValueError("eps_b + eps_p - eps_bp must be <= 1")

    def pauli_probs(self) -> dict[Pauli, float]:
        return {
            Pauli.I: 1.0 - self.eps_b - self.eps_p + self.eps_bp,
            Pauli.X: self.eps_b - self.eps_bp,
            Pauli.Z: self.eps_p - self.eps_bp,
            Pauli.Y: self.eps_bp,
        }

    def _thresholds(self) -> np.ndarray:
        p = self.pauli_probs()
        return np.cumsum([p[Pauli.I], p[Pauli.X], p[Pauli.Z]])


@dataclass(frozen=True)
class InterceptResend:
    """Eve measures a fraction ``p_attack`` of qubits in a random basis and resends."""

    p_attack: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_attack <= 1.0:
            raise ValueError(f"p_attack must be in [0, 1], got {self.p_attack}")


EveStrategy = InterceptResend | None


def prepare(basis: Basis, bit: int) -> QubitState:
    return QubitState(2 * int(basis) + (bit & 1))


def measure(state: QubitState, basis: Basis, rng: np.random.Generator) -> tuple[int, QubitState]:
    if state.basis == basis:
        return state.bit, state
    bit = int(rng.integers(0, 2))
    return bit, prepare(basis, bit)


def apply_pauli(state: QubitState, pauli: Pauli) -> QubitState:
    flips = _flip_table[int(pauli)][int(state.basis)]
    return QubitState(int(state) ^ flips)


# _flip_table[pauli][basis]: does this Pauli flip the encoded bit in that basis
_flip_table = (
    (0, 0),  # I
    (1, 0),  # X flips Z-basis values, fixes |+>, |->
    (0, 1),  # Z flips X-basis values
    (1, 1),  # Y = XZ up to phase
)


def sample_pauli(params: ChannelParams, rng: np.random.Generator, size: int | None = None):
    u = rng.random(size)
    return np.searchsorted(params._thresholds(), u, side="right")


def channel_transmit(state: QubitState, params: ChannelParams, rng: np.random.Generator) -> QubitState:
    return apply_pauli(state, Pauli(int(sample_pauli(params, rng))))


def eve_act(state: QubitState, strategy: EveStrategy, rng: np.random.Generator) -> QubitState:
    if strategy is None or strategy.p_attack == 0.0:
        return state
    if rng.random() >= strategy.p_attack:
        return state
    _, collapsed = measure(state, Basis(int(rng.integers(0, 2))), rng)
    return collapsed


# batch forms: bases and bits are equal-length uint8 arrays

def prepare_batch(bases: np.ndarray, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(bases, dtype=np.uint8).copy(), np.asarray(bits, dtype=np.uint8) & 1


def measure_batch(bases, bits, meas_bases, rng: np.random.Generator) -> np.ndarray:
    coins = rng.integers(0, 2, size=len(bases), dtype=np.uint8)
    return np.where(bases == meas_bases, bits, coins).astype(np.uint8)


def channel_transmit_batch(bases, bits, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """New bit values after the Pauli channel; bases are unchanged."""
    pauli = sample_pauli(params, rng, len(bases))
    flip_z = (pauli == Pauli.X) | (pauli == Pauli.Y)
    flip_x = (pauli == Pauli.Z) | (pauli == Pauli.Y)
    flip = np.where(bases == Basis.Z, flip_z, flip_x)
    return (bits ^ flip).astype(np.uint8)


def eve_act_batch(bases, bits, strategy: EveStrategy, rng: np.random.Generator):
    if strategy is None or strategy.p_attack == 0.0:
        return bases, bits
    n = len(bases)
    hit = rng.random(n) < strategy.p_attack
    eve_bases = rng.integers(0, 2, size=n, dtype=np.uint8)
    outcome = measure_batch(bases, bits, eve_bases, rng)
    return np.where(hit, eve_bases, bases).astype(np.uint8), np.where(hit, outcome, bits).astype(np.uint8)
