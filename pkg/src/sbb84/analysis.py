"""Closed-form error rates and success bounds for the simplified protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class PhaseUpdate(NamedTuple):
    exact: float
    upper_bound: float


class DiscardEstimate(NamedTuple):
    single_error: float
    all_errors: float


class SuccessBound(NamedTuple):
    value: float
    correctness: float
    confidence: float
    vacuous: bool


def _check_prob(name: str, x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {x}")


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def kept_error_rate(eps: float) -> float:
    """Error rate of the surviving bit after one pairing round at i.i.d. rate eps.

    A pair agrees when neither or both bits are wrong; only the latter leaves
    an error in the kept bit.
    """
    both = eps * eps
    return both / ((1 - eps) ** 2 + both)


def phase_update(eps_b: float, eps_p: float, eps_bp: float) -> PhaseUpdate:
    """Phase-flip rate among qubits with no bit flip.

    ``exact`` uses the joint rate; ``upper_bound`` is the worst case
    eps_bp = 0.
    """
    for name, v in (("eps_b", eps_b), ("eps_p", eps_p), ("eps_bp", eps_bp)):
        _check_prob(name, v)
    if eps_b >= 1.0:
        raise ValueError("eps_b must be < 1")
    if eps_bp > min(eps_b, eps_p):
        raise ValueError("eps_bp must not exceed min(eps_b, eps_p)")
    keep = 1.0 - eps_b
    return PhaseUpdate((eps_p - eps_bp) / keep, eps_p / keep)


def epsilon1_confidence(eta: float, n: int, eps_p: float) -> float:
    if eta <= 0:
        raise ValueError("eta must be > 0")
    _check_prob("eps_p", eps_p)
    var = eps_p - eps_p * eps_p
    if var == 0.0:
        return 1.0
    return -math.expm1(-eta * eta * n / (4.0 * var))


def subset_discard_prob(n_s: int, eps_b_c: float) -> DiscardEstimate:
    """Chance a verified subset is thrown away at residual bit error rate eps_b_c.

    ``single_error`` is the exactly-one-error term, a slight underestimate;
    ``all_errors`` counts any error, a slight overestimate since a few
    erroneous subsets slip through verification.
    """
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    _check_prob("eps_b_c", eps_b_c)
    single = n_s * eps_b_c * (1 - eps_b_c) ** (n_s - 1)
    return DiscardEstimate(single, -math.expm1(n_s * math.log1p(-eps_b_c)) if eps_b_c < 1 else 1.0)


def key_correctness_bound(g: int, m: int) -> float:
    return max(0.0, 1.0 - g * 2.0 ** (-m))


def success_lower_bound(g: int, m: int, eta: float, n: int, eps_p: float) -> SuccessBound:
    if g < 0:
        raise ValueError("g must be >= 0")
    if m < 1:
        raise ValueError("m must be >= 1")
    vacuous = g * 2.0 ** (-m) >= 1.0
    corr = key_correctness_bound(g, m)
    conf = epsilon1_confidence(eta, n, eps_p)
    return SuccessBound(0.0 if vacuous else corr * conf, corr, conf, vacuous)


@dataclass(frozen=True)
class ErrorBudget:
    eps_b: float
    eps_p: float
    eps_bp: float
    eps_b_c: float
    eta: float
    n: int
    g: int
    m: int
    n_s: int

    @property
    def eps_p_prime(self) -> float:
        return phase_update(self.eps_b, self.eps_p, self.eps_bp).upper_bound

    @property
    def eps_1(self) -> float:
        return self.eps_p_prime + self.eta

    @property
    def key_material_bits(self) -> int:
        return self.g * (self.n_s - self.m)

    def success_bound(self) -> SuccessBound:
        return success_lower_bound(self.g, self.m, self.eta, self.n, self.eps_p)
