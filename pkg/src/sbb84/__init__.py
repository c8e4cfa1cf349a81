"""Simplified BB84: Pauli-channel simulation, crude pairing reconciliation,
parity-string verification and coset-label key extraction."""

from .analysis import (
    epsilon1_confidence,
    key_correctness_bound,
    phase_update,
    subset_discard_prob,
    success_lower_bound,
)
from .gf2 import BitMatrix, BitVec, dot, mat_vec, parity, parity_check_of, rank
from .qsim import Basis, ChannelParams, InterceptResend, Pauli, QubitState
from .session import ProtocolConfig, SessionResult, replay_key, run_session
from .transcript import SeedStreams, SessionTranscript

__all__ = [
    "Basis",
    "BitMatrix",
    "BitVec",
    "ChannelParams",
    "InterceptResend",
    "Pauli",
    "ProtocolConfig",
    "QubitState",
    "SeedStreams",
    "SessionResult",
    "SessionTranscript",
    "dot",
    "epsilon1_confidence",
    "key_correctness_bound",
    "mat_vec",
    "parity",
    "parity_check_of",
    "phase_update",
    "rank",
    "replay_key",
    "run_session",
    "subset_discard_prob",
    "success_lower_bound",
]
