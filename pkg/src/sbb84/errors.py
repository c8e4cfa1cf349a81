"""Protocol aborts.

Every abort carries the stage it happened in; ``run_session`` turns these
into an aborted ``SessionResult`` instead of letting them escape.
"""


class ProtocolAbort(Exception):
    stage = "protocol"

    def __init__(self, message: str = "", **details):
        super().__init__(message or type(self).__name__)
        self.details = details

    @property
    def reason(self) -> str:
        return type(self).__name__


class InsufficientSiftedBits(ProtocolAbort):
    stage = "sift"


class ImbalancedSift(ProtocolAbort):
    stage = "select"


class EmptyCheckSet(ProtocolAbort):
    stage = "estimate"


class CheckFailure(ProtocolAbort):
    stage = "estimate"


class RoundsExhausted(ProtocolAbort):
    stage = "reconcile"


class PopulationExhausted(ProtocolAbort):
    stage = "reconcile"


class TooFewBits(ProtocolAbort):
    stage = "reconcile"


class NoSubsetsAccepted(ProtocolAbort):
    stage = "verify"


class NoKeyCapacity(ProtocolAbort):
    stage = "privacy"
