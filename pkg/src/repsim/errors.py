"""Exception hierarchy shared by every layer of the package.

Each error carries a short machine-readable ``code`` so that protocol
entities can turn a raised exception into an ``Error`` message on the wire
and the auditor can match on it later.
"""


class ReputationError(Exception):
    code = "Error"


# -- homomorphic layer -------------------------------------------------------

class InvalidParams(ReputationError, ValueError):
    code = "InvalidParams"


class KeyMismatch(ReputationError):
    code = "KeyMismatch"


class UnknownKey(ReputationError):
    code = "UnknownKey"


class VectorTooLong(ReputationError, ValueError):
    code = "VectorTooLong"


class LengthMismatch(ReputationError, ValueError):
    code = "LengthMismatch"


class DepthExhausted(ReputationError):
    code = "DepthExhausted"


class CorruptedCiphertext(ReputationError):
    code = "CorruptedCiphertext"


class BackendUnavailable(ReputationError):
    code = "BackendUnavailable"


# -- identity fabric ---------------------------------------------------------

class DuplicateRegistration(ReputationError):
    code = "Duplicate"


class UnknownBusiness(ReputationError):
    code = "Unknown"


class SelfContract(ReputationError, ValueError):
    code = "SelfContract"


class UnknownTicket(ReputationError):
    code = "UnknownTicket"


class AlreadySpent(ReputationError):
    code = "AlreadySpent"


class TicketExpired(ReputationError):
    code = "TicketExpired"


class ExpiredPseudonym(ReputationError):
    code = "ExpiredPseudonym"


class InvalidPseudonym(ReputationError):
    code = "InvalidPseudonym"


class UnknownToken(ReputationError):
    code = "UnknownToken"


class AlreadyRedeemed(ReputationError):
    code = "AlreadyRedeemed"


# -- reputation algebra ------------------------------------------------------

class EmptyState(ReputationError):
    code = "EmptyState"


class EmptyHistory(ReputationError, ValueError):
    code = "EmptyHistory"


# -- protocol ----------------------------------------------------------------

class UnknownSession(ReputationError):
    code = "UnknownSession"


class MalformedMessage(ReputationError, ValueError):
    code = "MalformedMessage"


class NoEngines(ReputationError, ValueError):
    code = "NoEngines"


class SignatureRejected(ReputationError):
    code = "SignatureRejected"


class UnknownVotee(ReputationError):
    code = "UnknownVotee"


class DepthViolation(ReputationError):
    code = "DepthViolation"


class StaleVersion(ReputationError):
    code = "StaleVersion"


# -- harness -----------------------------------------------------------------

class ScenarioError(ReputationError, ValueError):
    """Schema or referential problem in a scenario file.

    ``path`` points at the offending field (``events[3].votee``) and
    ``line`` at the source line when it can be recovered.
    """

    code = "ScenarioError"

    def __init__(self, message, path="", line=None):
        self.path = path
        self.line = line
        where = path
        if line is not None:
            where = f"{path} (line {line})" if path else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class DanglingRating(ScenarioError):
    code = "DanglingRating"


class LogError(ReputationError, ValueError):
    code = "LogError"


class TruncatedLog(LogError):
    code = "TruncatedLog"


class GapDetected(LogError):
    code = "GapDetected"


class OrderViolation(LogError):
    code = "OrderViolation"


class ScenarioMismatch(LogError):
    code = "ScenarioMismatch"
