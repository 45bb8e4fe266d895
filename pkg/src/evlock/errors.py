"""Domain errors shared across the locker's subsystems.

Every error carries a stable ``name`` (its class name) used verbatim by the
HTTP layer and the CLI exit-code contract.
"""

from __future__ import annotations


class LockerError(Exception):
    """Base class for all domain failures."""

    @property
    def name(self) -> str:
        return type(self).__name__


# crypto / envelope
class QuorumNotMet(LockerError):
    pass


class ShareInvalid(LockerError):
    pass


class IntegrityFailure(LockerError):
    pass


# content store
class EmptyContent(LockerError):
    pass


class InsufficientReplicas(LockerError):
    pass


class ContentUnavailable(LockerError):
    pass


class UnknownNode(LockerError):
    pass


class CertificateIncomplete(LockerError):
    pass


class AlreadyDeleted(LockerError):
    pass


# anchor chain
class FeeUnpaid(LockerError):
    pass


class PoolDepleted(LockerError):
    pass


class NotFound(LockerError):
    pass


# consortium ledger
class ReceiptInvalid(LockerError):
    pass


class DuplicateVote(LockerError):
    pass


class UnknownMember(LockerError):
    pass


class BadSignature(LockerError):
    pass


class RoleForbidden(LockerError):
    pass


# submission gateway
class EmptyEvidence(LockerError):
    pass


class TokenMismatch(LockerError):
    pass


class NegativeDuration(LockerError):
    pass


class NotAnchored(LockerError):
    pass


class AlreadyPublic(LockerError):
    pass
