"""Consortium-side ledger: mirrored anchors, signed votes, audit trails.

Each member organisation runs one of these. A record is only mirrored after
its anchor receipt checks out against the public chain, so the ledger can
never hold an entry the chain does not vouch for. Votes are Ed25519-signed
statements over (address, decision, rationale); the tally reaches a verdict
when either side hits the quorum, earliest quorum winning, and stays there.

Every record keeps an append-only event list threaded through a digest
chain: each link hashes the previous link plus the canonical event bytes,
so reordering, dropping, or editing any past event breaks every later link.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .chain import AnchorChain, AnchorReceipt, ChainTx
from .crypto import Digest, KeyPair, canonical_json_bytes, digest, sign, verify_sig
from .errors import (
    BadSignature,
    DuplicateVote,
    NotFound,
    ReceiptInvalid,
    RoleForbidden,
    UnknownMember,
)

TRAIL_SEED = Digest(bytes(32))


class MemberRole(str, Enum):
    VOTER = "Voter"
    OBSERVER = "Observer"


class VoteDecision(str, Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


class VetStatus(str, Enum):
    PENDING = "Pending"
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class Member:
    member_id: str
    display_name: str
    role: MemberRole
    public_key: bytes

    def to_dict(self) -> dict:
        return {
            "member_id": self.member_id,
            "display_name": self.display_name,
            "role": self.role.value,
        }


def vote_message(address: Digest, decision: VoteDecision, rationale: str) -> bytes:
    """Exact bytes a member signs; anyone can rebuild them to check a vote."""
    return canonical_json_bytes(
        {
            "action": "vet-vote",
            "address": address.hex,
            "decision": decision.value,
            "rationale": rationale,
        }
    )


@dataclass(frozen=True)
class Vote:
    member_id: str
    decision: VoteDecision
    rationale: str
    signature: bytes

    @classmethod
    def create(
        cls, member: KeyPair, address: Digest, decision: VoteDecision, rationale: str
    ) -> "Vote":
        sig = sign(vote_message(address, decision, rationale), member)
        return cls(
            member_id=member.key_id,
            decision=decision,
            rationale=rationale,
            signature=sig,
        )


@dataclass(frozen=True)
class TallyResult:
    status: VetStatus
    accepts: int
    rejects: int
    quorum: int

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "accepts": self.accepts,
            "rejects": self.rejects,
            "quorum": self.quorum,
        }


def tally_votes(decisions: Sequence[VoteDecision], quorum: int) -> TallyResult:
    """Walk votes in cast order; the first side to reach quorum settles it."""
    accepts = rejects = 0
    status = VetStatus.PENDING
    for decision in decisions:
        if decision == VoteDecision.ACCEPT:
            accepts += 1
        else:
            rejects += 1
        if status == VetStatus.PENDING:
            if accepts >= quorum:
                status = VetStatus.ACCEPTED
            elif rejects >= quorum:
                status = VetStatus.REJECTED
    return TallyResult(status=status, accepts=accepts, rejects=rejects, quorum=quorum)


@dataclass(frozen=True)
class AuditTrail:
    address: Digest
    events: tuple[dict, ...]
    links: tuple[Digest, ...]
    status: VetStatus

    def to_dict(self) -> dict:
        return {
            "address": self.address.hex,
            "events": list(self.events),
            "links": [l.hex for l in self.links],
            "status": self.status.value,
        }


def verify_trail(trail: AuditTrail) -> bool:
    """Recompute the digest chain from scratch; any edit breaks it."""
    if len(trail.events) != len(trail.links):
        return False
    prev = TRAIL_SEED
    for event, link in zip(trail.events, trail.links):
        prev = digest(prev.data + canonical_json_bytes(event))
        if prev != link:
            return False
    return True


@dataclass
class LedgerRecord:
    address: Digest
    metadata: dict
    receipt: AnchorReceipt
    events: list[dict] = field(default_factory=list)
    links: list[Digest] = field(default_factory=list)
    votes: list[Vote] = field(default_factory=list)

    def append_event(self, event: dict) -> None:
        prev = self.links[-1] if self.links else TRAIL_SEED
        self.events.append(event)
        self.links.append(digest(prev.data + canonical_json_bytes(event)))


class ConsortiumLedger:
    """Shared vetting state for one consortium, mirrored off the anchor chain."""

    def __init__(self, members: Sequence[Member], quorum: int, chain: AnchorChain) -> None:
        if quorum < 1:
            raise ValueError("quorum must be at least 1")
        voters = [m for m in members if m.role == MemberRole.VOTER]
        if quorum > len(voters):
            raise ValueError(
                f"quorum {quorum} exceeds the {len(voters)} voting members"
            )
        self._members = {m.member_id: m for m in members}
        if len(self._members) != len(list(members)):
            raise ValueError("member ids must be unique")
        self.quorum = quorum
        self._chain = chain
        self._records: dict[Digest, LedgerRecord] = {}

    # -- roster --------------------------------------------------------------

    @property
    def members(self) -> list[Member]:
        return list(self._members.values())

    @property
    def voters(self) -> list[Member]:
        return [m for m in self._members.values() if m.role == MemberRole.VOTER]

    def member(self, member_id: str) -> Member:
        try:
            return self._members[member_id]
        except KeyError:
            raise UnknownMember(f"no such member: {member_id}") from None

    def deletion_roster(self) -> dict[str, bytes]:
        # All-party deletion means every member signs, observers included.
        return {m.member_id: m.public_key for m in self._members.values()}

    # -- records -------------------------------------------------------------

    def mirror_entry(self, metadata: dict, receipt: AnchorReceipt) -> LedgerRecord:
        """Admit a record only once its anchor verifies against the chain."""
        self._chain.verify_receipt(receipt)
        expected = ChainTx(kind="commit", payload=metadata).txid
        if expected != receipt.txid:
            raise ReceiptInvalid("metadata does not hash to the anchored transaction")
        address = Digest.from_hex(metadata["address"])
        existing = self._records.get(address)
        if existing is not None:
            return existing
        record = LedgerRecord(address=address, metadata=dict(metadata), receipt=receipt)
        record.append_event(
            {
                "kind": "mirror",
                "address": address.hex,
                "txid": receipt.txid.hex,
                "block_height": receipt.block_height,
                "block_timestamp": receipt.block_timestamp,
            }
        )
        self._records[address] = record
        return record

    def has_record(self, address: Digest) -> bool:
        return address in self._records

    def record(self, address: Digest) -> LedgerRecord:
        try:
            return self._records[address]
        except KeyError:
            raise NotFound(f"no ledger record for {address.hex[:12]}") from None

    def addresses(self) -> list[Digest]:
        return list(self._records.keys())

    # -- voting --------------------------------------------------------------

    def cast_vote(self, address: Digest, vote: Vote) -> TallyResult:
        record = self.record(address)
        member = self.member(vote.member_id)
        if member.role != MemberRole.VOTER:
            raise RoleForbidden(f"{member.display_name} holds no voting seat")
        if any(v.member_id == vote.member_id for v in record.votes):
            raise DuplicateVote(f"{member.display_name} already voted on this record")
        message = vote_message(address, vote.decision, vote.rationale)
        if not verify_sig(message, vote.signature, member.public_key):
            raise BadSignature("vote signature does not verify against the member key")
        record.votes.append(vote)
        record.append_event(
            {
                "kind": "vote",
                "member_id": vote.member_id,
                "decision": vote.decision.value,
                "rationale": vote.rationale,
                "signature": vote.signature.hex(),
            }
        )
        return self.tally(address)

    def tally(self, address: Digest) -> TallyResult:
        record = self.record(address)
        return tally_votes([v.decision for v in record.votes], self.quorum)

    # -- lifecycle events ----------------------------------------------------

    def record_deletion(
        self, address: Digest, court_order_digest: Digest, signers: Sequence[str], txid: Digest
    ) -> None:
        record = self.record(address)
        record.append_event(
            {
                "kind": "deletion",
                "court_order": court_order_digest.hex,
                "signers": sorted(signers),
                "txid": txid.hex,
            }
        )

    def record_escalation(self, address: Digest, reason: str, txid: Optional[Digest]) -> None:
        record = self.record(address)
        record.append_event(
            {
                "kind": "escalation",
                "reason": reason,
                "txid": txid.hex if txid else None,
            }
        )

    def record_outcome(
        self, address: Digest, case_ref: str, outcome_digest: Digest, txid: Digest
    ) -> None:
        record = self.record(address)
        record.append_event(
            {
                "kind": "outcome",
                "case_ref": case_ref,
                "outcome_digest": outcome_digest.hex,
                "txid": txid.hex,
            }
        )

    # -- audit ---------------------------------------------------------------

    def audit_trail(self, address: Digest) -> AuditTrail:
        record = self.record(address)
        return AuditTrail(
            address=address,
            events=tuple(dict(e) for e in record.events),
            links=tuple(record.links),
            status=self.tally(address).status,
        )
