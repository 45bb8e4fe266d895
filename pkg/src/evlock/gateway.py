"""Submission gateway: the one pipeline from raw bytes to anchored evidence.

A submission carries no identity. The gateway encrypts the content for the
consortium, replicates the sealed envelope, anchors its metadata digestwise
on the public chain, and mirrors the anchored entry into the vetting
ledger. The submitter walks away with a receipt and a one-time release
token; the token's digest sits in the anchored metadata, so whoever later
presents the token provably held it since before the anchor block.

Disclosure runs the other way: a quorum of member key shares opens the
envelope, the disclosure is anchored, and the gap between anchor time and
disclosure time becomes the provable withholding duration.

Time is simulated. The clock only moves when told to, which keeps every
run reproducible down to the block timestamps.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Optional, Sequence

from .chain import AnchorChain, AnchorReceipt, FeeMode
from .crypto import (
    DeletionCertificate,
    Digest,
    EncryptedEnvelope,
    ThresholdPolicy,
    decrypt_with_quorum,
    digest,
    encrypt_for_consortium,
    _rand_bytes,
)
from .errors import (
    AlreadyPublic,
    EmptyEvidence,
    InsufficientReplicas,
    NegativeDuration,
    NotAnchored,
    NotFound,
    TokenMismatch,
)
from .ledger import ConsortiumLedger
from .store import DeletionOutcome, NodeState, ReplicaStatus, ReplicatedStore


class SimClock:
    """Monotone simulated clock; nothing in the system reads wall time."""

    def __init__(self, start: int = 1_700_000_000) -> None:
        self._now = int(start)

    @property
    def now(self) -> int:
        return self._now

    def advance(self, seconds: int) -> int:
        if seconds <= 0:
            raise ValueError("clock only moves forward")
        self._now += int(seconds)
        return self._now

    def advance_to(self, value: int) -> int:
        if value <= self._now:
            raise ValueError("clock only moves forward")
        self._now = int(value)
        return self._now


class Visibility(str, Enum):
    SEALED = "Sealed"
    PUBLIC = "Public"


class IntegrityVerdict(str, Enum):
    INTEGRITY_OK = "IntegrityOk"
    TAMPERED_REPLICAS = "TamperedReplicas"
    DESTROYED_BUT_PROVABLE = "DestroyedButProvable"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class SubmissionReceipt:
    """Handed back to the submitter, shown exactly once.

    ``release_token`` never leaves this object into any stored artifact;
    only its digest is anchored.
    """

    address: Digest
    payload_digest: Digest
    release_token: bytes
    txid: Digest
    anchor: AnchorReceipt
    visibility: Visibility
    duplicate_of: Optional[str]

    def to_dict(self) -> dict:
        return {
            "address": self.address.hex,
            "payload_digest": self.payload_digest.hex,
            "release_token": self.release_token.hex(),
            "txid": self.txid.hex,
            "anchor": self.anchor.to_dict(),
            "visibility": self.visibility.value,
            "duplicate_of": self.duplicate_of,
        }


@dataclass(frozen=True)
class IntegrityReport:
    address: Digest
    verdict: IntegrityVerdict
    matches: int
    mismatches: int
    missing: int
    unreachable: int
    anchored: bool
    anchor_height: Optional[int]
    checked_at: int

    def to_dict(self) -> dict:
        return {
            "address": self.address.hex,
            "verdict": self.verdict.value,
            "matches": self.matches,
            "mismatches": self.mismatches,
            "missing": self.missing,
            "unreachable": self.unreachable,
            "anchored": self.anchored,
            "anchor_height": self.anchor_height,
            "checked_at": self.checked_at,
        }


@dataclass(frozen=True)
class AppliedDeletion:
    outcome: DeletionOutcome
    txid: Digest


@dataclass(frozen=True)
class Disclosure:
    address: Digest
    plaintext: bytes
    disclosed_at: int
    withholding_seconds: int
    txid: Digest


@dataclass
class _GatewayRecord:
    metadata: dict
    txid: Digest
    receipt: AnchorReceipt
    visibility: Visibility
    public: bool
    disclosed_at: Optional[int] = None
    plaintext: Optional[bytes] = None


class EvidenceGateway:
    def __init__(
        self,
        store: ReplicatedStore,
        chain: AnchorChain,
        ledger: ConsortiumLedger,
        clock: SimClock,
        rng: Optional[random.Random] = None,
        block_interval: int = 15,
        replication: Optional[int] = None,
        threshold_k: Optional[int] = None,
    ) -> None:
        self.store = store
        self.chain = chain
        self.ledger = ledger
        self.clock = clock
        self.rng = rng
        self.block_interval = block_interval
        self.replication = replication or store.default_replication
        self.threshold_k = threshold_k
        self._records: dict[Digest, _GatewayRecord] = {}
        self._first_payload_tx: dict[Digest, Digest] = {}

    # -- funding -------------------------------------------------------------

    def _funding_account(self) -> Optional[str]:
        if self.chain.fee_policy.mode != FeeMode.SUBMITTER_PAYS:
            return None
        # One-shot account: a random unlinkable id funded with exactly one
        # fee, standing in for the submitter's own throwaway wallet.
        account = "drop-" + _rand_bytes(self.rng, 8).hex()
        self.chain.fund_account(account, self.chain.fee_policy.fee)
        return account

    # -- submission ----------------------------------------------------------

    def default_policy(self) -> ThresholdPolicy:
        k = self.threshold_k if self.threshold_k is not None else self.ledger.quorum
        return ThresholdPolicy(k=k, n=len(self.ledger.voters))

    def _voter_keys(self) -> list[bytes]:
        return [m.public_key for m in self.ledger.voters]

    def submit_evidence(
        self,
        content: bytes,
        policy: Optional[ThresholdPolicy] = None,
        visibility: Visibility = Visibility.SEALED,
    ) -> SubmissionReceipt:
        """Seal, replicate, anchor, mirror; returns the one-time receipt."""
        if not content:
            raise EmptyEvidence("refusing an empty submission")
        live = sum(1 for n in self.store.nodes if n.state == NodeState.LIVE)
        if live < self.replication:
            raise InsufficientReplicas(f"need {self.replication} live nodes, have {live}")
        payload_digest = digest(content)
        if visibility == Visibility.SEALED:
            policy = policy or self.default_policy()
            envelope = encrypt_for_consortium(content, self._voter_keys(), policy, self.rng)
            stored_bytes = envelope.to_bytes()
        else:
            policy = None
            stored_bytes = content
        address = digest(stored_bytes)
        release_token = _rand_bytes(self.rng, 32)
        metadata = {
            "address": address.hex,
            "payload_digest": payload_digest.hex,
            "release_token_digest": digest(release_token).hex,
            "visibility": visibility.value,
            "submitted_at": self.clock.now,
        }
        if policy is not None:
            metadata["policy"] = {"k": policy.k, "n": policy.n}
        prior = self._first_payload_tx.get(payload_digest)
        if prior is not None:
            metadata["duplicate_of"] = prior.hex

        account = self._funding_account()
        txid = self.chain.submit_commit(metadata, account)
        self.store.put(stored_bytes, self.replication)
        self.clock.advance(self.block_interval)
        self.chain.produce_block(self.clock.now)
        receipt = self.chain.receipt_for(txid)
        anchored_payload = self.chain.tx_in_block(txid).payload
        self.ledger.mirror_entry(anchored_payload, receipt)

        self._first_payload_tx.setdefault(payload_digest, txid)
        self._records[address] = _GatewayRecord(
            metadata=anchored_payload,
            txid=txid,
            receipt=receipt,
            visibility=visibility,
            public=(visibility == Visibility.PUBLIC),
            plaintext=content if visibility == Visibility.PUBLIC else None,
        )
        return SubmissionReceipt(
            address=address,
            payload_digest=payload_digest,
            release_token=release_token,
            txid=txid,
            anchor=receipt,
            visibility=visibility,
            duplicate_of=anchored_payload.get("duplicate_of"),
        )

    # -- lookup --------------------------------------------------------------

    def record_for(self, address: Digest) -> _GatewayRecord:
        try:
            return self._records[address]
        except KeyError:
            raise NotFound(f"no evidence record for {address.hex[:12]}") from None

    def addresses(self) -> list[Digest]:
        return list(self._records.keys())

    def is_public(self, address: Digest) -> bool:
        return self.record_for(address).public

    def public_content(self, address: Digest) -> bytes:
        record = self.record_for(address)
        if not record.public or record.plaintext is None:
            raise NotFound(f"{address.hex[:12]} is not public")
        return record.plaintext

    # -- verification --------------------------------------------------------

    def full_verify(self, address: Digest) -> IntegrityReport:
        """Replica audit plus anchor check, condensed to one verdict."""
        report = self.store.verify_replicas(address)
        matches = len(report.nodes_with(ReplicaStatus.MATCH))
        mismatches = len(report.nodes_with(ReplicaStatus.MISMATCH))
        missing = len(report.nodes_with(ReplicaStatus.MISSING))
        unreachable = len(report.nodes_with(ReplicaStatus.UNREACHABLE))
        record = self._records.get(address)
        anchored = False
        anchor_height = None
        if record is not None:
            try:
                anchored = self.chain.verify_receipt(record.receipt)
                anchor_height = record.receipt.block_height
            except Exception:
                anchored = False
        if matches >= 1 and mismatches == 0:
            verdict = IntegrityVerdict.INTEGRITY_OK
        elif matches >= 1:
            verdict = IntegrityVerdict.TAMPERED_REPLICAS
        elif anchored:
            verdict = IntegrityVerdict.DESTROYED_BUT_PROVABLE
        else:
            verdict = IntegrityVerdict.UNKNOWN
        return IntegrityReport(
            address=address,
            verdict=verdict,
            matches=matches,
            mismatches=mismatches,
            missing=missing,
            unreachable=unreachable,
            anchored=anchored,
            anchor_height=anchor_height,
            checked_at=self.clock.now,
        )

    # -- disclosure ----------------------------------------------------------

    def withholding_duration(self, address: Digest, at: Optional[int] = None) -> int:
        """Seconds between the anchor block and ``at`` (now by default)."""
        record = self._records.get(address)
        if record is None:
            raise NotAnchored(f"{address.hex[:12]} has no anchor here")
        when = self.clock.now if at is None else at
        duration = when - record.receipt.block_timestamp
        if duration < 0:
            raise NegativeDuration(
                f"disclosure time {when} precedes anchor block {record.receipt.block_timestamp}"
            )
        return duration

    def escalate_to_public(
        self,
        address: Digest,
        release_token: bytes,
        shares: Sequence[tuple[str, bytes]],
        reason: str,
    ) -> Disclosure:
        """Open the envelope with a quorum of shares and anchor the disclosure."""
        record = self.record_for(address)
        if record.public:
            raise AlreadyPublic(f"{address.hex[:12]} is already public")
        expected = record.metadata.get("release_token_digest")
        if digest(release_token).hex != expected:
            raise TokenMismatch("release token does not match the anchored digest")
        envelope = EncryptedEnvelope.from_bytes(self.store.get(address))
        plaintext = decrypt_with_quorum(envelope, shares)
        disclosed_at = self.clock.now
        withheld = self.withholding_duration(address, disclosed_at)
        account = self._funding_account()
        txid = self.chain.submit(
            "escalation",
            {
                "address": address.hex,
                "payload_digest": digest(plaintext).hex,
                "reason": reason,
                "disclosed_at": disclosed_at,
                "withholding_seconds": withheld,
            },
            account,
        )
        self.clock.advance(self.block_interval)
        self.chain.produce_block(self.clock.now)
        self.ledger.record_escalation(address, reason, txid)
        record.public = True
        record.disclosed_at = disclosed_at
        record.plaintext = plaintext
        return Disclosure(
            address=address,
            plaintext=plaintext,
            disclosed_at=disclosed_at,
            withholding_seconds=withheld,
            txid=txid,
        )

    # -- deletion and outcome ------------------------------------------------

    def apply_deletion(self, cert: DeletionCertificate) -> AppliedDeletion:
        """Certificate-gated full removal, anchored and mirrored."""
        outcome = self.store.delete_content(cert.address, cert)
        account = self._funding_account()
        txid = self.chain.submit_deletion(
            cert.address.hex,
            cert.court_order_digest.hex,
            sorted(kid for kid, _ in cert.signatures),
            account,
        )
        self.clock.advance(self.block_interval)
        self.chain.produce_block(self.clock.now)
        if self.ledger.has_record(cert.address):
            self.ledger.record_deletion(
                cert.address,
                cert.court_order_digest,
                sorted(kid for kid, _ in cert.signatures),
                txid,
            )
        record = self._records.get(cert.address)
        if record is not None:
            record.plaintext = None
        return AppliedDeletion(outcome=outcome, txid=txid)

    def link_outcome(self, address: Digest, case_ref: str, outcome_digest: Digest) -> Digest:
        record = self.record_for(address)
        account = self._funding_account()
        txid = self.chain.submit_outcome_link(
            address.hex, case_ref, outcome_digest.hex, account
        )
        self.clock.advance(self.block_interval)
        self.chain.produce_block(self.clock.now)
        self.ledger.record_outcome(address, case_ref, outcome_digest, txid)
        return txid
