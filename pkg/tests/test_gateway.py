"""Gateway pipeline: sealed submission, verdicts, disclosure, deletion."""

import json
import random

import pytest

from evlock.chain import FeeMode
from evlock.crypto import DeletionCertificate, digest
from evlock.errors import (
    AlreadyDeleted,
    AlreadyPublic,
    CertificateIncomplete,
    ContentUnavailable,
    EmptyEvidence,
    InsufficientReplicas,
    NegativeDuration,
    NotAnchored,
    NotFound,
    QuorumNotMet,
    TokenMismatch,
)
from evlock.gateway import IntegrityVerdict, SimClock, Visibility
from evlock.ledger import verify_trail
from evlock.node import DeskConfig, build_desk
from evlock.store import NodeState

MONTH_SECONDS = 31 * 24 * 3600  # 2,678,400


def make_desk(tmp_path, seed=0x51ED, fee="0", fee_mode=FeeMode.POOL_PAYS.value, **kwargs):
    config = DeskConfig(seed=seed, fee=fee, fee_mode=fee_mode, **kwargs)
    return build_desk(config, tmp_path)


class TestSimClock:
    def test_only_moves_forward(self):
        clock = SimClock(100)
        assert clock.now == 100
        assert clock.advance(15) == 115
        with pytest.raises(ValueError):
            clock.advance(0)
        with pytest.raises(ValueError):
            clock.advance(-5)
        assert clock.advance_to(200) == 200
        with pytest.raises(ValueError):
            clock.advance_to(200)


class TestSubmission:
    def test_pipeline_produces_coherent_receipt(self, tmp_path):
        desk = make_desk(tmp_path)
        content = b"ledger extract, march, signed by nobody"
        receipt = desk.gateway.submit_evidence(content)
        assert receipt.payload_digest == digest(content)
        assert len(receipt.release_token) == 32
        assert receipt.visibility == Visibility.SEALED
        assert desk.chain.verify_receipt(receipt.anchor)
        assert desk.ledger.has_record(receipt.address)
        assert desk.store.verify_replicas(receipt.address).all_match
        metadata = desk.ledger.record(receipt.address).metadata
        assert metadata["release_token_digest"] == digest(receipt.release_token).hex
        assert metadata["policy"] == {"k": 3, "n": 5}

    def test_sealed_bytes_do_not_leak_plaintext(self, tmp_path):
        desk = make_desk(tmp_path)
        content = b"THE SMOKING GUN PARAGRAPH"
        receipt = desk.gateway.submit_evidence(content)
        stored = desk.store.get(receipt.address)
        assert stored != content
        assert content not in stored

    def test_empty_submission_rejected(self, tmp_path):
        desk = make_desk(tmp_path)
        with pytest.raises(EmptyEvidence):
            desk.gateway.submit_evidence(b"")

    def test_too_few_live_nodes(self, tmp_path):
        desk = make_desk(tmp_path)
        for i in range(3):
            desk.store.set_node_state(f"node-{i}", NodeState.FAILED)
        with pytest.raises(InsufficientReplicas):
            desk.gateway.submit_evidence(b"nowhere to live")

    def test_seeded_runs_are_identical(self, tmp_path):
        r1 = make_desk(tmp_path / "a", seed=42).gateway.submit_evidence(b"same input")
        r2 = make_desk(tmp_path / "b", seed=42).gateway.submit_evidence(b"same input")
        assert r1.address == r2.address
        assert r1.release_token == r2.release_token
        assert r1.txid == r2.txid
        r3 = make_desk(tmp_path / "c", seed=43).gateway.submit_evidence(b"same input")
        assert r3.address != r1.address

    def test_sealed_resubmission_links_duplicate(self, tmp_path):
        desk = make_desk(tmp_path)
        content = b"submitted twice by two people"
        first = desk.gateway.submit_evidence(content)
        second = desk.gateway.submit_evidence(content)
        assert second.address != first.address  # fresh envelope each time
        assert second.duplicate_of == first.txid.hex
        assert first.duplicate_of is None

    def test_public_visibility_stores_plaintext(self, tmp_path):
        desk = make_desk(tmp_path)
        content = b"press release, already out there"
        receipt = desk.gateway.submit_evidence(content, visibility=Visibility.PUBLIC)
        assert receipt.address == digest(content)
        assert desk.store.get(receipt.address) == content
        assert desk.gateway.public_content(receipt.address) == content

    def test_public_resubmission_links_duplicate(self, tmp_path):
        desk = make_desk(tmp_path)
        content = b"same public bytes"
        first = desk.gateway.submit_evidence(content, visibility=Visibility.PUBLIC)
        second = desk.gateway.submit_evidence(content, visibility=Visibility.PUBLIC)
        assert second.address == first.address
        assert second.duplicate_of == first.txid.hex


class TestFullVerify:
    def test_intact_is_integrity_ok(self, tmp_path):
        desk = make_desk(tmp_path)
        receipt = desk.gateway.submit_evidence(b"intact")
        report = desk.gateway.full_verify(receipt.address)
        assert report.verdict == IntegrityVerdict.INTEGRITY_OK
        assert report.matches == 3
        assert report.anchored
        assert report.anchor_height == receipt.anchor.block_height

    def test_one_tampered_replica_is_flagged(self, tmp_path):
        desk = make_desk(tmp_path)
        receipt = desk.gateway.submit_evidence(b"about to be edited")
        victim = next(n.node_id for n in desk.store.nodes if n.holds(receipt.address))
        desk.store.tamper_replica(victim, receipt.address, 0, b"\x00")
        report = desk.gateway.full_verify(receipt.address)
        assert report.verdict == IntegrityVerdict.TAMPERED_REPLICAS
        assert report.matches == 2
        assert report.mismatches == 1

    def test_total_destruction_stays_provable(self, tmp_path):
        desk = make_desk(tmp_path)
        receipt = desk.gateway.submit_evidence(b"wiped everywhere")
        for node in desk.store.nodes:
            node.remove(receipt.address)
        report = desk.gateway.full_verify(receipt.address)
        assert report.verdict == IntegrityVerdict.DESTROYED_BUT_PROVABLE
        assert report.matches == 0
        assert report.anchored
        with pytest.raises(ContentUnavailable):
            desk.store.get(receipt.address)

    def test_unknown_address_is_unknown(self, tmp_path):
        desk = make_desk(tmp_path)
        report = desk.gateway.full_verify(digest(b"never submitted"))
        assert report.verdict == IntegrityVerdict.UNKNOWN
        assert not report.anchored


class TestDisclosure:
    def test_escalation_after_a_month_is_exact(self, tmp_path):
        desk = make_desk(tmp_path)
        content = b"held in escrow for one month"
        receipt = desk.gateway.submit_evidence(content)
        desk.clock.advance(MONTH_SECONDS)
        voter_ids = [m.member_id for m in desk.ledger.voters]
        shares = desk.shares_for(receipt.address, voter_ids[:3])
        disclosure = desk.gateway.escalate_to_public(
            receipt.address, receipt.release_token, shares, "court order 17"
        )
        assert disclosure.plaintext == content
        assert disclosure.withholding_seconds == MONTH_SECONDS
        assert desk.gateway.is_public(receipt.address)
        assert desk.gateway.public_content(receipt.address) == content
        trail = desk.ledger.audit_trail(receipt.address)
        assert trail.events[-1]["kind"] == "escalation"
        assert verify_trail(trail)

    def test_wrong_token_rejected(self, tmp_path):
        desk = make_desk(tmp_path)
        receipt = desk.gateway.submit_evidence(b"guarded")
        desk.clock.advance(60)
        voter_ids = [m.member_id for m in desk.ledger.voters]
        shares = desk.shares_for(receipt.address, voter_ids[:3])
        wrong = bytes(32)
        with pytest.raises(TokenMismatch):
            desk.gateway.escalate_to_public(receipt.address, wrong, shares, "bad token")
        assert not desk.gateway.is_public(receipt.address)

    def test_quorum_enforced_on_disclosure(self, tmp_path):
        desk = make_desk(tmp_path)
        receipt = desk.gateway.submit_evidence(b"needs three")
        desk.clock.advance(60)
        voter_ids = [m.member_id for m in desk.ledger.voters]
        shares = desk.shares_for(receipt.address, voter_ids[:2])
        with pytest.raises(QuorumNotMet):
            desk.gateway.escalate_to_public(
                receipt.address, receipt.release_token, shares, "short"
            )

    def test_already_public_cases(self, tmp_path):
        desk = make_desk(tmp_path)
        public = desk.gateway.submit_evidence(b"open", visibility=Visibility.PUBLIC)
        with pytest.raises(AlreadyPublic):
            desk.gateway.escalate_to_public(public.address, public.release_token, [], "again")
        sealed = desk.gateway.submit_evidence(b"opened once")
        desk.clock.advance(60)
        voter_ids = [m.member_id for m in desk.ledger.voters]
        shares = desk.shares_for(sealed.address, voter_ids[:3])
        desk.gateway.escalate_to_public(sealed.address, sealed.release_token, shares, "first")
        with pytest.raises(AlreadyPublic):
            desk.gateway.escalate_to_public(sealed.address, sealed.release_token, shares, "second")

    def test_escalating_unknown_address(self, tmp_path):
        desk = make_desk(tmp_path)
        with pytest.raises(NotFound):
            desk.gateway.escalate_to_public(digest(b"ghost"), bytes(32), [], "none")

    def test_withholding_duration_bounds(self, tmp_path):
        desk = make_desk(tmp_path)
        receipt = desk.gateway.submit_evidence(b"timed")
        anchor_ts = receipt.anchor.block_timestamp
        assert desk.gateway.withholding_duration(receipt.address, anchor_ts + 500) == 500
        assert desk.gateway.withholding_duration(receipt.address, anchor_ts) == 0
        with pytest.raises(NegativeDuration):
            desk.gateway.withholding_duration(receipt.address, anchor_ts - 1)
        with pytest.raises(NotAnchored):
            desk.gateway.withholding_duration(digest(b"nowhere"))


class TestDeletionAndOutcome:
    def test_full_deletion_is_anchored_and_mirrored(self, tmp_path):
        desk = make_desk(tmp_path)
        receipt = desk.gateway.submit_evidence(b"expunged at end of case")
        cert = desk.sign_full_deletion(receipt.address, digest(b"final order"))
        applied = desk.gateway.apply_deletion(cert)
        assert len(applied.outcome.removed_from) == 3
        assert desk.chain.tx_in_block(applied.txid).kind == "deletion"
        with pytest.raises(ContentUnavailable):
            desk.store.get(receipt.address)
        trail = desk.ledger.audit_trail(receipt.address)
        assert trail.events[-1]["kind"] == "deletion"
        assert verify_trail(trail)
        deletion_txs = [
            t for b in desk.chain.blocks() for t in b.txs if t.kind == "deletion"
        ]
        assert len(deletion_txs) == 1
        assert deletion_txs[0].payload["address"] == receipt.address.hex
        with pytest.raises(AlreadyDeleted):
            desk.gateway.apply_deletion(cert)

    def test_partial_certificate_refused(self, tmp_path):
        desk = make_desk(tmp_path)
        receipt = desk.gateway.submit_evidence(b"protected")
        cert = DeletionCertificate(
            address=receipt.address, court_order_digest=digest(b"half an order")
        )
        for key in desk.member_keys[:4]:
            cert = cert.with_signature(key)
        with pytest.raises(CertificateIncomplete):
            desk.gateway.apply_deletion(cert)
        assert desk.store.get(receipt.address)

    def test_outcome_link(self, tmp_path):
        desk = make_desk(tmp_path)
        receipt = desk.gateway.submit_evidence(b"decided")
        txid = desk.gateway.link_outcome(receipt.address, "C-2024-17", digest(b"ruling pdf"))
        tx = desk.chain.tx_in_block(txid)
        assert tx.payload["case_ref"] == "C-2024-17"
        trail = desk.ledger.audit_trail(receipt.address)
        assert trail.events[-1]["kind"] == "outcome"


class TestFunding:
    def test_one_shot_accounts_are_fresh_and_unlinkable(self, tmp_path):
        desk = make_desk(
            tmp_path, fee="1.85", fee_mode=FeeMode.SUBMITTER_PAYS.value
        )
        r1 = desk.gateway.submit_evidence(b"paid one")
        r2 = desk.gateway.submit_evidence(b"paid two")
        accounts = list(desk.chain._accounts)
        assert len(accounts) == 2
        assert accounts[0] != accounts[1]
        assert all(desk.chain.account_balance(a) == 0 for a in accounts)
        member_ids = {m.member_id for m in desk.ledger.members}
        for account in accounts:
            assert not any(mid[:16] in account for mid in member_ids)
        assert r1.address != r2.address


class TestAnonymityHygiene:
    def test_persisted_artifacts_hold_no_identity_or_token(self, tmp_path):
        desk = make_desk(tmp_path)
        content = b"whistle, blown"
        receipt = desk.gateway.submit_evidence(content)
        token_hex = receipt.release_token.hex()
        blobs = [
            json.dumps(desk.ledger.audit_trail(receipt.address).to_dict()),
            json.dumps(desk.ledger.record(receipt.address).metadata),
            json.dumps([b.to_dict() for b in desk.chain.blocks()]),
        ]
        for node in desk.store.nodes:
            for path in node.root.iterdir():
                blobs.append(path.read_bytes().hex())
        joined = "\n".join(blobs)
        assert token_hex not in joined
        assert content.hex() not in joined
        assert digest(receipt.release_token).hex in joined
