"""Anchor chain: Merkle proofs, monotone blocks, exact fee settlement."""

import hashlib
import random
from decimal import Decimal

import pytest

from evlock.chain import (
    ZERO_DIGEST,
    AnchorChain,
    AnchorReceipt,
    FeeMode,
    FeePolicy,
    merkle_path,
    merkle_root,
    verify_path,
)
from evlock.crypto import Digest, digest
from evlock.errors import FeeUnpaid, NotFound, PoolDepleted, ReceiptInvalid


def oracle_root(leaves):
    # Independent recursive construction straight from hashlib: pair up,
    # duplicate an odd tail, hash left+right.
    if not leaves:
        return Digest(hashlib.sha256(b"").digest())
    if len(leaves) == 1:
        return leaves[0]
    if len(leaves) % 2:
        leaves = leaves + [leaves[-1]]
    parents = [
        Digest(hashlib.sha256(leaves[i].data + leaves[i + 1].data).digest())
        for i in range(0, len(leaves), 2)
    ]
    return oracle_root(parents)


def make_chain(fee="0", mode=FeeMode.POOL_PAYS, log_path=None):
    return AnchorChain(fee_policy=FeePolicy(mode, Decimal(fee)), log_path=log_path)


class TestMerkle:
    def test_matches_independent_oracle_for_all_small_sizes(self):
        rng = random.Random(0xE0)
        for size in range(17):
            leaves = [digest(rng.randbytes(24)) for _ in range(size)]
            assert merkle_root(leaves) == oracle_root(leaves)

    def test_every_leaf_proves_inclusion(self):
        rng = random.Random(0xE1)
        for size in range(1, 13):
            leaves = [digest(rng.randbytes(16)) for _ in range(size)]
            root = merkle_root(leaves)
            for i, leaf in enumerate(leaves):
                path = merkle_path(leaves, i)
                assert verify_path(leaf, i, path, root)

    def test_wrong_index_or_sibling_fails(self):
        rng = random.Random(0xE2)
        leaves = [digest(rng.randbytes(16)) for _ in range(7)]
        root = merkle_root(leaves)
        path = merkle_path(leaves, 3)
        assert not verify_path(leaves[3], 2, path, root)
        bad_path = [digest(b"forged")] + path[1:]
        assert not verify_path(leaves[3], 3, bad_path, root)
        assert not verify_path(digest(b"not a leaf"), 3, path, root)

    def test_single_leaf_root_is_the_leaf(self):
        leaf = digest(b"only one")
        assert merkle_root([leaf]) == leaf
        assert merkle_path([leaf], 0) == []
        assert verify_path(leaf, 0, [], leaf)


class TestBlocks:
    def test_genesis_shape(self):
        chain = make_chain()
        genesis = chain.block_at(0)
        assert genesis.height == 0
        assert genesis.parent == ZERO_DIGEST
        assert genesis.txs == ()
        assert chain.height == 0

    def test_blocks_link_and_validate(self):
        chain = make_chain()
        chain.submit("commit", {"address": digest(b"ev1").hex})
        chain.produce_block(15)
        chain.submit("commit", {"address": digest(b"ev2").hex})
        chain.submit("outcome-link", {"address": digest(b"ev1").hex, "case_ref": "C-1"})
        chain.produce_block(30)
        assert chain.height == 2
        assert chain.block_at(2).parent == chain.block_at(1).header_digest
        assert chain.validate() == []

    def test_timestamps_strictly_increase(self):
        chain = make_chain()
        chain.produce_block(10)
        with pytest.raises(ValueError):
            chain.produce_block(10)
        with pytest.raises(ValueError):
            chain.produce_block(9)
        chain.produce_block(11)

    def test_validation_catches_in_place_edits(self):
        chain = make_chain()
        chain.submit("commit", {"address": digest(b"x").hex})
        chain.produce_block(15)
        chain.produce_block(30)
        good = chain.block_at(1)
        forged = type(good)(
            height=good.height,
            parent=good.parent,
            timestamp=good.timestamp,
            merkle_root=digest(b"rewritten history"),
            txs=good.txs,
        )
        chain._blocks[1] = forged
        problems = chain.validate()
        assert any("merkle root" in p for p in problems)
        assert any("parent link" in p for p in problems)

    def test_block_at_out_of_range(self):
        chain = make_chain()
        with pytest.raises(NotFound):
            chain.block_at(5)
        with pytest.raises(NotFound):
            chain.block_at(-1)


class TestReceipts:
    def test_receipt_round_trip_and_verify(self):
        chain = make_chain()
        txids = [
            chain.submit("commit", {"address": digest(f"ev{i}".encode()).hex})
            for i in range(5)
        ]
        chain.produce_block(15)
        for txid in txids:
            receipt = chain.receipt_for(txid)
            assert chain.verify_receipt(receipt)
            again = AnchorReceipt.from_dict(receipt.to_dict())
            assert chain.verify_receipt(again)

    def test_tampered_receipt_rejected(self):
        chain = make_chain()
        txid = chain.submit("commit", {"address": digest(b"ev").hex})
        other = chain.submit("commit", {"address": digest(b"other").hex})
        chain.produce_block(15)
        receipt = chain.receipt_for(txid)
        wrong_tx = AnchorReceipt(
            txid=other,
            block_height=receipt.block_height,
            block_digest=receipt.block_digest,
            block_timestamp=receipt.block_timestamp,
            merkle_root=receipt.merkle_root,
            tx_index=receipt.tx_index,
            siblings=receipt.siblings,
        )
        with pytest.raises(ReceiptInvalid):
            chain.verify_receipt(wrong_tx)
        wrong_height = AnchorReceipt.from_dict({**receipt.to_dict(), "block_height": 99})
        with pytest.raises(ReceiptInvalid):
            chain.verify_receipt(wrong_height)

    def test_unmined_tx_has_no_receipt(self):
        chain = make_chain()
        txid = chain.submit("commit", {"address": digest(b"pending").hex})
        with pytest.raises(NotFound):
            chain.receipt_for(txid)
        chain.produce_block(15)
        assert chain.verify_receipt(chain.receipt_for(txid))


class TestSubmission:
    def test_duplicate_commit_links_to_first(self):
        chain = make_chain()
        address = digest(b"same evidence").hex
        first = chain.submit_commit({"address": address, "note": "a"})
        chain.produce_block(15)
        second = chain.submit_commit({"address": address, "note": "b"})
        chain.produce_block(30)
        tx = chain.tx_in_block(second)
        assert tx.payload["duplicate_of"] == first.hex
        assert chain.first_anchor(address) == first

    def test_identical_tx_rejected(self):
        chain = make_chain()
        chain.submit("commit", {"address": digest(b"once").hex})
        with pytest.raises(ValueError):
            chain.submit("commit", {"address": digest(b"once").hex})

    def test_deletion_and_outcome_payload_shapes(self):
        chain = make_chain()
        address = digest(b"ev").hex
        d = chain.submit_deletion(address, digest(b"order").hex, ["m2", "m1"])
        o = chain.submit_outcome_link(address, "C-2024-17", digest(b"ruling").hex)
        chain.produce_block(15)
        assert chain.tx_in_block(d).payload["signers"] == ["m1", "m2"]
        assert chain.tx_in_block(o).payload["case_ref"] == "C-2024-17"


class TestFees:
    def test_pool_exhaustion_exact_count(self):
        # fee 1.85 against a pool of 100: exactly 54 submissions clear,
        # 54 * 1.85 = 99.90, and the 55th fails with 0.10 left.
        chain = make_chain(fee="1.85", mode=FeeMode.POOL_PAYS)
        chain.fund_pool("100")
        accepted = 0
        for i in range(60):
            try:
                chain.submit("commit", {"address": digest(f"ev{i}".encode()).hex})
                accepted += 1
            except PoolDepleted:
                break
        assert accepted == 54
        assert chain.pool_balance == Decimal("0.10")

    def test_fee_spike_throttles_pool(self):
        chain = make_chain(fee="40", mode=FeeMode.POOL_PAYS)
        chain.fund_pool("100")
        accepted = 0
        for i in range(5):
            try:
                chain.submit("commit", {"address": digest(f"spike{i}".encode()).hex})
                accepted += 1
            except PoolDepleted:
                break
        assert accepted == 2
        assert chain.pool_balance == Decimal("20")

    def test_submitter_pays_from_account(self):
        chain = make_chain(fee="1.85", mode=FeeMode.SUBMITTER_PAYS)
        chain.fund_account("dropbox-1", "5")
        chain.submit("commit", {"address": digest(b"a").hex}, account="dropbox-1")
        chain.submit("commit", {"address": digest(b"b").hex}, account="dropbox-1")
        assert chain.account_balance("dropbox-1") == Decimal("1.30")
        with pytest.raises(FeeUnpaid):
            chain.submit("commit", {"address": digest(b"c").hex}, account="dropbox-1")

    def test_submitter_pays_requires_account(self):
        chain = make_chain(fee="1.85", mode=FeeMode.SUBMITTER_PAYS)
        with pytest.raises(FeeUnpaid):
            chain.submit("commit", {"address": digest(b"a").hex})

    def test_fee_settles_at_submission_not_block_time(self):
        chain = make_chain(fee="2", mode=FeeMode.POOL_PAYS)
        chain.fund_pool("10")
        chain.submit("commit", {"address": digest(b"a").hex})
        assert chain.pool_balance == Decimal("8")
        assert chain.pending_count == 1
        chain.produce_block(15)
        assert chain.pool_balance == Decimal("8")

    def test_zero_fee_needs_no_funding(self):
        chain = make_chain(fee="0", mode=FeeMode.SUBMITTER_PAYS)
        chain.submit("commit", {"address": digest(b"free").hex})


class TestPersistence:
    def test_log_round_trip(self, tmp_path):
        log = tmp_path / "chain.log"
        chain = make_chain(log_path=log)
        txid = chain.submit("commit", {"address": digest(b"persisted").hex})
        chain.produce_block(15)
        chain.submit("outcome-link", {"address": digest(b"persisted").hex, "case_ref": "C-9"})
        chain.produce_block(30)
        loaded = AnchorChain.load_log(log)
        assert loaded.height == chain.height
        assert loaded.head.header_digest == chain.head.header_digest
        assert loaded.verify_receipt(loaded.receipt_for(txid))
        assert loaded.validate() == []

    def test_corrupted_log_rejected(self, tmp_path):
        log = tmp_path / "chain.log"
        chain = make_chain(log_path=log)
        chain.submit("commit", {"address": digest(b"x").hex})
        chain.produce_block(15)
        chain.produce_block(30)
        text = log.read_text(encoding="utf-8")
        vandal = text.replace('"timestamp":15', '"timestamp":99')
        log.write_text(vandal, encoding="utf-8")
        with pytest.raises(ReceiptInvalid):
            AnchorChain.load_log(log)
