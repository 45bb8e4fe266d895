"""Replicated store: round-trips, failure subsets, tamper detection, deletion."""

import itertools
import random

import pytest

from evlock.crypto import (
    DeletionCertificate,
    deletion_message,
    digest,
    keygen,
)
from evlock.errors import (
    AlreadyDeleted,
    CertificateIncomplete,
    ContentUnavailable,
    EmptyContent,
    InsufficientReplicas,
    UnknownNode,
)
from evlock.store import (
    CHUNK_SIZE,
    NodeState,
    ReplicaStatus,
    ReplicatedStore,
    StorageNode,
    WHOLE_OBJECT_LIMIT,
)

N_NODES = 5
REPLICATION = 3


def make_cluster(tmp_path, n=N_NODES, r=REPLICATION, roster=None):
    nodes = [StorageNode(f"node-{i}", tmp_path, location_label=f"site-{i}") for i in range(n)]
    return ReplicatedStore(nodes, deletion_roster=roster, default_replication=r)


def make_roster(rng, count=N_NODES):
    keys = [keygen(f"member-{i}", rng) for i in range(count)]
    return {k.key_id: k.public_key for k in keys}, keys


def full_certificate(address, keys, court_order=b"order-7741"):
    cert = DeletionCertificate(address=address, court_order_digest=digest(court_order))
    for key in keys:
        cert = cert.with_signature(key)
    return cert


class TestPutGet:
    def test_round_trip(self, tmp_path):
        store = make_cluster(tmp_path)
        content = b"exhibit A: ledger extract 2024-03"
        address = store.put(content)
        assert address == digest(content)
        assert store.get(address) == content

    def test_replica_count_on_disk(self, tmp_path):
        store = make_cluster(tmp_path)
        address = store.put(b"copies everywhere")
        holders = [n for n in store.nodes if n.holds(address)]
        assert len(holders) == REPLICATION

    def test_idempotent_put_does_not_grow_storage(self, tmp_path):
        store = make_cluster(tmp_path)
        content = b"same bytes twice"
        a1 = store.put(content)
        before = sum(len(list(n.root.iterdir())) for n in store.nodes)
        a2 = store.put(content)
        after = sum(len(list(n.root.iterdir())) for n in store.nodes)
        assert a1 == a2
        assert before == after

    def test_empty_content_rejected(self, tmp_path):
        store = make_cluster(tmp_path)
        with pytest.raises(EmptyContent):
            store.put(b"")

    def test_unknown_address_unavailable(self, tmp_path):
        store = make_cluster(tmp_path)
        with pytest.raises(ContentUnavailable):
            store.get(digest(b"never stored"))

    def test_insufficient_live_nodes(self, tmp_path):
        store = make_cluster(tmp_path)
        for i in range(3):
            store.set_node_state(f"node-{i}", NodeState.FAILED)
        with pytest.raises(InsufficientReplicas):
            store.put(b"needs three live homes")

    def test_placement_is_deterministic(self, tmp_path):
        content = b"placement probe"
        store_a = make_cluster(tmp_path / "a")
        store_b = make_cluster(tmp_path / "b")
        addr_a = store_a.put(content)
        addr_b = store_b.put(content)
        holders_a = sorted(n.node_id for n in store_a.nodes if n.holds(addr_a))
        holders_b = sorted(n.node_id for n in store_b.nodes if n.holds(addr_b))
        assert holders_a == holders_b

    def test_unknown_node_rejected(self, tmp_path):
        store = make_cluster(tmp_path)
        with pytest.raises(UnknownNode):
            store.set_node_state("node-99", NodeState.FAILED)


class TestFailureSubsets:
    def test_every_failure_subset_behaves_as_replica_coverage_predicts(self, tmp_path):
        # Exhaustive over all 32 subsets of failed nodes: content stays
        # readable exactly when at least one replica node is still live.
        store = make_cluster(tmp_path)
        content = b"survives r-1 failures"
        address = store.put(content)
        replica_ids = {n.node_id for n in store.nodes if n.holds(address)}
        all_ids = [n.node_id for n in store.nodes]
        for size in range(N_NODES + 1):
            for failed in itertools.combinations(all_ids, size):
                for node_id in failed:
                    store.set_node_state(node_id, NodeState.FAILED)
                should_read = bool(replica_ids - set(failed))
                if should_read:
                    assert store.get(address) == content
                else:
                    with pytest.raises(ContentUnavailable):
                        store.get(address)
                for node_id in failed:
                    store.set_node_state(node_id, NodeState.LIVE)

    def test_failed_replica_reported_unreachable(self, tmp_path):
        store = make_cluster(tmp_path)
        address = store.put(b"one replica down")
        replica_ids = [n.node_id for n in store.nodes if n.holds(address)]
        store.set_node_state(replica_ids[0], NodeState.FAILED)
        report = store.verify_replicas(address)
        by_node = {e.node_id: e.status for e in report.entries}
        assert by_node[replica_ids[0]] == ReplicaStatus.UNREACHABLE
        assert all(by_node[i] == ReplicaStatus.MATCH for i in replica_ids[1:])


class TestTamper:
    def test_untouched_replicas_all_match(self, tmp_path):
        store = make_cluster(tmp_path)
        address = store.put(b"pristine")
        report = store.verify_replicas(address)
        assert report.all_match
        assert len(report.entries) == REPLICATION
        for entry in report.entries:
            assert entry.observed_digest == address

    def test_single_byte_flip_flags_exactly_one_mismatch(self, tmp_path):
        rng = random.Random(0xB0)
        store = make_cluster(tmp_path)
        content = bytes(rng.randbytes(512))
        address = store.put(content)
        victim = next(n.node_id for n in store.nodes if n.holds(address))
        offset = rng.randrange(len(content))
        flipped = bytes([content[offset] ^ 0x01])
        store.tamper_replica(victim, address, offset, flipped)
        report = store.verify_replicas(address)
        assert report.nodes_with(ReplicaStatus.MISMATCH) == [victim]
        assert len(report.nodes_with(ReplicaStatus.MATCH)) == REPLICATION - 1
        mismatch = next(e for e in report.entries if e.status == ReplicaStatus.MISMATCH)
        assert mismatch.observed_digest != address

    def test_reads_never_serve_tampered_bytes(self, tmp_path):
        rng = random.Random(0xB1)
        store = make_cluster(tmp_path)
        content = bytes(rng.randbytes(256))
        address = store.put(content)
        holders = [n.node_id for n in store.nodes if n.holds(address)]
        store.tamper_replica(holders[0], address, 5, b"\xff")
        assert store.get(address) == content

    def test_all_replicas_tampered_means_unavailable_not_wrong(self, tmp_path):
        store = make_cluster(tmp_path)
        content = b"no honest copy left"
        address = store.put(content)
        for node in store.nodes:
            if node.holds(address):
                store.tamper_replica(node.node_id, address, 0, b"X")
        with pytest.raises(ContentUnavailable):
            store.get(address)

    def test_randomized_mutations_always_flagged(self, tmp_path):
        # Seeded sweep: every single-byte change to any replica must show up
        # as a Mismatch on exactly that node.
        rng = random.Random(0xB2)
        store = make_cluster(tmp_path)
        contents = [bytes(rng.randbytes(rng.randrange(32, 2048))) for _ in range(20)]
        addresses = [store.put(c) for c in contents]
        for _ in range(300):
            idx = rng.randrange(len(addresses))
            address, content = addresses[idx], contents[idx]
            victim = rng.choice([n.node_id for n in store.nodes if n.holds(address)])
            offset = rng.randrange(len(content))
            old = content[offset]
            new = rng.randrange(256)
            if new == old:
                new ^= 0x5A
            store.tamper_replica(victim, address, offset, bytes([new]))
            report = store.verify_replicas(address)
            assert victim in report.nodes_with(ReplicaStatus.MISMATCH)
            store.restore_replica(victim, address)
            assert store.verify_replicas(address).all_match

    def test_tamper_requires_holder(self, tmp_path):
        store = make_cluster(tmp_path)
        address = store.put(b"somewhere else")
        outsider = next(n.node_id for n in store.nodes if not n.holds(address))
        with pytest.raises(ContentUnavailable):
            store.tamper_replica(outsider, address, 0, b"?")

    def test_tamper_out_of_range(self, tmp_path):
        store = make_cluster(tmp_path)
        address = store.put(b"short")
        holder = next(n.node_id for n in store.nodes if n.holds(address))
        with pytest.raises(ValueError):
            store.tamper_replica(holder, address, 3, b"too long for this")


class TestChunkedObjects:
    def test_large_round_trip(self, tmp_path):
        rng = random.Random(0xC0)
        store = make_cluster(tmp_path)
        content = bytes(rng.randbytes(WHOLE_OBJECT_LIMIT + CHUNK_SIZE * 2 + 17))
        address = store.put(content)
        assert store.get(address) == content
        # manifest address differs from the raw content digest on purpose
        assert address != digest(content)

    def test_chunk_tamper_detected_and_read_survives(self, tmp_path):
        rng = random.Random(0xC1)
        store = make_cluster(tmp_path)
        content = bytes(rng.randbytes(WHOLE_OBJECT_LIMIT + CHUNK_SIZE + 5))
        address = store.put(content)
        first_chunk = digest(content[:CHUNK_SIZE])
        victim = next(n.node_id for n in store.nodes if n.holds(first_chunk))
        store.tamper_replica(victim, first_chunk, 10, b"\x00\x01")
        report = store.verify_replicas(address)
        assert victim in report.nodes_with(ReplicaStatus.MISMATCH)
        assert store.get(address) == content

    def test_manifest_tamper_detected(self, tmp_path):
        rng = random.Random(0xC2)
        store = make_cluster(tmp_path)
        content = bytes(rng.randbytes(WHOLE_OBJECT_LIMIT + 1))
        address = store.put(content)
        victim = next(n.node_id for n in store.nodes if n.holds(address))
        store.tamper_replica(victim, address, 2, b"Z")
        report = store.verify_replicas(address)
        assert victim in report.nodes_with(ReplicaStatus.MISMATCH)
        assert store.get(address) == content


class TestDeletion:
    def test_full_certificate_removes_every_replica(self, tmp_path):
        rng = random.Random(0xD0)
        roster, keys = make_roster(rng)
        store = make_cluster(tmp_path, roster=roster)
        content = b"to be expunged by court order"
        address = store.put(content)
        outcome = store.delete_content(address, full_certificate(address, keys))
        assert len(outcome.removed_from) == REPLICATION
        assert not any(n.holds(address) for n in store.nodes)
        with pytest.raises(ContentUnavailable):
            store.get(address)
        report = store.verify_replicas(address)
        assert report.nodes_with(ReplicaStatus.MATCH) == []

    def test_replay_is_already_deleted(self, tmp_path):
        rng = random.Random(0xD1)
        roster, keys = make_roster(rng)
        store = make_cluster(tmp_path, roster=roster)
        address = store.put(b"once is enough")
        cert = full_certificate(address, keys)
        store.delete_content(address, cert)
        with pytest.raises(AlreadyDeleted):
            store.delete_content(address, cert)

    def test_every_proper_signer_subset_rejected(self, tmp_path):
        # All 31 proper subsets of the 5 signers, empty included: none may
        # delete, and the bytes must remain on every replica afterwards.
        rng = random.Random(0xD2)
        roster, keys = make_roster(rng)
        store = make_cluster(tmp_path, roster=roster)
        content = b"partial consent is no consent"
        address = store.put(content)
        holders_before = sorted(n.node_id for n in store.nodes if n.holds(address))
        court = digest(b"order-22")
        rejected = 0
        for size in range(len(keys)):
            for subset in itertools.combinations(keys, size):
                cert = DeletionCertificate(address=address, court_order_digest=court)
                for key in subset:
                    cert = cert.with_signature(key)
                with pytest.raises(CertificateIncomplete):
                    store.delete_content(address, cert)
                rejected += 1
        assert rejected == 31
        holders_after = sorted(n.node_id for n in store.nodes if n.holds(address))
        assert holders_after == holders_before
        assert store.get(address) == content

    def test_certificate_for_other_address_rejected(self, tmp_path):
        rng = random.Random(0xD3)
        roster, keys = make_roster(rng)
        store = make_cluster(tmp_path, roster=roster)
        address = store.put(b"the real target")
        other = store.put(b"an innocent bystander")
        cert = full_certificate(other, keys)
        with pytest.raises(CertificateIncomplete):
            store.delete_content(address, cert)

    def test_deletion_sweeps_chunks(self, tmp_path):
        rng = random.Random(0xD4)
        roster, keys = make_roster(rng)
        store = make_cluster(tmp_path, roster=roster)
        content = bytes(rng.randbytes(WHOLE_OBJECT_LIMIT + CHUNK_SIZE + 1))
        address = store.put(content)
        store.delete_content(address, full_certificate(address, keys))
        remaining = sum(len(list(n.root.iterdir())) for n in store.nodes)
        assert remaining == 0

    def test_store_without_roster_rejects_deletion(self, tmp_path):
        rng = random.Random(0xD5)
        _, keys = make_roster(rng)
        store = make_cluster(tmp_path, roster=None)
        address = store.put(b"no roster configured")
        with pytest.raises(CertificateIncomplete):
            store.delete_content(address, full_certificate(address, keys))

    def test_reput_after_deletion_reinstates(self, tmp_path):
        rng = random.Random(0xD6)
        roster, keys = make_roster(rng)
        store = make_cluster(tmp_path, roster=roster)
        content = b"resubmitted evidence"
        address = store.put(content)
        store.delete_content(address, full_certificate(address, keys))
        assert store.put(content) == address
        assert store.get(address) == content


class TestRepair:
    def test_restore_needs_an_intact_source(self, tmp_path):
        store = make_cluster(tmp_path)
        address = store.put(b"all copies ruined")
        for node in store.nodes:
            if node.holds(address):
                store.tamper_replica(node.node_id, address, 0, b"!")
        with pytest.raises(ContentUnavailable):
            store.restore_replica("node-0", address)
