"""Private content-addressed object store replicated across simulated nodes.

Every object lives as one file named by its 64-hex address inside a per-node
directory. Objects over 1 MiB are split into 256 KiB chunks under a manifest
whose digest is the address; the manifest records the whole-content digest so
reads stay end-to-end verified on the chunked path too.

Reads verify digests before returning: a tampered replica can never serve
wrong bytes, only be skipped and reported. Failure (node down) and tampering
(byte edits on one replica) are injectable for scenario runs.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .crypto import Digest, DeletionCertificate, canonical_json_bytes, digest
from .errors import (
    AlreadyDeleted,
    CertificateIncomplete,
    ContentUnavailable,
    EmptyContent,
    InsufficientReplicas,
    UnknownNode,
)

ContentAddress = Digest

WHOLE_OBJECT_LIMIT = 1 << 20  # 1 MiB stored as a single object
CHUNK_SIZE = 256 << 10


class NodeState(str, Enum):
    LIVE = "Live"
    FAILED = "Failed"


class ReplicaStatus(str, Enum):
    MATCH = "Match"
    MISMATCH = "Mismatch"
    MISSING = "Missing"
    UNREACHABLE = "Unreachable"


@dataclass(frozen=True)
class ReplicaEntry:
    node_id: str
    status: ReplicaStatus
    observed_digest: Optional[Digest] = None


@dataclass(frozen=True)
class ReplicaReport:
    address: ContentAddress
    entries: tuple[ReplicaEntry, ...]

    def nodes_with(self, status: ReplicaStatus) -> list[str]:
        return [e.node_id for e in self.entries if e.status == status]

    @property
    def all_match(self) -> bool:
        return all(e.status == ReplicaStatus.MATCH for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "address": self.address.hex,
            "entries": [
                {
                    "node_id": e.node_id,
                    "status": e.status.value,
                    "observed_digest": e.observed_digest.hex if e.observed_digest else None,
                }
                for e in self.entries
            ],
        }


@dataclass(frozen=True)
class DeletionOutcome:
    address: ContentAddress
    removed_from: tuple[str, ...]


class StorageNode:
    """One simulated storage node; a Failed node answers no reads or writes."""

    def __init__(self, node_id: str, root: Path, location_label: str = "") -> None:
        self.node_id = node_id
        self.location_label = location_label
        self.state = NodeState.LIVE
        self.root = Path(root) / node_id
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, address: ContentAddress) -> Path:
        return self.root / address.hex

    def holds(self, address: ContentAddress) -> bool:
        return self._path(address).exists()

    def read(self, address: ContentAddress) -> Optional[bytes]:
        try:
            return self._path(address).read_bytes()
        except FileNotFoundError:
            return None

    def write(self, address: ContentAddress, data: bytes) -> None:
        self._path(address).write_bytes(data)

    def remove(self, address: ContentAddress) -> bool:
        try:
            self._path(address).unlink()
            return True
        except FileNotFoundError:
            return False

    def mutate(self, address: ContentAddress, offset: int, replacement: bytes) -> None:
        # Direct disk edit; bypasses the Live/Failed gate on purpose, since an
        # adversary with disk access does not go through the node API.
        path = self._path(address)
        data = bytearray(path.read_bytes())
        if offset < 0 or offset + len(replacement) > len(data):
            raise ValueError("mutation out of range")
        data[offset : offset + len(replacement)] = replacement
        path.write_bytes(bytes(data))


@dataclass
class _ObjectRecord:
    replica_nodes: tuple[str, ...]
    is_manifest: bool


class ReplicatedStore:
    """Content-addressed store spread over several nodes with digest-checked reads."""

    def __init__(
        self,
        nodes: Sequence[StorageNode],
        deletion_roster: Optional[Mapping[str, bytes]] = None,
        default_replication: int = 3,
    ) -> None:
        if not nodes:
            raise ValueError("store needs at least one node")
        self._nodes: dict[str, StorageNode] = {n.node_id: n for n in nodes}
        if len(self._nodes) != len(nodes):
            raise ValueError("node ids must be unique")
        # key id -> public key; every one of them must sign a deletion
        self._deletion_roster = dict(deletion_roster or {})
        self.default_replication = default_replication
        self._index: dict[ContentAddress, _ObjectRecord] = {}
        self._deleted: set[ContentAddress] = set()
        self._lock = threading.RLock()

    # -- topology -----------------------------------------------------------

    @property
    def nodes(self) -> list[StorageNode]:
        return list(self._nodes.values())

    def node(self, node_id: str) -> StorageNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no such node: {node_id}") from None

    def set_node_state(self, node_id: str, state: NodeState | str) -> None:
        self.node(node_id).state = NodeState(state)

    def _live_nodes(self) -> list[StorageNode]:
        return [n for n in self._nodes.values() if n.state == NodeState.LIVE]

    def _placement(self, address: ContentAddress, count: int) -> list[StorageNode]:
        # Rendezvous hashing: deterministic given the address and live set.
        live = self._live_nodes()
        if len(live) < count:
            raise InsufficientReplicas(
                f"need {count} live nodes, have {len(live)}"
            )
        scored = sorted(
            live,
            key=lambda n: digest(address.data + n.node_id.encode("utf-8")).data,
            reverse=True,
        )
        return scored[:count]

    # -- write path ---------------------------------------------------------

    def put(self, content: bytes, replication: Optional[int] = None) -> ContentAddress:
        """Store ``content`` on r distinct live nodes; the digest is the address."""
        if not content:
            raise EmptyContent("refusing to store empty content")
        r = self.default_replication if replication is None else replication
        if r < 1:
            raise ValueError("replication must be at least 1")
        if len(content) <= WHOLE_OBJECT_LIMIT:
            return self._put_object(content, r, is_manifest=False)

        chunks = [content[i : i + CHUNK_SIZE] for i in range(0, len(content), CHUNK_SIZE)]
        chunk_addresses = [digest(c) for c in chunks]
        manifest = canonical_json_bytes(
            {
                "kind": "manifest",
                "chunks": [a.hex for a in chunk_addresses],
                "content_digest": digest(content).hex,
                "size": len(content),
            }
        )
        with self._lock:
            address = digest(manifest)
            targets = self._placement(address, r)
            for chunk, chunk_address in zip(chunks, chunk_addresses):
                self._write_to(targets, chunk_address, chunk, is_manifest=False)
            self._write_to(targets, address, manifest, is_manifest=True)
        return address

    def _put_object(self, data: bytes, r: int, is_manifest: bool) -> ContentAddress:
        address = digest(data)
        with self._lock:
            targets = self._placement(address, r)
            self._write_to(targets, address, data, is_manifest)
        return address

    def _write_to(
        self, targets: Sequence[StorageNode], address: ContentAddress, data: bytes, is_manifest: bool
    ) -> None:
        existing = self._index.get(address)
        if existing is not None and address not in self._deleted:
            # Idempotent re-put: identical bytes, nothing to grow.
            return
        for node in targets:
            node.write(address, data)
        self._index[address] = _ObjectRecord(
            replica_nodes=tuple(n.node_id for n in targets), is_manifest=is_manifest
        )
        self._deleted.discard(address)

    # -- read path ----------------------------------------------------------

    def _read_verified(self, address: ContentAddress) -> Optional[bytes]:
        record = self._index.get(address)
        if record is None or address in self._deleted:
            return None
        for node_id in record.replica_nodes:
            node = self._nodes.get(node_id)
            if node is None or node.state != NodeState.LIVE:
                continue
            data = node.read(address)
            if data is not None and digest(data) == address:
                return data
        return None

    def get(self, address: ContentAddress) -> bytes:
        """Digest-checked read; tampered or failed replicas are skipped silently."""
        record = self._index.get(address)
        data = self._read_verified(address)
        if data is None:
            raise ContentUnavailable(f"no replica serves {address.hex[:12]}")
        if record is not None and record.is_manifest:
            return self._assemble(address, data)
        return data

    def _assemble(self, address: ContentAddress, manifest: bytes) -> bytes:
        try:
            obj = json.loads(manifest.decode("utf-8"))
            chunk_hexes = obj["chunks"]
            content_digest = Digest.from_hex(obj["content_digest"])
        except (ValueError, KeyError) as exc:
            raise ContentUnavailable(f"unreadable manifest for {address.hex[:12]}") from exc
        parts = []
        for chunk_hex in chunk_hexes:
            chunk = self._read_verified(Digest.from_hex(chunk_hex))
            if chunk is None:
                raise ContentUnavailable(
                    f"chunk {chunk_hex[:12]} of {address.hex[:12]} unavailable"
                )
            parts.append(chunk)
        content = b"".join(parts)
        if digest(content) != content_digest:
            raise ContentUnavailable(f"reassembled content fails digest for {address.hex[:12]}")
        return content

    # -- audit path ---------------------------------------------------------

    def verify_replicas(self, address: ContentAddress) -> ReplicaReport:
        """Recompute digests on every replica node right now; nothing is cached."""
        record = self._index.get(address)
        if record is None:
            entries = tuple(
                ReplicaEntry(node_id, ReplicaStatus.MISSING) for node_id in self._nodes
            )
            return ReplicaReport(address=address, entries=entries)
        entries = []
        for node_id in record.replica_nodes:
            node = self._nodes.get(node_id)
            if node is None or node.state != NodeState.LIVE:
                entries.append(ReplicaEntry(node_id, ReplicaStatus.UNREACHABLE))
                continue
            data = node.read(address)
            if data is None:
                entries.append(ReplicaEntry(node_id, ReplicaStatus.MISSING))
                continue
            observed = digest(data)
            if observed != address:
                entries.append(ReplicaEntry(node_id, ReplicaStatus.MISMATCH, observed))
                continue
            if record.is_manifest:
                entries.append(self._verify_manifest_entry(node, address, data))
            else:
                entries.append(ReplicaEntry(node_id, ReplicaStatus.MATCH, observed))
        return ReplicaReport(address=address, entries=tuple(entries))

    def _verify_manifest_entry(
        self, node: StorageNode, address: ContentAddress, manifest: bytes
    ) -> ReplicaEntry:
        # A manifest replica only counts as Match if each chunk on this node
        # matches too; otherwise the first bad chunk's digest is reported.
        try:
            chunk_hexes = json.loads(manifest.decode("utf-8"))["chunks"]
        except (ValueError, KeyError):
            return ReplicaEntry(node.node_id, ReplicaStatus.MISMATCH, digest(manifest))
        for chunk_hex in chunk_hexes:
            chunk_address = Digest.from_hex(chunk_hex)
            chunk = node.read(chunk_address)
            if chunk is None:
                return ReplicaEntry(node.node_id, ReplicaStatus.MISSING)
            observed = digest(chunk)
            if observed != chunk_address:
                return ReplicaEntry(node.node_id, ReplicaStatus.MISMATCH, observed)
        return ReplicaEntry(node.node_id, ReplicaStatus.MATCH, digest(manifest))

    # -- deletion -----------------------------------------------------------

    def delete_content(self, address: ContentAddress, cert: DeletionCertificate) -> DeletionOutcome:
        """All-party certificate removes the bytes from every node, atomically."""
        if cert.address != address:
            raise CertificateIncomplete("certificate covers a different address")
        missing = cert.missing_signers(self._deletion_roster)
        if missing or not self._deletion_roster:
            raise CertificateIncomplete(
                f"{len(missing)} of {len(self._deletion_roster)} required signatures missing or invalid"
            )
        with self._lock:
            if address in self._deleted:
                raise AlreadyDeleted(f"{address.hex[:12]} already deleted")
            record = self._index.get(address)
            if record is None:
                raise ContentUnavailable(f"{address.hex[:12]} was never stored")
            removed: list[str] = []
            targets = [address]
            if record.is_manifest:
                targets.extend(self._manifest_chunks(address))
            for node in self._nodes.values():
                swept = [node.remove(t) for t in targets]
                if any(swept):
                    removed.append(node.node_id)
            self._deleted.add(address)
        return DeletionOutcome(address=address, removed_from=tuple(removed))

    def _manifest_chunks(self, address: ContentAddress) -> list[ContentAddress]:
        data = self._read_verified(address)
        if data is None:
            # fall back to any raw copy so chunks still get swept
            for node in self._nodes.values():
                raw = node.read(address)
                if raw is not None:
                    data = raw
                    break
        if data is None:
            return []
        try:
            return [Digest.from_hex(h) for h in json.loads(data.decode("utf-8"))["chunks"]]
        except (ValueError, KeyError):
            return []

    # -- fault and tamper injection ----------------------------------------

    def tamper_replica(
        self, node_id: str, address: ContentAddress, offset: int, replacement: bytes
    ) -> None:
        """Mutate the stored bytes on one node only; the address stays put."""
        node = self.node(node_id)
        if not node.holds(address):
            raise ContentUnavailable(f"node {node_id} does not hold {address.hex[:12]}")
        node.mutate(address, offset, replacement)

    def restore_replica(self, node_id: str, address: ContentAddress) -> None:
        """Re-copy intact bytes onto one node from any healthy replica (repair hook)."""
        data = self._read_verified(address)
        if data is None:
            raise ContentUnavailable(f"no intact replica of {address.hex[:12]} left")
        self.node(node_id).write(address, data)
