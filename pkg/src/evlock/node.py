"""One-command assembly of a complete desk-scale deployment.

A "desk" is everything a small consortium needs in one process: a handful
of storage nodes, the simulated anchor chain, the member roster with its
vetting ledger, and the submission gateway, all wired together from a
single JSON config. With a seed set, every key, address, and token in a
run is reproducible byte for byte.

Member secret keys are written under the data directory so the command
line tools can sign votes and deletion certificates in a demo. A real
deployment would keep each member's key on that member's own machine.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Optional

from .chain import AnchorChain, FeeMode, FeePolicy
from .crypto import (
    DeletionCertificate,
    Digest,
    EncryptedEnvelope,
    KeyPair,
    ThresholdPolicy,
    keygen,
    unwrap_share,
)
from .gateway import EvidenceGateway, SimClock
from .ledger import ConsortiumLedger, Member, MemberRole
from .store import ReplicatedStore, StorageNode


@dataclass
class DeskConfig:
    storage_nodes: int = 5
    replication: int = 3
    voters: int = 5
    observers: int = 0
    quorum: int = 3
    threshold_k: Optional[int] = None
    block_interval: int = 15
    fee_mode: str = FeeMode.POOL_PAYS.value
    fee: str = "1.85"
    pool_fund: str = "10000"
    clock_start: int = 1_700_000_000
    seed: Optional[int] = None
    data_dir: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "storage_nodes": self.storage_nodes,
            "replication": self.replication,
            "voters": self.voters,
            "observers": self.observers,
            "quorum": self.quorum,
            "threshold_k": self.threshold_k,
            "block_interval": self.block_interval,
            "fee_mode": self.fee_mode,
            "fee": self.fee,
            "pool_fund": self.pool_fund,
            "clock_start": self.clock_start,
            "seed": self.seed,
            "data_dir": self.data_dir,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DeskConfig":
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        return cls(**known)

    @classmethod
    def load(cls, path: Path) -> "DeskConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def save_keypair(path: Path, key: KeyPair, display_name: str, role: MemberRole) -> None:
    Path(path).write_text(
        json.dumps(
            {
                "member_id": key.key_id,
                "display_name": display_name,
                "role": role.value,
                "public_key": key.public_key.hex(),
                "secret_key": key.secret_key.hex(),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )


def load_keypair(path: Path) -> tuple[KeyPair, str, MemberRole]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    key = KeyPair(
        public_key=bytes.fromhex(obj["public_key"]),
        secret_key=bytes.fromhex(obj["secret_key"]),
        owner_label=obj.get("display_name", ""),
    )
    return key, obj.get("display_name", ""), MemberRole(obj.get("role", "Voter"))


@dataclass
class Desk:
    config: DeskConfig
    clock: SimClock
    store: ReplicatedStore
    chain: AnchorChain
    ledger: ConsortiumLedger
    gateway: EvidenceGateway
    member_keys: list[KeyPair] = field(default_factory=list)
    rng: Optional[random.Random] = None

    def member_key(self, member_id: str) -> KeyPair:
        for key in self.member_keys:
            if key.key_id == member_id:
                return key
        raise KeyError(f"no local key for member {member_id[:12]}")

    def shares_for(self, address: Digest, member_ids: list[str]) -> list[tuple[str, bytes]]:
        """Unwrap each listed member's envelope share, as they would locally."""
        envelope = EncryptedEnvelope.from_bytes(self.store.get(address))
        return [unwrap_share(envelope, self.member_key(mid)) for mid in member_ids]

    def sign_full_deletion(self, address: Digest, court_order_digest: Digest) -> DeletionCertificate:
        cert = DeletionCertificate(address=address, court_order_digest=court_order_digest)
        for key in self.member_keys:
            cert = cert.with_signature(key)
        return cert


def build_desk(config: DeskConfig, base_dir: Optional[Path] = None) -> Desk:
    if config.data_dir is not None:
        base = Path(config.data_dir)
    elif base_dir is not None:
        base = Path(base_dir)
    else:
        raise ValueError("config has no data_dir and no base_dir given")
    base.mkdir(parents=True, exist_ok=True)

    rng = random.Random(config.seed) if config.seed is not None else None
    clock = SimClock(config.clock_start)

    member_keys: list[KeyPair] = []
    members: list[Member] = []
    keys_dir = base / "keys"
    keys_dir.mkdir(exist_ok=True)
    for i in range(config.voters):
        key = keygen(f"voter-{i}", rng)
        member_keys.append(key)
        members.append(Member(key.key_id, f"Member {i + 1}", MemberRole.VOTER, key.public_key))
    for i in range(config.observers):
        key = keygen(f"observer-{i}", rng)
        member_keys.append(key)
        members.append(
            Member(
                key.key_id,
                f"Observer {i + 1}",
                MemberRole.OBSERVER,
                key.public_key,
            )
        )
    for key, member in zip(member_keys, members):
        save_keypair(keys_dir / f"{member.member_id[:16]}.json", key, member.display_name, member.role)

    fee_policy = FeePolicy(FeeMode(config.fee_mode), Decimal(config.fee))
    chain = AnchorChain(fee_policy=fee_policy, log_path=base / "chain.log")
    if fee_policy.mode == FeeMode.POOL_PAYS and Decimal(config.pool_fund) > 0:
        chain.fund_pool(config.pool_fund)

    ledger = ConsortiumLedger(members, config.quorum, chain)
    nodes = [
        StorageNode(f"node-{i}", base / "storage", location_label=f"site-{i}")
        for i in range(config.storage_nodes)
    ]
    store = ReplicatedStore(
        nodes,
        deletion_roster=ledger.deletion_roster(),
        default_replication=config.replication,
    )
    gateway = EvidenceGateway(
        store=store,
        chain=chain,
        ledger=ledger,
        clock=clock,
        rng=rng,
        block_interval=config.block_interval,
        threshold_k=config.threshold_k,
    )
    return Desk(
        config=config,
        clock=clock,
        store=store,
        chain=chain,
        ledger=ledger,
        gateway=gateway,
        member_keys=member_keys,
        rng=rng,
    )
