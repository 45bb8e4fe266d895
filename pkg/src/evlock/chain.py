"""Simulated public anchor chain: blocks, Merkle inclusion proofs, fees.

Only digests of evidence metadata land here, never content. Blocks are
produced on demand from a mempool; each gets a Merkle root over its
transaction ids so any party holding a receipt can re-check inclusion
without trusting the operator. Heights are sequential, timestamps strictly
increase, and every block commits to its parent digest, so the whole log
revalidates from genesis at any time.

Fees are exact decimal amounts settled at submission time, either from the
submitter's one-shot account or from a shared pool.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .crypto import Digest, canonical_json_bytes, digest
from .errors import FeeUnpaid, NotFound, PoolDepleted, ReceiptInvalid

ZERO_DIGEST = Digest(bytes(32))


class FeeMode(str, Enum):
    SUBMITTER_PAYS = "SubmitterPays"
    POOL_PAYS = "PoolPays"


@dataclass(frozen=True)
class FeePolicy:
    mode: FeeMode
    fee: Decimal

    def __post_init__(self) -> None:
        if self.fee < 0:
            raise ValueError("fee must be non-negative")

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "fee": str(self.fee)}

    @classmethod
    def from_dict(cls, obj: dict) -> "FeePolicy":
        return cls(mode=FeeMode(obj["mode"]), fee=Decimal(obj["fee"]))


# -- Merkle trees over transaction ids --------------------------------------


def merkle_root(leaves: list[Digest]) -> Digest:
    """Pairwise digest tree; an odd level duplicates its last node."""
    if not leaves:
        return digest(b"")
    level = list(leaves)
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [
            digest(level[i].data + level[i + 1].data) for i in range(0, len(level), 2)
        ]
    return level[0]


def merkle_path(leaves: list[Digest], index: int) -> list[Digest]:
    """Bottom-up sibling digests; orientation is derived from the leaf index."""
    if not 0 <= index < len(leaves):
        raise IndexError("leaf index out of range")
    path = []
    level = list(leaves)
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        sibling = index ^ 1
        path.append(level[sibling])
        level = [
            digest(level[i].data + level[i + 1].data) for i in range(0, len(level), 2)
        ]
        index //= 2
    return path


def verify_path(leaf: Digest, index: int, path: Iterable[Digest], root: Digest) -> bool:
    node = leaf
    for sibling in path:
        if index % 2:
            node = digest(sibling.data + node.data)
        else:
            node = digest(node.data + sibling.data)
        index //= 2
    return node == root


# -- transactions and blocks ------------------------------------------------


@dataclass(frozen=True)
class ChainTx:
    kind: str
    payload: dict

    @property
    def txid(self) -> Digest:
        return digest(canonical_json_bytes({"kind": self.kind, "payload": self.payload}))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "payload": self.payload, "txid": self.txid.hex}


@dataclass(frozen=True)
class Block:
    height: int
    parent: Digest
    timestamp: int
    merkle_root: Digest
    txs: tuple[ChainTx, ...]

    @property
    def header_digest(self) -> Digest:
        return digest(
            canonical_json_bytes(
                {
                    "height": self.height,
                    "parent": self.parent.hex,
                    "timestamp": self.timestamp,
                    "merkle_root": self.merkle_root.hex,
                }
            )
        )

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "parent": self.parent.hex,
            "timestamp": self.timestamp,
            "merkle_root": self.merkle_root.hex,
            "txs": [t.to_dict() for t in self.txs],
        }


@dataclass(frozen=True)
class AnchorReceipt:
    """Everything needed to re-check inclusion later, with no chain access
    beyond the one block header."""

    txid: Digest
    block_height: int
    block_digest: Digest
    block_timestamp: int
    merkle_root: Digest
    tx_index: int
    siblings: tuple[Digest, ...]

    def to_dict(self) -> dict:
        return {
            "txid": self.txid.hex,
            "block_height": self.block_height,
            "block_digest": self.block_digest.hex,
            "block_timestamp": self.block_timestamp,
            "merkle_root": self.merkle_root.hex,
            "tx_index": self.tx_index,
            "siblings": [s.hex for s in self.siblings],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AnchorReceipt":
        return cls(
            txid=Digest.from_hex(obj["txid"]),
            block_height=int(obj["block_height"]),
            block_digest=Digest.from_hex(obj["block_digest"]),
            block_timestamp=int(obj["block_timestamp"]),
            merkle_root=Digest.from_hex(obj["merkle_root"]),
            tx_index=int(obj["tx_index"]),
            siblings=tuple(Digest.from_hex(s) for s in obj["siblings"]),
        )


@dataclass
class _TxLocation:
    height: int
    index: int


class AnchorChain:
    """Append-only block log with fee-gated submission."""

    def __init__(
        self,
        fee_policy: Optional[FeePolicy] = None,
        log_path: Optional[Path] = None,
    ) -> None:
        self.fee_policy = fee_policy or FeePolicy(FeeMode.POOL_PAYS, Decimal("0"))
        self._accounts: dict[str, Decimal] = {}
        self._pool = Decimal("0")
        self._blocks: list[Block] = []
        self._mempool: list[ChainTx] = []
        self._locations: dict[Digest, _TxLocation] = {}
        self._known_txids: set[Digest] = set()
        self._first_commit: dict[str, Digest] = {}
        self._lock = threading.RLock()
        self._log_path = Path(log_path) if log_path else None
        if self._log_path is not None and self._log_path.exists():
            self._log_path.unlink()
        genesis = Block(
            height=0,
            parent=ZERO_DIGEST,
            timestamp=0,
            merkle_root=merkle_root([]),
            txs=(),
        )
        self._blocks.append(genesis)
        self._append_log(genesis)

    # -- funding ------------------------------------------------------------

    def fund_account(self, account_id: str, amount: Decimal | str) -> None:
        amount = Decimal(amount)
        if amount < 0:
            raise ValueError("funding must be non-negative")
        with self._lock:
            self._accounts[account_id] = self._accounts.get(account_id, Decimal("0")) + amount

    def account_balance(self, account_id: str) -> Decimal:
        return self._accounts.get(account_id, Decimal("0"))

    def fund_pool(self, amount: Decimal | str) -> None:
        amount = Decimal(amount)
        if amount < 0:
            raise ValueError("funding must be non-negative")
        with self._lock:
            self._pool += amount

    @property
    def pool_balance(self) -> Decimal:
        return self._pool

    def _settle_fee(self, account: Optional[str]) -> None:
        fee = self.fee_policy.fee
        if fee == 0:
            return
        if self.fee_policy.mode == FeeMode.SUBMITTER_PAYS:
            if account is None:
                raise FeeUnpaid("submission needs a funding account")
            balance = self._accounts.get(account, Decimal("0"))
            if balance < fee:
                raise FeeUnpaid(f"account {account} holds {balance}, fee is {fee}")
            self._accounts[account] = balance - fee
        else:
            if self._pool < fee:
                raise PoolDepleted(f"pool holds {self._pool}, fee is {fee}")
            self._pool -= fee

    # -- submission ---------------------------------------------------------

    def submit(self, kind: str, payload: dict, account: Optional[str] = None) -> Digest:
        """Settle the fee and queue the transaction for the next block."""
        tx = ChainTx(kind=kind, payload=payload)
        with self._lock:
            if tx.txid in self._known_txids:
                raise ValueError(f"transaction {tx.txid.hex[:12]} already known")
            self._settle_fee(account)
            self._mempool.append(tx)
            self._known_txids.add(tx.txid)
            address = payload.get("address")
            if kind == "commit" and isinstance(address, str):
                self._first_commit.setdefault(address, tx.txid)
        return tx.txid

    def submit_commit(self, metadata: dict, account: Optional[str] = None) -> Digest:
        """Anchor evidence metadata; a repeat address gets a duplicate_of link."""
        payload = dict(metadata)
        address = payload.get("address")
        if isinstance(address, str):
            first = self._first_commit.get(address)
            if first is not None:
                payload["duplicate_of"] = first.hex
        return self.submit("commit", payload, account)

    def submit_deletion(
        self, address: str, court_order_digest: str, signers: list[str], account: Optional[str] = None
    ) -> Digest:
        payload = {
            "address": address,
            "court_order": court_order_digest,
            "signers": sorted(signers),
        }
        return self.submit("deletion", payload, account)

    def submit_outcome_link(
        self, address: str, case_ref: str, outcome_digest: str, account: Optional[str] = None
    ) -> Digest:
        payload = {
            "address": address,
            "case_ref": case_ref,
            "outcome_digest": outcome_digest,
        }
        return self.submit("outcome-link", payload, account)

    def first_anchor(self, address: str) -> Optional[Digest]:
        return self._first_commit.get(address)

    @property
    def pending_count(self) -> int:
        return len(self._mempool)

    # -- block production ----------------------------------------------------

    @property
    def head(self) -> Block:
        return self._blocks[-1]

    @property
    def height(self) -> int:
        return self._blocks[-1].height

    def block_at(self, height: int) -> Block:
        if not 0 <= height < len(self._blocks):
            raise NotFound(f"no block at height {height}")
        return self._blocks[height]

    def blocks(self) -> list[Block]:
        return list(self._blocks)

    def produce_block(self, now: int) -> Block:
        """Drain the mempool into a new block stamped ``now``."""
        with self._lock:
            parent = self._blocks[-1]
            if now <= parent.timestamp:
                raise ValueError(
                    f"timestamp {now} not after parent {parent.timestamp}"
                )
            txs = tuple(self._mempool)
            self._mempool.clear()
            block = Block(
                height=parent.height + 1,
                parent=parent.header_digest,
                timestamp=now,
                merkle_root=merkle_root([t.txid for t in txs]),
                txs=txs,
            )
            self._blocks.append(block)
            for i, tx in enumerate(txs):
                self._locations[tx.txid] = _TxLocation(height=block.height, index=i)
            self._append_log(block)
        return block

    # -- receipts ------------------------------------------------------------

    def receipt_for(self, txid: Digest) -> AnchorReceipt:
        loc = self._locations.get(txid)
        if loc is None:
            raise NotFound(f"transaction {txid.hex[:12]} not in any block")
        block = self._blocks[loc.height]
        leaves = [t.txid for t in block.txs]
        return AnchorReceipt(
            txid=txid,
            block_height=block.height,
            block_digest=block.header_digest,
            block_timestamp=block.timestamp,
            merkle_root=block.merkle_root,
            tx_index=loc.index,
            siblings=tuple(merkle_path(leaves, loc.index)),
        )

    def verify_receipt(self, receipt: AnchorReceipt) -> bool:
        """Check the receipt against the live chain; raises on any mismatch."""
        try:
            block = self.block_at(receipt.block_height)
        except NotFound as exc:
            raise ReceiptInvalid(str(exc)) from None
        if block.header_digest != receipt.block_digest:
            raise ReceiptInvalid("block digest does not match the chain")
        if block.merkle_root != receipt.merkle_root:
            raise ReceiptInvalid("merkle root does not match the block")
        if block.timestamp != receipt.block_timestamp:
            raise ReceiptInvalid("block timestamp does not match the chain")
        if not 0 <= receipt.tx_index < len(block.txs):
            raise ReceiptInvalid("transaction index outside the block")
        if block.txs[receipt.tx_index].txid != receipt.txid:
            raise ReceiptInvalid("block holds a different transaction at that index")
        if not verify_path(receipt.txid, receipt.tx_index, receipt.siblings, block.merkle_root):
            raise ReceiptInvalid("inclusion path does not reach the root")
        return True

    def tx_in_block(self, txid: Digest) -> Optional[ChainTx]:
        loc = self._locations.get(txid)
        if loc is None:
            return None
        return self._blocks[loc.height].txs[loc.index]

    # -- validation and persistence ------------------------------------------

    def validate(self) -> list[str]:
        """Recheck the whole log from genesis; an empty list means clean."""
        problems: list[str] = []
        for i, block in enumerate(self._blocks):
            if block.height != i:
                problems.append(f"height {block.height} at position {i}")
            expected_parent = ZERO_DIGEST if i == 0 else self._blocks[i - 1].header_digest
            if block.parent != expected_parent:
                problems.append(f"block {i} parent link broken")
            if i > 0 and block.timestamp <= self._blocks[i - 1].timestamp:
                problems.append(f"block {i} timestamp not after block {i - 1}")
            recomputed = merkle_root([t.txid for t in block.txs])
            if recomputed != block.merkle_root:
                problems.append(f"block {i} merkle root does not match its transactions")
        return problems

    def _append_log(self, block: Block) -> None:
        if self._log_path is None:
            return
        self._log_path.parent.mkdir(parents=True, exist_ok=True)
        with self._log_path.open("ab") as fh:
            fh.write(canonical_json_bytes(block.to_dict()) + b"\n")

    @classmethod
    def load_log(cls, log_path: Path, fee_policy: Optional[FeePolicy] = None) -> "AnchorChain":
        """Rebuild a chain from its block log, revalidating every link."""
        chain = cls(fee_policy=fee_policy, log_path=None)
        import json

        lines = Path(log_path).read_text(encoding="utf-8").splitlines()
        for line in lines:
            if not line.strip():
                continue
            obj = json.loads(line)
            txs = tuple(ChainTx(kind=t["kind"], payload=t["payload"]) for t in obj["txs"])
            for raw, tx in zip(obj["txs"], txs):
                if tx.txid.hex != raw["txid"]:
                    raise ReceiptInvalid(f"logged txid mismatch in block {obj['height']}")
            block = Block(
                height=int(obj["height"]),
                parent=Digest.from_hex(obj["parent"]),
                timestamp=int(obj["timestamp"]),
                merkle_root=Digest.from_hex(obj["merkle_root"]),
                txs=txs,
            )
            if block.height == 0:
                chain._blocks = [block]
            else:
                chain._blocks.append(block)
            for i, tx in enumerate(txs):
                chain._locations[tx.txid] = _TxLocation(height=block.height, index=i)
                chain._known_txids.add(tx.txid)
                address = tx.payload.get("address")
                if tx.kind == "commit" and isinstance(address, str):
                    chain._first_commit.setdefault(address, tx.txid)
        problems = chain.validate()
        if problems:
            raise ReceiptInvalid("; ".join(problems))
        chain._log_path = Path(log_path)
        return chain
