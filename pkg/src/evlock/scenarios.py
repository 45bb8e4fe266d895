"""Adversarial drills against a full desk: destroy, tamper, withhold, fake, flood.

Each scenario builds its own isolated desk, plays one attack from the
spoliation playbook, and checks that the protection actually held. The
whole run is driven by the scenario's seed and the simulated clock, so a report
renders to byte-identical canonical JSON on every machine, every time.
That makes reports diffable artifacts: any change in behaviour shows up
as a changed report, not as a flaky rerun.

A report's ``passed`` says the system kept its promise under that attack,
measured against the expectations in the scenario params (defaults encode the
stock drills; override them to probe different outcomes).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Optional

from .chain import FeeMode, FeePolicy
from .crypto import canonical_json_bytes, digest
from .errors import FeeUnpaid, PoolDepleted
from .gateway import IntegrityVerdict
from .node import DeskConfig, build_desk
from .store import ReplicaStatus


class ScenarioKind(str, Enum):
    DESTRUCTION = "Destruction"
    TAMPERING = "Tampering"
    WITHHOLDING = "Withholding"
    FABRICATION = "Fabrication"
    FEE_DOS = "FeeDoS"


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    name: str
    seed: int
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "name": self.name,
            "seed": self.seed,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioSpec":
        return cls(
            kind=ScenarioKind(obj["kind"]),
            name=obj["name"],
            seed=int(obj["seed"]),
            params=dict(obj.get("params", {})),
        )


@dataclass
class ScenarioReport:
    spec: ScenarioSpec
    passed: bool
    findings: dict
    steps: list[dict]

    def to_dict(self) -> dict:
        return {
            "kind": self.spec.kind.value,
            "name": self.spec.name,
            "seed": self.spec.seed,
            "params": self.spec.params,
            "passed": self.passed,
            "findings": self.findings,
            "steps": self.steps,
        }

    def canonical_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())


@dataclass
class SuiteReport:
    reports: list[ScenarioReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_dict(self) -> dict:
        return {
            "scenarios": [r.to_dict() for r in self.reports],
            "total": len(self.reports),
            "passed": sum(1 for r in self.reports if r.passed),
            "failed": sum(1 for r in self.reports if not r.passed),
        }

    def canonical_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())


def render_text(report: ScenarioReport) -> str:
    mark = "PASS" if report.passed else "FAIL"
    lines = [f"[{mark}] {report.spec.name} ({report.spec.kind.value}, seed {report.spec.seed})"]
    for step in report.steps:
        lines.append(f"  - {step['step']}")
    for key in sorted(report.findings):
        lines.append(f"  {key}: {report.findings[key]}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Scenario bodies


def _desk_for(spec: ScenarioSpec, base_dir: Path, **config_overrides) -> object:
    settings = {"fee": "0", **config_overrides}
    config = DeskConfig(seed=spec.seed, **settings)
    return build_desk(config, Path(base_dir) / spec.name)


def _content(desk, size: int) -> bytes:
    return desk.rng.randbytes(size)


def _run_destruction(spec: ScenarioSpec, base_dir: Path) -> ScenarioReport:
    params = {"content_size": 384, "expected_verdict": "DestroyedButProvable", **spec.params}
    desk = _desk_for(spec, base_dir)
    steps = []
    content = _content(desk, int(params["content_size"]))
    receipt = desk.gateway.submit_evidence(content)
    steps.append({"step": "submitted sealed evidence", "address": receipt.address.hex})
    wiped = []
    for node in desk.store.nodes:
        if node.remove(receipt.address):
            wiped.append(node.node_id)
    steps.append({"step": "adversary wiped every replica", "nodes": wiped})
    report = desk.gateway.full_verify(receipt.address)
    steps.append({"step": "ran full verification", "verdict": report.verdict.value})
    chain_problems = desk.chain.validate()
    receipt_ok = desk.chain.verify_receipt(receipt.anchor)
    findings = {
        "verdict": report.verdict.value,
        "replicas_wiped": len(wiped),
        "matches": report.matches,
        "anchored": report.anchored,
        "anchor_height": report.anchor_height,
        "receipt_ok": receipt_ok,
        "chain_problems": len(chain_problems),
    }
    passed = (
        report.verdict.value == params["expected_verdict"]
        and receipt_ok
        and not chain_problems
        and report.matches == 0
    )
    return ScenarioReport(spec=spec, passed=passed, findings=findings, steps=steps)


def _run_tampering(spec: ScenarioSpec, base_dir: Path) -> ScenarioReport:
    params = {"content_size": 384, "expected_verdict": "TamperedReplicas", **spec.params}
    desk = _desk_for(spec, base_dir)
    steps = []
    content = _content(desk, int(params["content_size"]))
    receipt = desk.gateway.submit_evidence(content)
    steps.append({"step": "submitted sealed evidence", "address": receipt.address.hex})
    stored = desk.store.get(receipt.address)
    holders = sorted(n.node_id for n in desk.store.nodes if n.holds(receipt.address))
    victim = desk.rng.choice(holders)
    offset = desk.rng.randrange(len(stored))
    new_byte = stored[offset] ^ (1 + desk.rng.randrange(255))
    desk.store.tamper_replica(victim, receipt.address, offset, bytes([new_byte & 0xFF]))
    steps.append({"step": "flipped one byte on one replica", "node": victim, "offset": offset})
    report = desk.gateway.full_verify(receipt.address)
    steps.append({"step": "ran full verification", "verdict": report.verdict.value})
    flagged = desk.store.verify_replicas(receipt.address).nodes_with(ReplicaStatus.MISMATCH)
    read_back = desk.store.get(receipt.address)
    findings = {
        "verdict": report.verdict.value,
        "mismatches": report.mismatches,
        "flagged_nodes": flagged,
        "tampered_node": victim,
        "read_served_original": digest(read_back) == receipt.address,
    }
    passed = (
        report.verdict.value == params["expected_verdict"]
        and report.mismatches == 1
        and flagged == [victim]
        and findings["read_served_original"]
    )
    return ScenarioReport(spec=spec, passed=passed, findings=findings, steps=steps)


def _run_withholding(spec: ScenarioSpec, base_dir: Path) -> ScenarioReport:
    hold = int(spec.params.get("hold_seconds", 31 * 24 * 3600))
    params = {
        "content_size": 384,
        "hold_seconds": hold,
        "expected_withholding": int(spec.params.get("expected_withholding", hold)),
        **spec.params,
    }
    desk = _desk_for(spec, base_dir)
    steps = []
    content = _content(desk, int(params["content_size"]))
    receipt = desk.gateway.submit_evidence(content)
    steps.append({"step": "submitted sealed evidence", "address": receipt.address.hex})
    desk.clock.advance(int(params["hold_seconds"]))
    steps.append({"step": "held sealed", "seconds": int(params["hold_seconds"])})
    voter_ids = [m.member_id for m in desk.ledger.voters]
    shares = desk.shares_for(receipt.address, voter_ids[: desk.ledger.quorum])
    disclosure = desk.gateway.escalate_to_public(
        receipt.address, receipt.release_token, shares, "court ordered disclosure"
    )
    steps.append(
        {"step": "escalated with quorum shares", "withholding_seconds": disclosure.withholding_seconds}
    )
    findings = {
        "withholding_seconds": disclosure.withholding_seconds,
        "expected_withholding": int(params["expected_withholding"]),
        "plaintext_digest_matches": digest(disclosure.plaintext).hex
        == receipt.payload_digest.hex,
        "now_public": desk.gateway.is_public(receipt.address),
    }
    passed = (
        disclosure.withholding_seconds == int(params["expected_withholding"])
        and findings["plaintext_digest_matches"]
        and findings["now_public"]
    )
    return ScenarioReport(spec=spec, passed=passed, findings=findings, steps=steps)


def _run_fabrication(spec: ScenarioSpec, base_dir: Path) -> ScenarioReport:
    params = {"content_size": 384, "gap_seconds": 86_400, "flips": 4, **spec.params}
    desk = _desk_for(spec, base_dir)
    steps = []
    original = _content(desk, int(params["content_size"]))
    first = desk.gateway.submit_evidence(original)
    steps.append({"step": "submitted original version", "address": first.address.hex})
    desk.clock.advance(int(params["gap_seconds"]))
    forged = bytearray(original)
    for _ in range(int(params["flips"])):
        i = desk.rng.randrange(len(forged))
        forged[i] ^= 1 + desk.rng.randrange(255)
    second = desk.gateway.submit_evidence(bytes(forged))
    steps.append({"step": "adversary submitted altered version", "address": second.address.hex})
    versions = sorted(
        (
            {
                "address": r.address.hex,
                "payload_digest": r.payload_digest.hex,
                "block_height": r.anchor.block_height,
                "block_timestamp": r.anchor.block_timestamp,
            }
            for r in (first, second)
        ),
        key=lambda v: v["block_height"],
    )
    steps.append({"step": "compared anchor order", "heights": [v["block_height"] for v in versions]})
    original_first = versions[0]["payload_digest"] == first.payload_digest.hex
    findings = {
        "versions": versions,
        "original_first": original_first,
        "distinct_payloads": first.payload_digest != second.payload_digest,
        "height_gap": versions[1]["block_height"] - versions[0]["block_height"],
    }
    passed = (
        original_first
        and findings["distinct_payloads"]
        and versions[0]["block_height"] < versions[1]["block_height"]
        and versions[0]["block_timestamp"] < versions[1]["block_timestamp"]
    )
    return ScenarioReport(spec=spec, passed=passed, findings=findings, steps=steps)


def _run_fee_dos(spec: ScenarioSpec, base_dir: Path) -> ScenarioReport:
    params = {
        "fee": "1.85",
        "pool": "100",
        "attempts": 60,
        "expected_accepted": 54,
        "spike_fee": "40",
        "spike_pool": "100",
        "spike_attempts": 5,
        "expected_spike_accepted": 2,
        **spec.params,
    }
    desk = _desk_for(
        spec,
        base_dir,
        fee=str(params["fee"]),
        fee_mode=FeeMode.POOL_PAYS.value,
        pool_fund=str(params["pool"]),
    )
    steps = []
    accepted = rejected = 0
    for i in range(int(params["attempts"])):
        try:
            desk.gateway.submit_evidence(_content(desk, 64))
            accepted += 1
        except (PoolDepleted, FeeUnpaid):
            rejected += 1
    steps.append(
        {"step": "flooded submissions at base fee", "accepted": accepted, "rejected": rejected}
    )
    pool_after_flood = str(desk.chain.pool_balance)
    desk.chain.fee_policy = FeePolicy(FeeMode.POOL_PAYS, Decimal(str(params["spike_fee"])))
    desk.chain.fund_pool(str(params["spike_pool"]))
    spike_accepted = spike_rejected = 0
    for i in range(int(params["spike_attempts"])):
        try:
            desk.gateway.submit_evidence(_content(desk, 64))
            spike_accepted += 1
        except (PoolDepleted, FeeUnpaid):
            spike_rejected += 1
    steps.append(
        {
            "step": "fee spiked, flooded again",
            "accepted": spike_accepted,
            "rejected": spike_rejected,
        }
    )
    findings = {
        "accepted": accepted,
        "rejected": rejected,
        "pool_after_flood": pool_after_flood,
        "spike_accepted": spike_accepted,
        "spike_rejected": spike_rejected,
        "pool_after_spike": str(desk.chain.pool_balance),
        "chain_problems": len(desk.chain.validate()),
    }
    passed = (
        accepted == int(params["expected_accepted"])
        and spike_accepted == int(params["expected_spike_accepted"])
        and findings["chain_problems"] == 0
    )
    return ScenarioReport(spec=spec, passed=passed, findings=findings, steps=steps)


_RUNNERS = {
    ScenarioKind.DESTRUCTION: _run_destruction,
    ScenarioKind.TAMPERING: _run_tampering,
    ScenarioKind.WITHHOLDING: _run_withholding,
    ScenarioKind.FABRICATION: _run_fabrication,
    ScenarioKind.FEE_DOS: _run_fee_dos,
}


def run_scenario(spec: ScenarioSpec, base_dir: Path) -> ScenarioReport:
    runner = _RUNNERS.get(spec.kind)
    if runner is None:
        raise ValueError(f"no runner for scenario kind {spec.kind}")
    return runner(spec, Path(base_dir))


def builtin_suite() -> list[ScenarioSpec]:
    return [
        ScenarioSpec(ScenarioKind.DESTRUCTION, "destruction-total-wipe", seed=101),
        ScenarioSpec(ScenarioKind.TAMPERING, "tampering-single-replica", seed=102),
        ScenarioSpec(ScenarioKind.WITHHOLDING, "withholding-one-month", seed=103),
        ScenarioSpec(ScenarioKind.FABRICATION, "fabrication-two-versions", seed=104),
        ScenarioSpec(ScenarioKind.FEE_DOS, "feedos-pool-exhaustion", seed=105),
    ]


def run_suite(specs: list[ScenarioSpec], base_dir: Path) -> SuiteReport:
    return SuiteReport(reports=[run_scenario(s, base_dir) for s in specs])
