"""Wire shapes for the desk service: requests in, responses out.

Binary fields travel as base64 (content, plaintext) or hex (digests,
tokens, signatures, shares), matching how they appear in receipts and
anchored metadata.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class SubmitRequest(BaseModel):
    content_b64: str = Field(min_length=1)
    visibility: str = "Sealed"


class AnchorModel(BaseModel):
    txid: str
    block_height: int
    block_digest: str
    block_timestamp: int
    merkle_root: str
    tx_index: int
    siblings: list[str]


class SubmitResponse(BaseModel):
    address: str
    payload_digest: str
    release_token: str
    txid: str
    anchor: AnchorModel
    visibility: str
    duplicate_of: Optional[str] = None


class TallyModel(BaseModel):
    status: str
    accepts: int
    rejects: int
    quorum: int


class VerifyResponse(BaseModel):
    address: str
    verdict: str
    matches: int
    mismatches: int
    missing: int
    unreachable: int
    anchored: bool
    anchor_height: Optional[int] = None
    checked_at: int


class EvidenceResponse(BaseModel):
    address: str
    metadata: dict
    tally: TallyModel
    integrity: VerifyResponse
    visibility: str
    public: bool
    content_b64: Optional[str] = None


class TrailResponse(BaseModel):
    address: str
    status: str
    events: list[dict]
    links: list[str]
    verified: bool


class VoteRequest(BaseModel):
    member_id: str
    decision: str
    rationale: str = ""
    signature: str


class VoteResponse(BaseModel):
    tally: TallyModel


class ShareItem(BaseModel):
    member_id: str
    share: str


class EscalateRequest(BaseModel):
    release_token: str
    reason: str = ""
    shares: list[ShareItem] = Field(default_factory=list)


class EscalateResponse(BaseModel):
    address: str
    disclosed_at: int
    withholding_seconds: int
    txid: str
    plaintext_b64: str


class DeleteRequest(BaseModel):
    certificate: dict


class DeleteResponse(BaseModel):
    address: str
    removed_from: list[str]
    txid: str


class OutcomeRequest(BaseModel):
    case_ref: str
    outcome_digest: str


class OutcomeResponse(BaseModel):
    address: str
    case_ref: str
    txid: str


class EvidenceSummary(BaseModel):
    address: str
    status: str
    tally: TallyModel
    visibility: str
    public: bool
    block_height: int


class EvidenceListResponse(BaseModel):
    evidence: list[EvidenceSummary]


class TxModel(BaseModel):
    txid: str
    kind: str
    payload: dict


class BlockResponse(BaseModel):
    height: int
    parent: str
    timestamp: int
    merkle_root: str
    header_digest: str
    txs: list[TxModel]


class MemberModel(BaseModel):
    member_id: str
    display_name: str
    role: str


class MembersResponse(BaseModel):
    members: list[MemberModel]
    quorum: int
    threshold_k: int
    threshold_n: int


class ErrorBody(BaseModel):
    name: str
    detail: str
