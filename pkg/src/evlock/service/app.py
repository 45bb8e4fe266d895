"""FastAPI service exposing one desk over HTTP.

Every route is a thin translation layer: decode the wire shapes, call the
gateway or ledger, encode the result. Domain errors map to stable HTTP
statuses with a machine-readable error name, so clients can branch on
``error.name`` instead of parsing prose.
"""

from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .. import __version__
from ..crypto import DeletionCertificate, Digest
from ..errors import LockerError
from ..gateway import Visibility
from ..ledger import Vote, VoteDecision, verify_trail
from ..node import Desk
from . import schemas

_STATUS_BY_ERROR = {
    "NotFound": 404,
    "ContentUnavailable": 404,
    "DuplicateVote": 409,
    "AlreadyDeleted": 409,
    "AlreadyPublic": 409,
    "BadSignature": 403,
    "RoleForbidden": 403,
    "TokenMismatch": 403,
    "CertificateIncomplete": 403,
    "FeeUnpaid": 402,
    "PoolDepleted": 402,
}
_DEFAULT_STATUS = 400


def _address(value: str) -> Digest:
    try:
        return Digest.from_hex(value)
    except ValueError:
        raise HTTPException(status_code=400, detail="malformed address") from None


def _hex_bytes(value: str, what: str) -> bytes:
    try:
        return bytes.fromhex(value)
    except ValueError:
        raise HTTPException(status_code=400, detail=f"malformed hex in {what}") from None


def _b64_bytes(value: str, what: str) -> bytes:
    try:
        return base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(status_code=400, detail=f"malformed base64 in {what}") from None


def create_app(desk: Desk) -> FastAPI:
    app = FastAPI(title="evidence desk", version=__version__)
    # The browser client is served as static files from another origin.
    # Submissions are anonymous and votes carry their own signatures, so
    # there is no cookie or ambient credential for a cross-origin page to
    # ride on; open CORS widens nothing.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(LockerError)
    async def locker_error_handler(request, exc: LockerError):
        status = _STATUS_BY_ERROR.get(exc.name, _DEFAULT_STATUS)
        return JSONResponse(
            status_code=status,
            content={"error": {"name": exc.name, "detail": str(exc)}},
        )

    def _tally(address: Digest) -> schemas.TallyModel:
        return schemas.TallyModel(**desk.ledger.tally(address).to_dict())

    def _integrity(address: Digest) -> schemas.VerifyResponse:
        return schemas.VerifyResponse(**desk.gateway.full_verify(address).to_dict())

    @app.post("/evidence", response_model=schemas.SubmitResponse, status_code=201)
    def submit_evidence(req: schemas.SubmitRequest) -> schemas.SubmitResponse:
        content = _b64_bytes(req.content_b64, "content_b64")
        try:
            visibility = Visibility(req.visibility)
        except ValueError:
            raise HTTPException(status_code=400, detail="unknown visibility") from None
        receipt = desk.gateway.submit_evidence(content, visibility=visibility)
        return schemas.SubmitResponse(**receipt.to_dict())

    @app.get("/evidence", response_model=schemas.EvidenceListResponse)
    def list_evidence() -> schemas.EvidenceListResponse:
        items = []
        for addr in desk.gateway.addresses():
            record = desk.gateway.record_for(addr)
            tally = _tally(addr)
            items.append(
                schemas.EvidenceSummary(
                    address=addr.hex,
                    status=tally.status,
                    tally=tally,
                    visibility=record.visibility.value,
                    public=record.public,
                    block_height=record.receipt.block_height,
                )
            )
        return schemas.EvidenceListResponse(evidence=items)

    @app.get("/evidence/{address}", response_model=schemas.EvidenceResponse)
    def get_evidence(address: str) -> schemas.EvidenceResponse:
        addr = _address(address)
        record = desk.gateway.record_for(addr)
        content_b64 = None
        if record.public and record.plaintext is not None:
            content_b64 = base64.b64encode(record.plaintext).decode("ascii")
        return schemas.EvidenceResponse(
            address=addr.hex,
            metadata=record.metadata,
            tally=_tally(addr),
            integrity=_integrity(addr),
            visibility=record.visibility.value,
            public=record.public,
            content_b64=content_b64,
        )

    @app.get("/evidence/{address}/verify", response_model=schemas.VerifyResponse)
    def verify_evidence(address: str) -> schemas.VerifyResponse:
        return _integrity(_address(address))

    @app.get("/evidence/{address}/envelope")
    def get_envelope(address: str) -> dict:
        # The sealed envelope itself; members need it to unwrap their own
        # key shares locally. Useless without a quorum of member keys.
        addr = _address(address)
        record = desk.gateway.record_for(addr)
        if record.visibility != Visibility.SEALED:
            raise HTTPException(status_code=404, detail="record is not sealed")
        envelope = desk.store.get(addr)
        return {"address": addr.hex, "envelope_b64": base64.b64encode(envelope).decode("ascii")}

    @app.get("/evidence/{address}/trail", response_model=schemas.TrailResponse)
    def get_trail(address: str) -> schemas.TrailResponse:
        trail = desk.ledger.audit_trail(_address(address))
        return schemas.TrailResponse(
            address=trail.address.hex,
            status=trail.status.value,
            events=list(trail.events),
            links=[l.hex for l in trail.links],
            verified=verify_trail(trail),
        )

    @app.post("/evidence/{address}/votes", response_model=schemas.VoteResponse)
    def cast_vote(address: str, req: schemas.VoteRequest) -> schemas.VoteResponse:
        addr = _address(address)
        try:
            decision = VoteDecision(req.decision)
        except ValueError:
            raise HTTPException(status_code=400, detail="unknown decision") from None
        vote = Vote(
            member_id=req.member_id,
            decision=decision,
            rationale=req.rationale,
            signature=_hex_bytes(req.signature, "signature"),
        )
        tally = desk.ledger.cast_vote(addr, vote)
        return schemas.VoteResponse(tally=schemas.TallyModel(**tally.to_dict()))

    @app.post("/evidence/{address}/escalate", response_model=schemas.EscalateResponse)
    def escalate(address: str, req: schemas.EscalateRequest) -> schemas.EscalateResponse:
        addr = _address(address)
        token = _hex_bytes(req.release_token, "release_token")
        shares = [
            (item.member_id, _hex_bytes(item.share, "share")) for item in req.shares
        ]
        disclosure = desk.gateway.escalate_to_public(addr, token, shares, req.reason)
        return schemas.EscalateResponse(
            address=addr.hex,
            disclosed_at=disclosure.disclosed_at,
            withholding_seconds=disclosure.withholding_seconds,
            txid=disclosure.txid.hex,
            plaintext_b64=base64.b64encode(disclosure.plaintext).decode("ascii"),
        )

    @app.post("/evidence/{address}/delete", response_model=schemas.DeleteResponse)
    def apply_deletion(address: str, req: schemas.DeleteRequest) -> schemas.DeleteResponse:
        addr = _address(address)
        try:
            cert = DeletionCertificate.from_dict(req.certificate)
        except (KeyError, ValueError):
            raise HTTPException(status_code=400, detail="malformed certificate") from None
        if cert.address != addr:
            raise HTTPException(
                status_code=400, detail="certificate covers a different address"
            )
        applied = desk.gateway.apply_deletion(cert)
        return schemas.DeleteResponse(
            address=addr.hex,
            removed_from=list(applied.outcome.removed_from),
            txid=applied.txid.hex,
        )

    @app.post("/evidence/{address}/outcome", response_model=schemas.OutcomeResponse)
    def link_outcome(address: str, req: schemas.OutcomeRequest) -> schemas.OutcomeResponse:
        addr = _address(address)
        try:
            outcome_digest = Digest.from_hex(req.outcome_digest)
        except ValueError:
            raise HTTPException(
                status_code=400, detail="malformed hex in outcome_digest"
            ) from None
        txid = desk.gateway.link_outcome(addr, req.case_ref, outcome_digest)
        return schemas.OutcomeResponse(address=addr.hex, case_ref=req.case_ref, txid=txid.hex)

    @app.get("/chain/blocks/{height}", response_model=schemas.BlockResponse)
    def get_block(height: int) -> schemas.BlockResponse:
        block = desk.chain.block_at(height)
        return schemas.BlockResponse(
            height=block.height,
            parent=block.parent.hex,
            timestamp=block.timestamp,
            merkle_root=block.merkle_root.hex,
            header_digest=block.header_digest.hex,
            txs=[schemas.TxModel(**t.to_dict()) for t in block.txs],
        )

    @app.get("/consortium/members", response_model=schemas.MembersResponse)
    def consortium_members() -> schemas.MembersResponse:
        policy = desk.gateway.default_policy()
        return schemas.MembersResponse(
            members=[schemas.MemberModel(**m.to_dict()) for m in desk.ledger.members],
            quorum=desk.ledger.quorum,
            threshold_k=policy.k,
            threshold_n=policy.n,
        )

    @app.get("/status")
    def status() -> dict:
        return {
            "version": __version__,
            "clock": desk.clock.now,
            "chain_height": desk.chain.height,
            "evidence_count": len(desk.gateway.addresses()),
            "pool_balance": str(desk.chain.pool_balance),
            "fee": str(desk.chain.fee_policy.fee),
            "fee_mode": desk.chain.fee_policy.mode.value,
        }

    return app
