"""Command line client: submit, verify, vote, escalate, delete, drill.

Everything that talks to a running desk goes over HTTP; the only local
work is what must never leave the caller's machine: generating keys,
signing votes and deletion certificates, and unwrapping key shares.
Scenario drills run fully local with their own throwaway desks.

Exit codes: 0 on success, 1 when the desk refuses or a check fails,
2 for usage errors.
"""

from __future__ import annotations

import argparse
import base64
import json
import random
import sys
import tempfile
from pathlib import Path
from typing import Optional

import httpx

from .crypto import (
    DeletionCertificate,
    Digest,
    EncryptedEnvelope,
    digest,
    keygen,
    unwrap_share,
)
from .ledger import MemberRole, Vote, VoteDecision
from .node import DeskConfig, build_desk, load_keypair, save_keypair
from .scenarios import (
    ScenarioKind,
    ScenarioSpec,
    builtin_suite,
    render_text,
    run_scenario,
    run_suite,
)

DEFAULT_URL = "http://127.0.0.1:8787"

_KIND_BY_NAME = {
    "destruction": ScenarioKind.DESTRUCTION,
    "tampering": ScenarioKind.TAMPERING,
    "withholding": ScenarioKind.WITHHOLDING,
    "fabrication": ScenarioKind.FABRICATION,
    "feedos": ScenarioKind.FEE_DOS,
}


class DomainError(Exception):
    """Server-side refusal or failed check; exits 1."""


def _call(client: httpx.Client, method: str, path: str, **kwargs) -> dict:
    response = client.request(method, path, **kwargs)
    if response.status_code >= 400:
        try:
            err = response.json()["error"]
            message = f"{err['name']}: {err['detail']}"
        except Exception:
            message = f"HTTP {response.status_code}: {response.text[:200]}"
        raise DomainError(message)
    return response.json()


def _emit(args, payload: dict, lines: list[str]) -> None:
    if args.output == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _read_content(args, parser: argparse.ArgumentParser) -> bytes:
    if bool(args.file) == bool(args.text):
        parser.error("provide exactly one of --file or --text")
    if args.file:
        return Path(args.file).read_bytes()
    return args.text.encode("utf-8")


# -- commands ---------------------------------------------------------------


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    if args.config:
        config = DeskConfig.load(Path(args.config))
    else:
        config = DeskConfig()
    if config.data_dir is None:
        config.data_dir = args.data_dir
    desk = build_desk(config)
    app = create_app(desk)
    print(f"desk listening on {args.host}:{args.port}, data in {config.data_dir}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_keys_gen(args) -> int:
    rng = random.Random(args.seed) if args.seed is not None else None
    key = keygen(args.label, rng)
    save_keypair(Path(args.out), key, args.label, MemberRole(args.role))
    payload = {
        "member_id": key.key_id,
        "public_key": key.public_key.hex(),
        "path": str(args.out),
    }
    _emit(
        args,
        payload,
        [
            f"member id: {key.key_id}",
            f"public key: {key.public_key.hex()}",
            f"key file written to {args.out}",
        ],
    )
    return 0


def cmd_submit(args, client: httpx.Client, parser) -> int:
    content = _read_content(args, parser)
    body = {
        "content_b64": base64.b64encode(content).decode("ascii"),
        "visibility": "Public" if args.public else "Sealed",
    }
    receipt = _call(client, "POST", "/evidence", json=body)
    lines = [
        f"address: {receipt['address']}",
        f"payload digest: {receipt['payload_digest']}",
        f"anchored in block {receipt['anchor']['block_height']} (tx {receipt['txid'][:16]})",
        f"visibility: {receipt['visibility']}",
        "",
        "RELEASE TOKEN (shown once, store it safely):",
        f"  {receipt['release_token']}",
    ]
    if receipt.get("duplicate_of"):
        lines.append(f"note: duplicate of earlier anchor tx {receipt['duplicate_of'][:16]}")
    _emit(args, receipt, lines)
    return 0


def cmd_verify(args, client: httpx.Client) -> int:
    report = _call(client, "GET", f"/evidence/{args.address}/verify")
    lines = [
        f"address: {report['address']}",
        f"verdict: {report['verdict']}",
        f"replicas: {report['matches']} match, {report['mismatches']} mismatch, "
        f"{report['missing']} missing, {report['unreachable']} unreachable",
        f"anchored: {report['anchored']}"
        + (f" at height {report['anchor_height']}" if report["anchor_height"] is not None else ""),
    ]
    _emit(args, report, lines)
    return 0 if report["verdict"] == "IntegrityOk" else 1


def cmd_trail(args, client: httpx.Client) -> int:
    trail = _call(client, "GET", f"/evidence/{args.address}/trail")
    lines = [f"address: {trail['address']}", f"status: {trail['status']}"]
    for event, link in zip(trail["events"], trail["links"]):
        summary = {k: v for k, v in event.items() if k != "kind"}
        lines.append(f"  [{event['kind']}] {json.dumps(summary, sort_keys=True)}")
        lines.append(f"    link {link[:16]}")
    lines.append(f"trail verified: {trail['verified']}")
    _emit(args, trail, lines)
    return 0 if trail["verified"] else 1


def cmd_vote(args, client: httpx.Client) -> int:
    key, _, _ = load_keypair(Path(args.key))
    vote = Vote.create(
        key, Digest.from_hex(args.address), VoteDecision(args.decision), args.rationale
    )
    body = {
        "member_id": vote.member_id,
        "decision": args.decision,
        "rationale": args.rationale,
        "signature": vote.signature.hex(),
    }
    result = _call(client, "POST", f"/evidence/{args.address}/votes", json=body)
    tally = result["tally"]
    _emit(
        args,
        result,
        [
            f"vote recorded for {vote.member_id[:16]}",
            f"tally: {tally['accepts']} accept / {tally['rejects']} reject "
            f"(quorum {tally['quorum']})",
            f"status: {tally['status']}",
        ],
    )
    return 0


def cmd_escalate(args, client: httpx.Client) -> int:
    envelope_page = _call(client, "GET", f"/evidence/{args.address}/envelope")
    envelope = EncryptedEnvelope.from_bytes(
        base64.b64decode(envelope_page["envelope_b64"])
    )
    shares = []
    for key_path in args.key:
        key, _, _ = load_keypair(Path(key_path))
        member_id, share = unwrap_share(envelope, key)
        shares.append({"member_id": member_id, "share": share.hex()})
    body = {
        "release_token": args.token,
        "reason": args.reason,
        "shares": shares,
    }
    result = _call(client, "POST", f"/evidence/{args.address}/escalate", json=body)
    plaintext = base64.b64decode(result["plaintext_b64"])
    lines = [
        f"disclosed at {result['disclosed_at']} after {result['withholding_seconds']}s sealed",
        f"escalation tx: {result['txid'][:16]}",
        f"plaintext digest: {digest(plaintext).hex}",
    ]
    if args.out:
        Path(args.out).write_bytes(plaintext)
        lines.append(f"plaintext written to {args.out}")
    _emit(args, result, lines)
    return 0


def _order_digest(args, parser) -> str:
    if bool(args.court_order) == bool(args.court_order_digest):
        parser.error("provide exactly one of --court-order or --court-order-digest")
    if args.court_order:
        return digest(Path(args.court_order).read_bytes()).hex
    return args.court_order_digest


def cmd_cert_sign(args, parser) -> int:
    order_hex = _order_digest(args, parser)
    if args.extend:
        cert = DeletionCertificate.from_dict(
            json.loads(Path(args.extend).read_text(encoding="utf-8"))
        )
        if cert.address.hex != args.address or cert.court_order_digest.hex != order_hex:
            raise DomainError("existing certificate covers different address or order")
    else:
        cert = DeletionCertificate(
            address=Digest.from_hex(args.address),
            court_order_digest=Digest.from_hex(order_hex),
        )
    key, _, _ = load_keypair(Path(args.key))
    cert = cert.with_signature(key)
    Path(args.out).write_text(
        json.dumps(cert.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _emit(
        args,
        cert.to_dict(),
        [
            f"signed by {key.key_id[:16]} ({len(cert.signatures)} signature(s) collected)",
            f"certificate written to {args.out}",
        ],
    )
    return 0


def cmd_cert_assemble(args) -> int:
    certs = [
        DeletionCertificate.from_dict(json.loads(Path(p).read_text(encoding="utf-8")))
        for p in args.parts
    ]
    base = certs[0]
    merged: dict[str, bytes] = dict(base.signatures)
    for cert in certs[1:]:
        if cert.address != base.address or cert.court_order_digest != base.court_order_digest:
            raise DomainError("certificates cover different addresses or orders")
        merged.update(dict(cert.signatures))
    combined = DeletionCertificate(
        address=base.address,
        court_order_digest=base.court_order_digest,
        signatures=tuple(sorted(merged.items())),
    )
    Path(args.out).write_text(
        json.dumps(combined.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _emit(
        args,
        combined.to_dict(),
        [
            f"merged {len(certs)} parts into {len(combined.signatures)} signatures",
            f"certificate written to {args.out}",
        ],
    )
    return 0


def cmd_cert_apply(args, client: httpx.Client) -> int:
    cert = json.loads(Path(args.cert).read_text(encoding="utf-8"))
    result = _call(
        client, "POST", f"/evidence/{args.address}/delete", json={"certificate": cert}
    )
    _emit(
        args,
        result,
        [
            f"deleted from nodes: {', '.join(result['removed_from'])}",
            f"deletion tx: {result['txid'][:16]}",
        ],
    )
    return 0


def cmd_outcome_link(args, client: httpx.Client, parser) -> int:
    if bool(args.outcome_file) == bool(args.outcome_digest):
        parser.error("provide exactly one of --outcome-file or --outcome-digest")
    outcome_hex = (
        digest(Path(args.outcome_file).read_bytes()).hex
        if args.outcome_file
        else args.outcome_digest
    )
    result = _call(
        client,
        "POST",
        f"/evidence/{args.address}/outcome",
        json={"case_ref": args.case_ref, "outcome_digest": outcome_hex},
    )
    _emit(
        args,
        result,
        [f"outcome {args.case_ref} linked (tx {result['txid'][:16]})"],
    )
    return 0


def _scenario_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        if "=" not in pair:
            raise DomainError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        params[key] = int(value) if value.lstrip("-").isdigit() else value
    return params


def cmd_scenario_run(args) -> int:
    if args.spec:
        spec = ScenarioSpec.from_dict(
            json.loads(Path(args.spec).read_text(encoding="utf-8"))
        )
    else:
        kind = _KIND_BY_NAME[args.kind]
        spec = ScenarioSpec(
            kind=kind,
            name=args.name or f"{args.kind}-run",
            seed=args.seed,
            params=_scenario_params(args.set or []),
        )
    workdir = Path(args.dir) if args.dir else Path(tempfile.mkdtemp(prefix="evlock-drill-"))
    report = run_scenario(spec, workdir)
    if args.output == "json":
        print(report.canonical_bytes().decode("utf-8"))
    else:
        print(render_text(report))
    return 0 if report.passed else 1


def cmd_scenario_suite(args) -> int:
    workdir = Path(args.dir) if args.dir else Path(tempfile.mkdtemp(prefix="evlock-suite-"))
    suite = run_suite(builtin_suite(), workdir)
    if args.output == "json":
        print(suite.canonical_bytes().decode("utf-8"))
    else:
        for report in suite.reports:
            print(render_text(report))
            print()
        summary = suite.to_dict()
        print(f"{summary['passed']}/{summary['total']} scenarios passed")
    return 0 if suite.passed else 1


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evlock", description="anonymous evidence locker client"
    )
    parser.add_argument(
        "--node-url", default=DEFAULT_URL, help=f"desk service url (default {DEFAULT_URL})"
    )
    parser.add_argument(
        "--output", choices=["text", "json"], default="text", help="output format"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    node = sub.add_parser("node", help="run a desk").add_subparsers(
        dest="subcommand", required=True
    )
    serve = node.add_parser("serve", help="serve a desk over http")
    serve.add_argument("--config", help="desk config json")
    serve.add_argument("--data-dir", default="./evlock-data")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8787)

    keys = sub.add_parser("keys", help="key management").add_subparsers(
        dest="subcommand", required=True
    )
    gen = keys.add_parser("gen", help="generate a member keypair")
    gen.add_argument("--label", required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--role", choices=["Voter", "Observer"], default="Voter")
    gen.add_argument("--seed", type=int)

    submit = sub.add_parser("submit", help="submit evidence")
    submit.add_argument("--file")
    submit.add_argument("--text")
    submit.add_argument("--public", action="store_true", help="store as plaintext")

    verify = sub.add_parser("verify", help="verify replicas and anchor")
    verify.add_argument("address")

    trail = sub.add_parser("trail", help="show the audit trail")
    trail.add_argument("address")

    vote = sub.add_parser("vote", help="sign and cast a vetting vote")
    vote.add_argument("address")
    vote.add_argument("--key", required=True, help="member key file")
    vote.add_argument("--decision", choices=["Accept", "Reject"], required=True)
    vote.add_argument("--rationale", default="")

    escalate = sub.add_parser("escalate", help="disclose with quorum shares")
    escalate.add_argument("address")
    escalate.add_argument("--token", required=True, help="release token hex")
    escalate.add_argument(
        "--key", action="append", required=True, help="member key file (repeat for quorum)"
    )
    escalate.add_argument("--reason", default="")
    escalate.add_argument("--out", help="write disclosed plaintext here")

    cert = sub.add_parser("delete-cert", help="deletion certificates").add_subparsers(
        dest="subcommand", required=True
    )
    cert_sign = cert.add_parser("sign", help="sign (or extend) a certificate")
    cert_sign.add_argument("--address", required=True)
    cert_sign.add_argument("--court-order", help="court order file to digest")
    cert_sign.add_argument("--court-order-digest", help="court order digest hex")
    cert_sign.add_argument("--key", required=True)
    cert_sign.add_argument("--extend", help="existing partial certificate to add to")
    cert_sign.add_argument("--out", required=True)
    cert_asm = cert.add_parser("assemble", help="merge partial certificates")
    cert_asm.add_argument("parts", nargs="+")
    cert_asm.add_argument("--out", required=True)
    cert_apply = cert.add_parser("apply", help="apply a full certificate")
    cert_apply.add_argument("address")
    cert_apply.add_argument("--cert", required=True)

    outcome = sub.add_parser("outcome", help="case outcomes").add_subparsers(
        dest="subcommand", required=True
    )
    link = outcome.add_parser("link", help="anchor a case outcome")
    link.add_argument("address")
    link.add_argument("--case-ref", required=True)
    link.add_argument("--outcome-file")
    link.add_argument("--outcome-digest")

    scenario = sub.add_parser("scenario", help="adversarial drills").add_subparsers(
        dest="subcommand", required=True
    )
    run = scenario.add_parser("run", help="run one scenario")
    run.add_argument("kind", nargs="?", choices=sorted(_KIND_BY_NAME))
    run.add_argument("--spec", help="scenario spec json file")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--name")
    run.add_argument("--set", action="append", metavar="KEY=VALUE")
    run.add_argument("--dir", help="work directory")
    suite = scenario.add_parser("suite", help="run the built-in drill suite")
    suite.add_argument("--dir", help="work directory")

    return parser


def main(argv: Optional[list[str]] = None, http_client: Optional[httpx.Client] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    needs_client = args.command in {"submit", "verify", "trail", "vote", "escalate"} or (
        args.command in {"delete-cert", "outcome"}
        and getattr(args, "subcommand", "") in {"apply", "link"}
    )
    client = None
    own_client = False
    if needs_client:
        client = http_client
        if client is None:
            client = httpx.Client(base_url=args.node_url, timeout=30.0)
            own_client = True

    try:
        if args.command == "node":
            return cmd_serve(args)
        if args.command == "keys":
            return cmd_keys_gen(args)
        if args.command == "submit":
            return cmd_submit(args, client, parser)
        if args.command == "verify":
            return cmd_verify(args, client)
        if args.command == "trail":
            return cmd_trail(args, client)
        if args.command == "vote":
            return cmd_vote(args, client)
        if args.command == "escalate":
            return cmd_escalate(args, client)
        if args.command == "delete-cert":
            if args.subcommand == "sign":
                return cmd_cert_sign(args, parser)
            if args.subcommand == "assemble":
                return cmd_cert_assemble(args)
            return cmd_cert_apply(args, client)
        if args.command == "outcome":
            return cmd_outcome_link(args, client, parser)
        if args.command == "scenario":
            if args.subcommand == "run":
                if not args.spec and not args.kind:
                    parser.error("scenario run needs a kind or --spec")
                return cmd_scenario_run(args)
            return cmd_scenario_suite(args)
        parser.error(f"unknown command {args.command}")
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except httpx.HTTPError as exc:
        print(f"error: cannot reach desk service: {exc}", file=sys.stderr)
        return 1
    finally:
        if own_client and client is not None:
            client.close()
    return 0
