"""Hashing, canonical serialization, signatures, and the k-of-n consortium envelope.

Bit-exact choices, fixed system-wide so every node agrees on addresses and
signatures: SHA-256 over raw bytes, 64-char lowercase hex rendering, Ed25519
signatures, canonical text objects encoded as UTF-8 JSON with bytewise-sorted
keys and no insignificant whitespace.

All functions accepting an ``rng`` produce deterministic output when given a
seeded ``random.Random``; that mode exists for reproducible simulation runs
only. Without it, key material comes from the OS CSPRNG.
"""

from __future__ import annotations

import base64
import hashlib
import json
import random
import secrets
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives import hashes

from .errors import IntegrityFailure, QuorumNotMet, ShareInvalid

DIGEST_SIZE = 32

_GCM_NONCE_SIZE = 12
_SHARE_WRAP_INFO = b"evlock/share-wrap/v1"


# ---------------------------------------------------------------------------
# Digests and canonical encoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Digest:
    """A 32-byte SHA-256 value, comparable and usable as a dict key."""

    data: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.data, bytes) or len(self.data) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} raw bytes")

    @property
    def hex(self) -> str:
        return self.data.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        if len(text) != DIGEST_SIZE * 2 or text != text.lower():
            raise ValueError("digest hex must be 64 lowercase hex chars")
        return cls(bytes.fromhex(text))

    def __str__(self) -> str:
        return self.hex


def digest(data: bytes) -> Digest:
    """SHA-256 of raw bytes; the identity of content throughout the system."""
    return Digest(hashlib.sha256(data).digest())


def _check_canonical_value(value: Any, path: str) -> None:
    if value is None or isinstance(value, (str, bool, int)):
        return
    if isinstance(value, float):
        raise ValueError(f"float at {path} has no canonical text form")
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check_canonical_value(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise ValueError(f"non-string key at {path}")
            _check_canonical_value(item, f"{path}.{key}")
        return
    raise ValueError(f"value of type {type(value).__name__} at {path} is not canonicalizable")


def canonical_json_bytes(value: Any) -> bytes:
    """Canonical text-object encoding: sorted keys, minimal separators, UTF-8.

    Key order is bytewise (UTF-8 preserves code-point order), so two maps with
    equal contents always encode to identical bytes. Floats are rejected
    because their text form is not canonical.
    """
    _check_canonical_value(value, "$")
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def canonical_metadata_bytes(metadata: Mapping[str, str]) -> bytes:
    """Canonical bytes for a string-to-string metadata map.

    Independent of insertion order; round-trips through the JSON parser to the
    same map. Non-text keys or values are rejected.
    """
    for key, value in metadata.items():
        if not isinstance(key, str) or not isinstance(value, str):
            raise ValueError("metadata keys and values must be text")
    return canonical_json_bytes(dict(metadata))


# ---------------------------------------------------------------------------
# Key pairs and signatures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 pair; ``owner_label`` stays empty for anonymous actors."""

    public_key: bytes
    secret_key: bytes
    owner_label: str = ""

    @property
    def key_id(self) -> str:
        return key_id_for(self.public_key)


def key_id_for(public_key: bytes) -> str:
    """Stable identifier of a public key: hex digest of its raw bytes."""
    return digest(public_key).hex


def _rand_bytes(rng: Optional[random.Random], n: int) -> bytes:
    if rng is None:
        return secrets.token_bytes(n)
    return rng.randbytes(n)


def keygen(owner_label: str = "", rng: Optional[random.Random] = None) -> KeyPair:
    """Fresh Ed25519 pair. Seeded ``rng`` gives reproducible keys for simulation."""
    seed = _rand_bytes(rng, 32)
    private = Ed25519PrivateKey.from_private_bytes(seed)
    return KeyPair(
        public_key=private.public_key().public_bytes_raw(),
        secret_key=seed,
        owner_label=owner_label,
    )


def sign(message: bytes, key: KeyPair) -> bytes:
    if len(key.secret_key) != 32:
        raise ValueError("malformed secret key")
    private = Ed25519PrivateKey.from_private_bytes(key.secret_key)
    return private.sign(message)


def verify_sig(message: bytes, signature: bytes, public_key: bytes) -> bool:
    """True iff the signature is valid; malformed inputs yield False, never raise."""
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


# ---------------------------------------------------------------------------
# GF(256) secret sharing (AES field, 0x11B)
# ---------------------------------------------------------------------------

_GF_EXP = [0] * 512
_GF_LOG = [0] * 256


def _build_gf_tables() -> None:
    # Generator 0x03: 0x02 is not primitive in this field.
    x = 1
    for i in range(255):
        _GF_EXP[i] = x
        _GF_LOG[x] = i
        x ^= x << 1
        if x & 0x100:
            x ^= 0x11B
    for i in range(255, 512):
        _GF_EXP[i] = _GF_EXP[i - 255]


_build_gf_tables()


def _gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _GF_EXP[_GF_LOG[a] + _GF_LOG[b]]


def _gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("no inverse for 0 in GF(256)")
    return _GF_EXP[255 - _GF_LOG[a]]


def _poly_eval(coeffs: Sequence[int], x: int) -> int:
    # Horner, highest coefficient first
    acc = 0
    for c in reversed(coeffs):
        acc = _gf_mul(acc, x) ^ c
    return acc


def split_secret(
    secret: bytes, k: int, n: int, rng: Optional[random.Random] = None
) -> list[bytes]:
    """Shamir-split ``secret`` into n shares recoverable by any k of them.

    Share layout: one x-coordinate byte (1..n) followed by one y byte per
    secret byte.
    """
    if not 1 <= k <= n <= 255:
        raise ValueError("threshold must satisfy 1 <= k <= n <= 255")
    coeff_rows = [
        bytes([b]) + _rand_bytes(rng, k - 1) for b in secret
    ]  # degree k-1 polynomial per byte, constant term = secret byte
    shares = []
    for x in range(1, n + 1):
        ys = bytes(_poly_eval(row, x) for row in coeff_rows)
        shares.append(bytes([x]) + ys)
    return shares


def combine_shares(shares: Sequence[bytes]) -> bytes:
    """Lagrange-interpolate the secret at x=0 from k or more distinct shares."""
    if not shares:
        raise ValueError("no shares given")
    xs = [s[0] for s in shares]
    if len(set(xs)) != len(xs):
        raise ValueError("shares must have distinct x coordinates")
    length = len(shares[0]) - 1
    if any(len(s) - 1 != length for s in shares):
        raise ValueError("shares must be equally sized")
    secret = bytearray(length)
    for i in range(length):
        acc = 0
        for j, share in enumerate(shares):
            num, den = 1, 1
            for m, other in enumerate(shares):
                if m == j:
                    continue
                num = _gf_mul(num, other[0])
                den = _gf_mul(den, other[0] ^ share[0])
            acc ^= _gf_mul(share[1 + i], _gf_mul(num, _gf_inv(den)))
        secret[i] = acc
    return bytes(secret)


# ---------------------------------------------------------------------------
# Ed25519 -> X25519 bridging for share wrapping
# ---------------------------------------------------------------------------

_P25519 = 2**255 - 19


def _ed25519_pub_to_x25519(public_key: bytes) -> X25519PublicKey:
    # Birational map from the Edwards y-coordinate to the Montgomery
    # u-coordinate: u = (1+y)/(1-y) mod p. Sign bit of x is irrelevant.
    y = int.from_bytes(public_key, "little") & ((1 << 255) - 1)
    if y >= _P25519 or y == 1:
        raise ValueError("public key not convertible")
    u = (1 + y) * pow((1 - y) % _P25519, -1, _P25519) % _P25519
    return X25519PublicKey.from_public_bytes(u.to_bytes(32, "little"))


def _ed25519_seed_to_x25519(secret_key: bytes) -> X25519PrivateKey:
    # Same clamped scalar Ed25519 derives from the seed; X25519 re-clamps it.
    h = hashlib.sha512(secret_key).digest()
    s = bytearray(h[:32])
    s[0] &= 248
    s[31] &= 127
    s[31] |= 64
    return X25519PrivateKey.from_private_bytes(bytes(s))


def _wrap_key(shared: bytes, ephemeral_pub: bytes, recipient_pub: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(),
        length=32,
        salt=ephemeral_pub + recipient_pub,
        info=_SHARE_WRAP_INFO,
    ).derive(shared)


def _wrap_share(share: bytes, recipient_pub: bytes, rng: Optional[random.Random]) -> bytes:
    ephemeral = X25519PrivateKey.from_private_bytes(_rand_bytes(rng, 32))
    eph_pub = ephemeral.public_key().public_bytes_raw()
    shared = ephemeral.exchange(_ed25519_pub_to_x25519(recipient_pub))
    key = _wrap_key(shared, eph_pub, recipient_pub)
    # Fresh ephemeral per wrap, so a fixed nonce is safe.
    return eph_pub + AESGCM(key).encrypt(b"\x00" * _GCM_NONCE_SIZE, share, None)


def unwrap_share(envelope: "EncryptedEnvelope", member: KeyPair) -> tuple[str, bytes]:
    """Recover this member's raw share from the envelope with their secret key.

    Returns (member key id, share bytes) ready for ``decrypt_with_quorum``.
    """
    member_id = member.key_id
    for key_id, wrapped in envelope.wrapped_shares:
        if key_id == member_id:
            break
    else:
        raise ShareInvalid(f"envelope holds no share for key {member_id[:12]}")
    eph_pub, sealed = wrapped[:32], wrapped[32:]
    private = _ed25519_seed_to_x25519(member.secret_key)
    shared = private.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    key = _wrap_key(shared, eph_pub, member.public_key)
    try:
        share = AESGCM(key).decrypt(b"\x00" * _GCM_NONCE_SIZE, sealed, None)
    except Exception as exc:
        raise ShareInvalid("wrapped share failed authentication") from exc
    return member_id, share


# ---------------------------------------------------------------------------
# Consortium envelope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdPolicy:
    """Recovery quorum k out of n consortium members."""

    k: int
    n: int

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n:
            raise ValueError(f"invalid threshold policy k={self.k} n={self.n}")


@dataclass(frozen=True)
class EncryptedEnvelope:
    """Payload sealed so that any k of the n consortium members can recover it."""

    ciphertext: bytes
    wrapped_shares: tuple[tuple[str, bytes], ...]
    policy: ThresholdPolicy
    payload_digest: Digest

    def to_bytes(self) -> bytes:
        """Canonical serialized form; its digest is the envelope's content address."""
        return canonical_json_bytes(
            {
                "kind": "envelope",
                "ciphertext": base64.b64encode(self.ciphertext).decode("ascii"),
                "wrapped_shares": [
                    [key_id, base64.b64encode(blob).decode("ascii")]
                    for key_id, blob in self.wrapped_shares
                ],
                "policy": {"k": self.policy.k, "n": self.policy.n},
                "payload_digest": self.payload_digest.hex,
            }
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncryptedEnvelope":
        try:
            obj = json.loads(data.decode("utf-8"))
            if obj.get("kind") != "envelope":
                raise ValueError("not an envelope object")
            return cls(
                ciphertext=base64.b64decode(obj["ciphertext"]),
                wrapped_shares=tuple(
                    (key_id, base64.b64decode(blob))
                    for key_id, blob in obj["wrapped_shares"]
                ),
                policy=ThresholdPolicy(**obj["policy"]),
                payload_digest=Digest.from_hex(obj["payload_digest"]),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"malformed envelope bytes: {exc}") from exc


def encrypt_for_consortium(
    plaintext: bytes,
    member_keys: Sequence[bytes],
    policy: ThresholdPolicy,
    rng: Optional[random.Random] = None,
) -> EncryptedEnvelope:
    """Seal ``plaintext`` for k-of-n recovery by the consortium.

    The content key is secret-shared; each share is wrapped to one member's
    public key, so evidence survives any individual key loss as long as k
    members can still unwrap.
    """
    if len(member_keys) != policy.n:
        raise ValueError(
            f"expected {policy.n} member keys per policy, got {len(member_keys)}"
        )
    content_key = _rand_bytes(rng, 32)
    nonce = _rand_bytes(rng, _GCM_NONCE_SIZE)
    ciphertext = nonce + AESGCM(content_key).encrypt(nonce, plaintext, None)
    shares = split_secret(content_key, policy.k, policy.n, rng)
    wrapped = tuple(
        (key_id_for(pub), _wrap_share(share, pub, rng))
        for pub, share in zip(member_keys, shares)
    )
    return EncryptedEnvelope(
        ciphertext=ciphertext,
        wrapped_shares=wrapped,
        policy=policy,
        payload_digest=digest(plaintext),
    )


def decrypt_with_quorum(
    envelope: EncryptedEnvelope, shares: Sequence[tuple[str, bytes]]
) -> bytes:
    """Recover the plaintext from k or more distinct members' unwrapped shares."""
    seen: dict[str, bytes] = {}
    valid_ids = {key_id for key_id, _ in envelope.wrapped_shares}
    for member_id, share in shares:
        if member_id not in valid_ids:
            raise ShareInvalid(f"share from unknown member {member_id[:12]}")
        seen.setdefault(member_id, share)
    if len(seen) < envelope.policy.k:
        raise QuorumNotMet(
            f"{len(seen)} distinct shares supplied, {envelope.policy.k} required"
        )
    subset = list(seen.values())[: envelope.policy.k]
    try:
        content_key = combine_shares(subset)
    except (ValueError, ZeroDivisionError) as exc:
        raise ShareInvalid(str(exc)) from exc
    nonce, sealed = envelope.ciphertext[:_GCM_NONCE_SIZE], envelope.ciphertext[_GCM_NONCE_SIZE:]
    try:
        plaintext = AESGCM(content_key).decrypt(nonce, sealed, None)
    except Exception as exc:
        raise ShareInvalid("reconstructed key failed to authenticate ciphertext") from exc
    if digest(plaintext) != envelope.payload_digest:
        raise IntegrityFailure("decrypted payload does not match recorded digest")
    return plaintext


# ---------------------------------------------------------------------------
# Deletion certificates (all-party signatures over a canonical message)
# ---------------------------------------------------------------------------


def deletion_message(address: Digest, court_order_digest: Digest) -> bytes:
    """Canonical bytes every consortium member signs to authorize deletion."""
    return canonical_json_bytes(
        {
            "action": "delete-evidence",
            "address": address.hex,
            "court_order": court_order_digest.hex,
        }
    )


@dataclass(frozen=True)
class DeletionCertificate:
    """End-of-lifecycle removal authorization; valid only with every member's signature."""

    address: Digest
    court_order_digest: Digest
    signatures: tuple[tuple[str, bytes], ...] = field(default_factory=tuple)

    def with_signature(self, member: KeyPair) -> "DeletionCertificate":
        sig = sign(deletion_message(self.address, self.court_order_digest), member)
        return DeletionCertificate(
            address=self.address,
            court_order_digest=self.court_order_digest,
            signatures=self.signatures + ((member.key_id, sig),),
        )

    def missing_signers(self, roster: Mapping[str, bytes]) -> list[str]:
        """Key ids from ``roster`` (key id -> public key) lacking a valid signature."""
        message = deletion_message(self.address, self.court_order_digest)
        provided = dict(self.signatures)
        missing = []
        for key_id, public_key in roster.items():
            sig = provided.get(key_id)
            if sig is None or not verify_sig(message, sig, public_key):
                missing.append(key_id)
        return missing

    def is_complete(self, roster: Mapping[str, bytes]) -> bool:
        return not self.missing_signers(roster)

    def to_dict(self) -> dict:
        return {
            "address": self.address.hex,
            "court_order_digest": self.court_order_digest.hex,
            "signatures": {key_id: sig.hex() for key_id, sig in self.signatures},
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "DeletionCertificate":
        return cls(
            address=Digest.from_hex(obj["address"]),
            court_order_digest=Digest.from_hex(obj["court_order_digest"]),
            signatures=tuple(
                (key_id, bytes.fromhex(sig))
                for key_id, sig in sorted(obj.get("signatures", {}).items())
            ),
        )
