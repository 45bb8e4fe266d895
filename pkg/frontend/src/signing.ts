/**
 * Client-side Ed25519 signing from a member key file. Secret keys never
 * leave the browser; only signatures travel to the desk service.
 */

import * as ed from "@noble/ed25519";

import { canonicalJsonBytes } from "./canonical.js";

export type MemberRole = "Voter" | "Observer";
export type VoteDecision = "Accept" | "Reject";

export interface MemberKeyFile {
  member_id: string;
  display_name: string;
  role: MemberRole;
  public_key: string;
  secret_key: string;
}

export interface SignedVoteBody {
  member_id: string;
  decision: VoteDecision;
  rationale: string;
  signature: string;
}

export function hexToBytes(hex: string): Uint8Array {
  if (hex.length % 2 !== 0 || /[^0-9a-fA-F]/.test(hex)) {
    throw new Error("malformed hex string");
  }
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}

export function bytesToHex(bytes: Uint8Array): string {
  let out = "";
  for (const b of bytes) out += b.toString(16).padStart(2, "0");
  return out;
}

export async function sha256Hex(data: Uint8Array): Promise<string> {
  // Copy so views over shared or offset buffers hash the right bytes.
  const digest = await crypto.subtle.digest("SHA-256", new Uint8Array(data));
  return bytesToHex(new Uint8Array(digest));
}

/** Exact bytes a member signs; the service rebuilds them to check the vote. */
export function voteMessage(
  addressHex: string,
  decision: VoteDecision,
  rationale: string
): Uint8Array {
  return canonicalJsonBytes({
    action: "vet-vote",
    address: addressHex,
    decision,
    rationale,
  });
}

export async function signVote(
  key: MemberKeyFile,
  addressHex: string,
  decision: VoteDecision,
  rationale: string
): Promise<SignedVoteBody> {
  const message = voteMessage(addressHex, decision, rationale);
  const signature = await ed.signAsync(message, hexToBytes(key.secret_key));
  return { member_id: key.member_id, decision, rationale, signature: bytesToHex(signature) };
}

/** Check the key file is internally consistent before trusting it for a session. */
export async function verifyMemberKey(key: MemberKeyFile): Promise<boolean> {
  try {
    const derived = await ed.getPublicKeyAsync(hexToBytes(key.secret_key));
    if (bytesToHex(derived) !== key.public_key.toLowerCase()) return false;
    return (await sha256Hex(derived)) === key.member_id.toLowerCase();
  } catch {
    return false;
  }
}

export function parseMemberKeyFile(text: string): MemberKeyFile {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch {
    throw new Error("key file is not valid JSON");
  }
  const obj = parsed as Record<string, unknown>;
  for (const field of ["member_id", "display_name", "role", "public_key", "secret_key"]) {
    if (typeof obj[field] !== "string") {
      throw new Error(`key file is missing the ${field} field`);
    }
  }
  const role = obj.role as string;
  if (role !== "Voter" && role !== "Observer") {
    throw new Error(`unknown role ${role}`);
  }
  return {
    member_id: obj.member_id as string,
    display_name: obj.display_name as string,
    role,
    public_key: obj.public_key as string,
    secret_key: obj.secret_key as string,
  };
}
