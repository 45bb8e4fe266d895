/**
 * Typed client for the desk service. Every call goes through one fetch
 * wrapper so tests can capture the full request stream, and so error
 * bodies ({"error": {"name", "detail"}}) turn into typed exceptions.
 */

import type { SignedVoteBody } from "./signing.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface AnchorInfo {
  txid: string;
  block_height: number;
  block_digest: string;
  block_timestamp: number;
  merkle_root: string;
  tx_index: number;
  siblings: string[];
}

export interface SubmitReceipt {
  address: string;
  payload_digest: string;
  release_token: string;
  txid: string;
  anchor: AnchorInfo;
  visibility: string;
  duplicate_of: string | null;
}

export interface Tally {
  status: "Pending" | "Accepted" | "Rejected";
  accepts: number;
  rejects: number;
  quorum: number;
}

export interface EvidenceSummary {
  address: string;
  status: string;
  tally: Tally;
  visibility: string;
  public: boolean;
  block_height: number;
}

export interface VerifyReport {
  address: string;
  verdict: string;
  matches: number;
  mismatches: number;
  missing: number;
  unreachable: number;
  anchored: boolean;
  anchor_height: number | null;
  checked_at: number;
}

export interface TrailPage {
  address: string;
  status: string;
  events: Record<string, unknown>[];
  links: string[];
  verified: boolean;
}

export interface MemberInfo {
  member_id: string;
  display_name: string;
  role: string;
}

export interface MembersPage {
  members: MemberInfo[];
  quorum: number;
  threshold_k: number;
  threshold_n: number;
}

export class DeskError extends Error {
  constructor(
    public readonly errorName: string,
    detail: string,
    public readonly status: number
  ) {
    super(`${errorName}: ${detail}`);
  }
}

export class DeskClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let name = `http-${response.status}`;
      let detail = response.statusText || "request failed";
      try {
        const parsed = (await response.json()) as {
          error?: { name: string; detail: string };
          detail?: unknown;
        };
        if (parsed.error) {
          name = parsed.error.name;
          detail = parsed.error.detail;
        } else if (parsed.detail !== undefined) {
          detail = String(parsed.detail);
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new DeskError(name, detail, response.status);
    }
    return (await response.json()) as T;
  }

  submitEvidence(contentB64: string, visibility: "Sealed" | "Public" = "Sealed") {
    return this.call<SubmitReceipt>("POST", "/evidence", {
      content_b64: contentB64,
      visibility,
    });
  }

  listEvidence() {
    return this.call<{ evidence: EvidenceSummary[] }>("GET", "/evidence");
  }

  verify(address: string) {
    return this.call<VerifyReport>("GET", `/evidence/${address}/verify`);
  }

  trail(address: string) {
    return this.call<TrailPage>("GET", `/evidence/${address}/trail`);
  }

  castVote(address: string, vote: SignedVoteBody) {
    return this.call<{ tally: Tally }>("POST", `/evidence/${address}/votes`, vote);
  }

  members() {
    return this.call<MembersPage>("GET", "/consortium/members");
  }
}
