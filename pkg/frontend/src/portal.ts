/**
 * Anonymous submission portal. The form collects content and visibility,
 * nothing else: no name, account, or contact fields exist, and the receipt
 * screen is the only place the release token ever appears.
 */

import type { DeskClient, SubmitReceipt } from "./api.js";
import { DeskError } from "./api.js";

function toBase64(bytes: Uint8Array): string {
  let binary = "";
  const CHUNK = 0x8000;
  for (let i = 0; i < bytes.length; i += CHUNK) {
    binary += String.fromCharCode(...bytes.subarray(i, i + CHUNK));
  }
  return btoa(binary);
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text = ""
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

export function renderPortal(root: HTMLElement, client: DeskClient): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  const form = el(doc, "section", { class: "portal-form" });
  form.append(el(doc, "h2", {}, "Submit evidence"));
  form.append(
    el(
      doc,
      "p",
      { class: "portal-note" },
      "Submissions are anonymous. Sealed content is encrypted for the consortium before it is stored."
    )
  );

  const text = el(doc, "textarea", {
    id: "evidence-text",
    rows: "6",
    placeholder: "Paste evidence text here, or choose a file below",
  });
  const file = el(doc, "input", { id: "evidence-file", type: "file" });
  const visibility = el(doc, "select", { id: "evidence-visibility" });
  visibility.append(el(doc, "option", { value: "Sealed" }, "Sealed (encrypted for the consortium)"));
  visibility.append(el(doc, "option", { value: "Public" }, "Public (stored as plaintext)"));
  const submit = el(doc, "button", { id: "evidence-submit", type: "button" }, "Submit");
  const status = el(doc, "p", { id: "portal-status", class: "portal-status" });

  form.append(text, file, visibility, submit, status);
  root.append(form);

  submit.addEventListener("click", async () => {
    try {
      let bytes: Uint8Array;
      const picked = file.files && file.files[0];
      if (picked) {
        bytes = new Uint8Array(await picked.arrayBuffer());
      } else if (text.value) {
        bytes = new TextEncoder().encode(text.value);
      } else {
        status.textContent = "Nothing to submit: paste text or choose a file.";
        return;
      }
      status.textContent = "Sealing and anchoring…";
      submit.disabled = true;
      const receipt = await client.submitEvidence(
        toBase64(bytes),
        visibility.value as "Sealed" | "Public"
      );
      renderReceipt(root, client, receipt);
    } catch (err) {
      submit.disabled = false;
      status.textContent =
        err instanceof DeskError ? `Refused: ${err.message}` : "Submission failed; desk unreachable.";
    }
  });
}

function renderReceipt(root: HTMLElement, client: DeskClient, receipt: SubmitReceipt): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  const page = el(doc, "section", { class: "receipt" });
  page.append(el(doc, "h2", {}, "Anchored"));

  const fields = el(doc, "dl", { class: "receipt-fields" });
  const row = (label: string, value: string, cls = "") => {
    fields.append(el(doc, "dt", {}, label));
    fields.append(el(doc, "dd", cls ? { class: cls } : {}, value));
  };
  row("Address", receipt.address, "receipt-address");
  row("Payload digest", receipt.payload_digest);
  row("Anchor transaction", receipt.txid);
  row("Block height", String(receipt.anchor.block_height));
  row("Visibility", receipt.visibility);
  if (receipt.duplicate_of) {
    row("Duplicate of", receipt.duplicate_of, "receipt-duplicate");
  }
  page.append(fields);

  const tokenBox = el(doc, "div", { class: "token-box" });
  tokenBox.append(
    el(
      doc,
      "p",
      { class: "token-warning" },
      "Release token. Copy it now: it is shown once and never stored by the desk."
    )
  );
  tokenBox.append(el(doc, "code", { class: "release-token" }, receipt.release_token));
  const dismiss = el(doc, "button", { id: "token-stored", type: "button" }, "I stored the token");
  dismiss.addEventListener("click", () => {
    tokenBox.remove();
  });
  tokenBox.append(dismiss);
  page.append(tokenBox);

  const check = el(doc, "button", { id: "check-integrity", type: "button" }, "Check integrity");
  const verdict = el(doc, "p", { id: "verify-result", class: "verify-result" });
  check.addEventListener("click", async () => {
    try {
      const report = await client.verify(receipt.address);
      const match = report.address === receipt.address ? "matches" : "DOES NOT MATCH";
      verdict.textContent = `Verdict: ${report.verdict}; server address ${match} the receipt.`;
    } catch (err) {
      verdict.textContent =
        err instanceof DeskError ? `Check refused: ${err.message}` : "Check failed; desk unreachable.";
    }
  });
  page.append(check, verdict);

  root.append(page);
}
