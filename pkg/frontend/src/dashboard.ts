/**
 * Consortium vetting dashboard. A member loads their key file to open a
 * session; Voters get Accept/Reject controls that sign locally and send
 * only the signature, Observers get a read-only queue. Vote responses
 * update the queue item in place, so a tally flip never needs a reload.
 */

import type { DeskClient, EvidenceSummary, Tally } from "./api.js";
import { DeskError } from "./api.js";
import type { MemberKeyFile } from "./signing.js";
import { parseMemberKeyFile, signVote, verifyMemberKey } from "./signing.js";

export interface DashboardSession {
  key: MemberKeyFile | null;
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

function tallyLine(tally: Tally): string {
  return `${tally.accepts} accept / ${tally.rejects} reject (quorum ${tally.quorum})`;
}

export function renderDashboard(
  root: HTMLElement,
  client: DeskClient,
  session: DashboardSession
): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  const bar = el(doc, "section", { class: "member-bar" });
  bar.append(el(doc, "h2", {}, "Review queue"));
  const keyInput = el(doc, "textarea", {
    id: "member-key-input",
    rows: "3",
    placeholder: "Paste your member key file (JSON) to open a session",
  });
  const load = el(doc, "button", { id: "member-key-load", type: "button" }, "Open session");
  const who = el(doc, "p", { id: "member-session", class: "member-session" });
  if (session.key) {
    who.textContent = `${session.key.display_name} (${session.key.role})`;
  }
  bar.append(keyInput, load, who);
  root.append(bar);

  const queue = el(doc, "ul", { id: "vetting-queue", class: "vetting-queue" });
  root.append(queue);

  load.addEventListener("click", async () => {
    try {
      const key = parseMemberKeyFile(keyInput.value);
      if (!(await verifyMemberKey(key))) {
        who.textContent = "Key file is inconsistent; session not opened.";
        return;
      }
      session.key = key;
      keyInput.value = "";
      who.textContent = `${key.display_name} (${key.role})`;
      await fillQueue();
    } catch (err) {
      who.textContent = err instanceof Error ? err.message : "Could not read the key file.";
    }
  });

  async function fillQueue(): Promise<void> {
    const page = await client.listEvidence();
    queue.textContent = "";
    const items = [...page.evidence].sort((a, b) => a.block_height - b.block_height);
    for (const summary of items) {
      queue.append(renderItem(summary));
    }
    if (items.length === 0) {
      queue.append(el(doc, "li", { class: "queue-empty" }, "Nothing awaiting review."));
    }
  }

  function renderItem(summary: EvidenceSummary): HTMLLIElement {
    const item = el(doc, "li", {
      class: "queue-item",
      "data-address": summary.address,
    });
    const head = el(doc, "div", { class: "queue-head" });
    head.append(el(doc, "code", { class: "queue-address" }, summary.address.slice(0, 16)));
    head.append(el(doc, "span", { class: "queue-visibility" }, summary.visibility));
    head.append(el(doc, "span", { class: "status-badge" }, summary.status));
    item.append(head);
    item.append(el(doc, "p", { class: "queue-tally" }, tallyLine(summary.tally)));

    const key = session.key;
    if (key && key.role === "Voter") {
      const controls = el(doc, "div", { class: "vote-controls" });
      const rationale = el(doc, "input", {
        type: "text",
        class: "vote-rationale",
        placeholder: "rationale",
      });
      const note = el(doc, "p", { class: "vote-note" });
      const voteButton = (decision: "Accept" | "Reject") => {
        const button = el(
          doc,
          "button",
          { type: "button", "data-action": decision.toLowerCase() },
          decision
        );
        button.addEventListener("click", async () => {
          try {
            const body = await signVote(key, summary.address, decision, rationale.value);
            const result = await client.castVote(summary.address, body);
            item.querySelector(".status-badge")!.textContent = result.tally.status;
            item.querySelector(".queue-tally")!.textContent = tallyLine(result.tally);
            note.textContent = "Vote recorded.";
          } catch (err) {
            note.textContent =
              err instanceof DeskError ? `Refused: ${err.message}` : "Vote failed; desk unreachable.";
          }
        });
        return button;
      };
      controls.append(rationale, voteButton("Accept"), voteButton("Reject"), note);
      item.append(controls);
    } else if (key) {
      item.append(el(doc, "p", { class: "observer-note" }, "Observer seat: read only."));
    }
    return item;
  }

  void fillQueue().catch(() => {
    queue.textContent = "";
    queue.append(el(doc, "li", { class: "queue-empty" }, "Desk unreachable."));
  });
}
