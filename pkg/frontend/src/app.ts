/**
 * Entry point: two tabs over one desk client. The base URL is the only
 * configuration; everything else comes from the service.
 */

import { DeskClient } from "./api.js";
import { renderDashboard } from "./dashboard.js";
import type { DashboardSession } from "./dashboard.js";
import { renderPortal } from "./portal.js";

const DEFAULT_URL = "http://127.0.0.1:8787";

export function mountApp(root: HTMLElement): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  const header = doc.createElement("header");
  const title = doc.createElement("h1");
  title.textContent = "Evidence locker";
  const urlInput = doc.createElement("input");
  urlInput.id = "desk-url";
  urlInput.value = DEFAULT_URL;
  const tabs = doc.createElement("nav");
  const submitTab = doc.createElement("button");
  submitTab.id = "tab-submit";
  submitTab.textContent = "Submit";
  const reviewTab = doc.createElement("button");
  reviewTab.id = "tab-review";
  reviewTab.textContent = "Review";
  tabs.append(submitTab, reviewTab);
  header.append(title, urlInput, tabs);

  const main = doc.createElement("main");
  main.id = "view";
  root.append(header, main);

  const session: DashboardSession = { key: null };
  const client = () => new DeskClient(urlInput.value.replace(/\/$/, ""));

  submitTab.addEventListener("click", () => renderPortal(main, client()));
  reviewTab.addEventListener("click", () => renderDashboard(main, client(), session));

  renderPortal(main, client());
}

const rootElement = typeof document !== "undefined" ? document.getElementById("app") : null;
if (rootElement) {
  mountApp(rootElement);
}
