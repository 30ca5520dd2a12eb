import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { FIXTURE_RESULTS, MockBackend } from "./mockBackend.js";

let backend: MockBackend;
let root: HTMLElement;
let app: App;
let downloads: Array<{ blob: Blob; filename: string }>;

beforeEach(() => {
  backend = new MockBackend();
  root = document.createElement("div");
  document.body.textContent = "";
  document.body.appendChild(root);
  downloads = [];
  app = new App(root, new ApiClient("", backend.fetch),
    (blob, filename) => downloads.push({ blob, filename }));
  app.render();
});

async function registerAndLogin(): Promise<void> {
  await app.handleRegister("user@example.com", "longpassword");
  await app.handleLogin("user@example.com", "longpassword");
}

function query(selector: string): HTMLElement {
  const node = root.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`no element matches ${selector}`);
  return node;
}

describe("login gating", () => {
  it("shows the login view first and no query view", () => {
    expect(root.querySelector(".login-view")).not.toBeNull();
    expect(root.querySelector(".query-view")).toBeNull();
  });

  it("switches to the query view after valid credentials", async () => {
    await registerAndLogin();
    expect(root.querySelector(".login-view")).toBeNull();
    expect(root.querySelector(".query-view")).not.toBeNull();
  });

  it("shows the backend's generic message on a wrong password", async () => {
    await app.handleRegister("user@example.com", "longpassword");
    await app.handleLogin("user@example.com", "wrong-password");
    expect(query(".error-banner").textContent).toBe("invalid credentials");
    expect(root.querySelector(".query-view")).toBeNull();
  });

  it("shows the policy message for a disallowed register domain", async () => {
    await app.handleRegister("user@other.org", "longpassword");
    expect(query(".error-banner").textContent).toContain("allowlisted domains");
  });

  it("hints at malformed emails without calling the backend", () => {
    (query("input.email") as HTMLInputElement).value = "not-an-email";
    query("button.login").click();
    expect(query(".error-banner").textContent).toContain("valid email");
    expect(backend.requests).toHaveLength(0);
  });
});

describe("query results", () => {
  beforeEach(registerAndLogin);

  it("renders cards in backend order with bar widths equal to relevance_pct", async () => {
    app.state.queryText = "a contested search of a vehicle";
    await app.handleSubmit();
    const cards = [...root.querySelectorAll<HTMLElement>(".card")];
    expect(cards.map((c) => c.dataset.caseId)).toEqual(FIXTURE_RESULTS.map((r) => r.id));
    const widths = [...root.querySelectorAll<HTMLElement>(".bar-fill")]
      .map((f) => f.style.width);
    expect(widths).toEqual(FIXTURE_RESULTS.map((r) => `${r.relevance_pct}%`));
    expect(cards[0].querySelector(".badge")?.textContent).toBe("Most similar (cosine)");
    expect(cards[1].querySelector(".badge")).toBeNull();
  });

  it("renders a fully filled bar for relevance 100", async () => {
    app.state.queryText = "q";
    await app.handleSubmit();
    expect(query(".card .bar-fill").style.width).toBe("100%");
  });

  it("renders exactly as many cards as results, no placeholders", async () => {
    backend.results = FIXTURE_RESULTS.slice(0, 3);
    app.state.queryText = "q";
    await app.handleSubmit();
    expect(root.querySelectorAll(".card")).toHaveLength(3);
  });

  it("disables submit while a query is in flight", async () => {
    app.state.queryText = "q";
    const pending = app.handleSubmit();
    expect((query("button.submit") as HTMLButtonElement).disabled).toBe(true);
    await pending;
    expect((query("button.submit") as HTMLButtonElement).disabled).toBe(false);
  });

  it("ignores a second submit while busy", async () => {
    app.state.queryText = "q";
    const first = app.handleSubmit();
    await app.handleSubmit();
    await first;
    expect(backend.requests.filter((r) => r.includes("/api/retrieve"))).toHaveLength(1);
  });
});

describe("error paths", () => {
  beforeEach(registerAndLogin);

  it("keeps the typed text and shows a retry banner on a 5xx", async () => {
    backend.failNextRetrieve = 503;
    app.state.queryText = "the precise wording I typed";
    await app.handleSubmit();
    expect(query(".error-banner").textContent).toContain("try again");
    expect((query("textarea.query-text") as HTMLTextAreaElement).value)
      .toBe("the precise wording I typed");
  });

  it("returns to login when the session expires mid-query, preserving the text", async () => {
    backend.expireSessions = true;
    app.state.queryText = "still mine";
    await app.handleSubmit();
    expect(root.querySelector(".login-view")).not.toBeNull();
    expect(app.state.queryText).toBe("still mine");
  });
});

describe("pdf download", () => {
  beforeEach(async () => {
    await registerAndLogin();
    app.state.queryText = "q";
    await app.handleSubmit();
  });

  it("triggers a download named <case_id>.pdf from the card button", async () => {
    const card = root.querySelectorAll<HTMLElement>(".card")[1];
    (card.querySelector("button.download") as HTMLButtonElement).click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(downloads).toHaveLength(1);
    expect(downloads[0].filename).toBe("case-0007.pdf");
    expect(downloads[0].blob.size).toBeGreaterThan(0);
  });

  it("shows a non-fatal banner on a stale id and keeps the results", async () => {
    await app.handleDownload("gone-case");
    expect(query(".error-banner").textContent).toContain("unknown case id");
    expect(root.querySelectorAll(".card")).toHaveLength(FIXTURE_RESULTS.length);
  });

  it("redirects to login when the session expires mid-click", async () => {
    backend.expireSessions = true;
    await app.handleDownload("case-0001");
    expect(root.querySelector(".login-view")).not.toBeNull();
    expect(downloads).toHaveLength(0);
  });
});
