// Single-page client: a login/register screen gating a query view that
// renders the backend's ranked citations verbatim. All ordering and scoring
// comes from the server; the UI never re-ranks.

import { ApiClient, ApiError, CaseResult } from "./api.js";

export interface ViewState {
  loggedIn: boolean;
  queryText: string;
  results: CaseResult[];
  busy: boolean;
  errorBanner: string | null;
  notice: string | null;
}

export function initialState(): ViewState {
  return { loggedIn: false, queryText: "", results: [], busy: false,
           errorBanner: null, notice: null };
}

/** Hands a fetched PDF to the browser as an attachment download. */
export function browserDownload(blob: Blob, filename: string): void {
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = filename;
  a.click();
  URL.revokeObjectURL(url);
}

type DownloadFn = (blob: Blob, filename: string) => void;

export class App {
  state: ViewState = initialState();

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private triggerDownload: DownloadFn = browserDownload,
  ) {}

  // ---- state transitions -------------------------------------------------

  async handleLogin(email: string, password: string): Promise<void> {
    this.state.errorBanner = null;
    this.state.notice = null;
    try {
      await this.api.login(email, password);
      this.state.loggedIn = true;
    } catch (e) {
      this.state.errorBanner = messageOf(e);
    }
    this.render();
  }

  async handleRegister(email: string, password: string): Promise<void> {
    this.state.errorBanner = null;
    this.state.notice = null;
    try {
      await this.api.register(email, password);
      this.state.notice = "Account created, you can log in now.";
    } catch (e) {
      this.state.errorBanner = messageOf(e);
    }
    this.render();
  }

  async handleSubmit(): Promise<void> {
    if (this.state.busy || !this.state.queryText.trim()) {
      return;
    }
    this.state.busy = true;
    this.state.errorBanner = null;
    this.render();
    try {
      this.state.results = await this.api.retrieve(this.state.queryText);
    } catch (e) {
      if (e instanceof ApiError && e.status === 401) {
        this.sessionExpired();
        return;
      }
      // typed text stays in state; the banner invites a retry
      this.state.errorBanner = messageOf(e);
    } finally {
      this.state.busy = false;
    }
    this.render();
  }

  async handleDownload(caseId: string): Promise<void> {
    try {
      const blob = await this.api.downloadPdf(caseId);
      this.triggerDownload(blob, `${caseId}.pdf`);
    } catch (e) {
      if (e instanceof ApiError && e.status === 401) {
        this.sessionExpired();
        return;
      }
      // non-fatal: keep the rendered results
      this.state.errorBanner = messageOf(e);
      this.render();
    }
  }

  private sessionExpired(): void {
    this.api.logout();
    this.state.loggedIn = false;
    this.state.busy = false;
    this.state.results = [];
    this.state.errorBanner = "Session expired, please log in again.";
    this.render();
  }

  // ---- rendering ---------------------------------------------------------

  render(): void {
    this.root.textContent = "";
    if (this.state.errorBanner) {
      const banner = el("div", "error-banner", this.state.errorBanner);
      this.root.appendChild(banner);
    }
    if (this.state.notice) {
      this.root.appendChild(el("div", "notice", this.state.notice));
    }
    if (!this.state.loggedIn) {
      this.root.appendChild(this.loginView());
    } else {
      this.root.appendChild(this.queryView());
    }
  }

  private loginView(): HTMLElement {
    const view = el("div", "login-view");
    view.appendChild(el("h1", "", "Case Citation Retrieval"));
    const email = input("email", "email", "you@firm.example.com");
    const password = input("password", "password", "password");
    const loginBtn = button("login", "Log in");
    const registerBtn = button("register", "Register");
    loginBtn.addEventListener("click", () => {
      if (!email.value.includes("@")) {
        this.state.errorBanner = "Enter a valid email address.";
        this.render();
        return;
      }
      void this.handleLogin(email.value, password.value);
    });
    registerBtn.addEventListener("click", () => {
      void this.handleRegister(email.value, password.value);
    });
    for (const node of [email, password, loginBtn, registerBtn]) {
      view.appendChild(node);
    }
    return view;
  }

  private queryView(): HTMLElement {
    const view = el("div", "query-view");
    view.appendChild(el("h1", "", "Enter Case Description"));
    const text = document.createElement("textarea");
    text.className = "query-text";
    text.value = this.state.queryText;
    text.addEventListener("input", () => {
      this.state.queryText = text.value;
    });
    const submit = button("submit", this.state.busy ? "Searching..." : "Retrieve citations");
    submit.disabled = this.state.busy || false;
    submit.addEventListener("click", () => void this.handleSubmit());
    view.appendChild(text);
    view.appendChild(submit);
    view.appendChild(this.resultsList());
    return view;
  }

  private resultsList(): HTMLElement {
    const list = el("div", "results");
    this.state.results.forEach((result, i) => {
      list.appendChild(this.card(result, i === 0));
    });
    return list;
  }

  private card(result: CaseResult, first: boolean): HTMLElement {
    const card = el("div", "card");
    card.dataset.caseId = result.id;
    if (first) {
      card.appendChild(el("span", "badge", "Most similar (cosine)"));
    }
    card.appendChild(el("h2", "case-name", result.case_name));
    card.appendChild(el("p", "meta", `${result.justice}, ${result.year}`));
    const bar = el("div", "bar");
    const fill = el("div", "bar-fill");
    fill.style.width = `${result.relevance_pct}%`;
    bar.appendChild(fill);
    card.appendChild(bar);
    card.appendChild(el("span", "pct", `${result.relevance_pct}%`));
    const download = button("download", "Download PDF");
    download.addEventListener("click", () => void this.handleDownload(result.id));
    card.appendChild(download);
    return card;
  }
}

function messageOf(e: unknown): string {
  return e instanceof Error ? e.message : String(e);
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function input(type: string, className: string, placeholder: string): HTMLInputElement {
  const node = document.createElement("input");
  node.type = type;
  node.className = className;
  node.placeholder = placeholder;
  return node;
}

function button(className: string, label: string): HTMLButtonElement {
  const node = document.createElement("button");
  node.className = className;
  node.textContent = label;
  return node;
}
