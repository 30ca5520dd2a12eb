// In-memory stand-in for the retrieval service, speaking the same JSON
// contract. Tests flip `failNextRetrieve` / `expireSessions` to drive the
// error paths.

import { CaseResult } from "../src/api.js";

export const FIXTURE_RESULTS: CaseResult[] = [
  { id: "case-0001", case_name: "Alpha v. Beta", justice: "harlan", year: 1986,
    track: "cosine_top1", relevance_pct: 100, pdf_url: "/api/case/case-0001/pdf" },
  { id: "case-0007", case_name: "Gamma v. Delta", justice: "brennan", year: 1991,
    track: "cluster_neighbor", relevance_pct: 73, pdf_url: "/api/case/case-0007/pdf" },
  { id: "case-0003", case_name: "Epsilon v. Zeta", justice: "marshall", year: 1988,
    track: "cluster_neighbor", relevance_pct: 55, pdf_url: "/api/case/case-0003/pdf" },
  { id: "case-0012", case_name: "Eta v. Theta", justice: "stevens", year: 1994,
    track: "cluster_neighbor", relevance_pct: 41, pdf_url: "/api/case/case-0012/pdf" },
  { id: "case-0009", case_name: "Iota v. Kappa", justice: "harlan", year: 1990,
    track: "cluster_neighbor", relevance_pct: 12, pdf_url: "/api/case/case-0009/pdf" },
];

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export class MockBackend {
  accounts = new Map<string, string>();
  tokens = new Set<string>();
  results: CaseResult[] = FIXTURE_RESULTS;
  failNextRetrieve: number | null = null;
  expireSessions = false;
  requests: string[] = [];
  private nextToken = 0;

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    this.requests.push(`${method} ${input}`);
    const body = init?.body ? JSON.parse(String(init.body)) : {};
    const headers = (init?.headers ?? {}) as Record<string, string>;

    if (input === "/api/register" && method === "POST") {
      if (!String(body.email).endsWith("@example.com")) {
        return json(400, { error: "email domain is not in the allowlisted domains" });
      }
      if (this.accounts.has(body.email)) {
        return json(400, { error: "account already exists" });
      }
      this.accounts.set(body.email, body.password);
      return json(200, { email: body.email });
    }

    if (input === "/api/login" && method === "POST") {
      if (this.accounts.get(body.email) !== body.password) {
        return json(401, { error: "invalid credentials" });
      }
      const token = `tok-${this.nextToken++}`;
      this.tokens.add(token);
      return json(200, { token, expires_at: 9e9 });
    }

    const token = (headers["Authorization"] ?? "").replace("Bearer ", "");
    if (this.expireSessions || !this.tokens.has(token)) {
      return json(401, { error: "missing, invalid, or expired token" });
    }

    if (input === "/api/retrieve" && method === "POST") {
      if (this.failNextRetrieve !== null) {
        const status = this.failNextRetrieve;
        this.failNextRetrieve = null;
        return json(status, { error: "backend unavailable, try again" });
      }
      return json(200, { results: this.results });
    }

    const pdf = input.match(/^\/api\/case\/([^/]+)\/pdf$/);
    if (pdf && method === "GET") {
      const id = decodeURIComponent(pdf[1]);
      if (!this.results.some((r) => r.id === id)) {
        return json(404, { error: `unknown case id '${id}'` });
      }
      return new Response(new Blob([`%PDF-1.4 fake ${id}`]), {
        status: 200,
        headers: { "Content-Type": "application/pdf" },
      });
    }

    return json(404, { error: `no route for ${method} ${input}` });
  };
}
