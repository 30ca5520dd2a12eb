// Thin typed client over the retrieval service's JSON API. Register and
// login are the only unauthenticated calls; everything else sends the
// bearer token from the current session.

export interface CaseResult {
  id: string;
  case_name: string;
  justice: string;
  year: number;
  track: "cosine_top1" | "cluster_neighbor";
  relevance_pct: number;
  pdf_url: string;
}

export interface Session {
  token: string;
  expires_at: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") {
      return body.error;
    }
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${response.status}`;
}

export class ApiClient {
  session: Session | null = null;

  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchFn = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init: RequestInit, authed: boolean): Promise<Response> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (authed) {
      if (!this.session) {
        throw new ApiError(401, "not logged in");
      }
      headers["Authorization"] = `Bearer ${this.session.token}`;
    }
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, { ...init, headers });
    } catch (e) {
      throw new ApiError(0, `network failure: ${String(e)}`);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response;
  }

  async register(email: string, password: string): Promise<void> {
    await this.request("/api/register",
      { method: "POST", body: JSON.stringify({ email, password }) }, false);
  }

  async login(email: string, password: string): Promise<void> {
    const response = await this.request("/api/login",
      { method: "POST", body: JSON.stringify({ email, password }) }, false);
    this.session = (await response.json()) as Session;
  }

  logout(): void {
    this.session = null;
  }

  async retrieve(description: string): Promise<CaseResult[]> {
    const response = await this.request("/api/retrieve",
      { method: "POST", body: JSON.stringify({ description }) }, true);
    const body = (await response.json()) as { results: CaseResult[] };
    return body.results;
  }

  async downloadPdf(caseId: string): Promise<Blob> {
    const response = await this.request(
      `/api/case/${encodeURIComponent(caseId)}/pdf`, { method: "GET" }, true);
    return response.blob();
  }
}
