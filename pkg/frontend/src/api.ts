/** Typed client for the conversational QA HTTP service.
 *
 * A thin mirror of the server endpoints: no business logic lives here, only
 * request construction, JSON decoding and error mapping. All view state can
 * be reconstructed from these calls alone.
 */

export interface Profile {
  id: string;
  name: string;
  retrievalBranches: string[];
  provider?: Record<string, unknown>;
  loop?: Record<string, unknown>;
}

export interface ConversationSummary {
  id: string;
  title: string;
  createdAt: string;
  profileId: string;
}

export interface ConversationPage {
  page: number;
  pageSize: number;
  total: number;
  conversations: ConversationSummary[];
}

export interface TurnSummary {
  turnIndex: number;
  question: string;
  answer: string | null;
  traceId: string | null;
  status: string;
  createdAt: string;
}

export interface ConversationDetail extends ConversationSummary {
  turns: TurnSummary[];
}

export interface TurnResult {
  turnIndex: number;
  question: string;
  answer: string;
  traceId: string;
}

export interface ToolCall {
  round: number;
  tool: string;
  input: string;
  outcome: { type: string; [key: string]: unknown };
  elapsed: number;
}

export interface TraceSource {
  number: number;
  kind: string;
  label: string;
  content: string;
  passageId?: string | null;
  score?: number | null;
}

export interface RenderedPrompt {
  name: string;
  prompt: string;
}

export interface Trace {
  turnId: string;
  status: string;
  originalQuestion: string;
  explicitSqlQuestion: string;
  explicitNlQuestion: string;
  toolCalls: ToolCall[];
  sources: TraceSource[];
  finalAnswer: string;
  stepTimings: Record<string, number>;
  renderedPrompts: RenderedPrompt[];
  citationWarnings: string[];
  profileId?: string;
  error?: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** A question was posted while another turn on the same conversation is running. */
export class TurnInProgressError extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = "TurnInProgressError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      ...init,
      headers: { "Content-Type": "application/json", ...(init?.headers ?? {}) },
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (typeof body?.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      if (response.status === 409) throw new TurnInProgressError(detail);
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/health");
  }

  profiles(): Promise<Profile[]> {
    return this.request("/profiles");
  }

  createConversation(title?: string, profileId?: string): Promise<ConversationSummary> {
    const body: Record<string, string> = {};
    if (title !== undefined) body.title = title;
    if (profileId !== undefined) body.profileId = profileId;
    return this.request("/conversations", { method: "POST", body: JSON.stringify(body) });
  }

  listConversations(page = 1): Promise<ConversationPage> {
    return this.request(`/conversations?page=${page}`);
  }

  getConversation(id: string): Promise<ConversationDetail> {
    return this.request(`/conversations/${encodeURIComponent(id)}`);
  }

  setProfile(id: string, profileId: string): Promise<{ id: string; profileId: string }> {
    return this.request(`/conversations/${encodeURIComponent(id)}/profile`, {
      method: "POST",
      body: JSON.stringify({ profileId }),
    });
  }

  ask(id: string, question: string): Promise<TurnResult> {
    return this.request(`/conversations/${encodeURIComponent(id)}/messages`, {
      method: "POST",
      body: JSON.stringify({ question }),
    });
  }

  getTrace(traceId: string): Promise<Trace> {
    return this.request(`/traces/${encodeURIComponent(traceId)}`);
  }
}
