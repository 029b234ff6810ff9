/** Four-panel single-page interface:
 *  prior chats | main chat + input | answer-derivation trace | profile strip.
 *
 * All state shown here is reconstructable from the HTTP API: a full refresh
 * with the same conversation id restores the identical view.
 */

import {
  ConversationDetail,
  ConversationSummary,
  Profile,
  Trace,
  TurnInProgressError,
  TurnResult,
} from "./api.js";

/** The slice of the client the view needs; tests substitute a mock. */
export interface Api {
  profiles(): Promise<Profile[]>;
  createConversation(title?: string, profileId?: string): Promise<ConversationSummary>;
  listConversations(page?: number): Promise<{ conversations: ConversationSummary[] }>;
  getConversation(id: string): Promise<ConversationDetail>;
  setProfile(id: string, profileId: string): Promise<{ id: string; profileId: string }>;
  ask(id: string, question: string): Promise<TurnResult>;
  getTrace(traceId: string): Promise<Trace>;
}

export interface ViewState {
  activeConversationId: string | null;
  conversationList: ConversationSummary[];
  transcript: ConversationDetail | null;
  activeTraceView: Trace | null;
  activeTraceId: string | null;
  profileList: Profile[];
  pendingQuestion: boolean;
  notice: string | null;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    activeConversationId: null,
    conversationList: [],
    transcript: null,
    activeTraceView: null,
    activeTraceId: null,
    profileList: [],
    pendingQuestion: false,
    notice: null,
    error: null,
  };
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export class App {
  readonly state: ViewState = initialState();

  constructor(
    private readonly api: Api,
    private readonly root: HTMLElement,
  ) {}

  /** Load profiles and conversations, optionally restoring a conversation. */
  async init(conversationId?: string): Promise<void> {
    try {
      this.state.profileList = await this.api.profiles();
      this.state.conversationList = (await this.api.listConversations()).conversations;
      if (conversationId) await this.selectConversation(conversationId);
      this.state.error = null;
    } catch (err) {
      this.state.error = describe(err);
    }
    this.render();
  }

  async newConversation(title?: string): Promise<void> {
    try {
      const created = await this.api.createConversation(title);
      this.state.conversationList = (await this.api.listConversations()).conversations;
      await this.selectConversation(created.id);
    } catch (err) {
      this.state.error = describe(err);
    }
    this.render();
  }

  async selectConversation(id: string): Promise<void> {
    try {
      this.state.transcript = await this.api.getConversation(id);
      this.state.activeConversationId = id;
      // derivation panel follows the latest completed turn by default
      const last = [...this.state.transcript.turns].reverse().find((t) => t.traceId);
      if (last?.traceId) {
        await this.selectTurn(last.traceId);
      } else {
        this.state.activeTraceView = null;
        this.state.activeTraceId = null;
      }
      this.state.error = null;
    } catch (err) {
      this.state.error = describe(err);
    }
    this.render();
  }

  async selectTurn(traceId: string): Promise<void> {
    try {
      this.state.activeTraceView = await this.api.getTrace(traceId);
      this.state.activeTraceId = traceId;
      this.state.error = null;
    } catch (err) {
      this.state.error = describe(err);
    }
    this.render();
  }

  async submitQuestion(question: string): Promise<void> {
    const id = this.state.activeConversationId;
    if (!id || !question.trim() || this.state.pendingQuestion) return;
    this.state.pendingQuestion = true;
    this.state.notice = null;
    this.render();
    try {
      const turn = await this.api.ask(id, question);
      this.state.transcript = await this.api.getConversation(id);
      await this.selectTurn(turn.traceId);
      this.state.error = null;
    } catch (err) {
      if (err instanceof TurnInProgressError) {
        this.state.notice = "A turn is already in progress on this conversation.";
      } else {
        this.state.error = describe(err);
      }
    }
    this.state.pendingQuestion = false;
    this.render();
  }

  async switchProfile(profileId: string): Promise<void> {
    const id = this.state.activeConversationId;
    if (!id) return;
    try {
      await this.api.setProfile(id, profileId);
      this.state.transcript = await this.api.getConversation(id);
      this.state.error = null;
    } catch (err) {
      this.state.error = describe(err);
    }
    this.render();
  }

  render(): void {
    this.root.textContent = "";
    if (this.state.error) {
      this.root.appendChild(el("div", { class: "error-banner", role: "alert" }, this.state.error));
    }
    const layout = el("div", { class: "layout" });
    layout.appendChild(this.renderConversationsPanel());
    layout.appendChild(this.renderChatPanel());
    layout.appendChild(this.renderTracePanel());
    layout.appendChild(this.renderProfilesPanel());
    this.root.appendChild(layout);
  }

  private renderConversationsPanel(): HTMLElement {
    const panel = el("section", { id: "conversations-panel", class: "panel" });
    panel.appendChild(el("h2", {}, "Chats"));
    const newButton = el("button", { id: "new-conversation" }, "New chat");
    newButton.addEventListener("click", () => void this.newConversation());
    panel.appendChild(newButton);
    const list = el("ul", { class: "conversation-list" });
    for (const conv of this.state.conversationList) {
      const item = el("li", {
        class:
          conv.id === this.state.activeConversationId
            ? "conversation active"
            : "conversation",
        "data-id": conv.id,
      });
      const link = el("a", { href: "#" }, conv.title);
      link.addEventListener("click", (event) => {
        event.preventDefault();
        void this.selectConversation(conv.id);
      });
      item.appendChild(link);
      list.appendChild(item);
    }
    panel.appendChild(list);
    return panel;
  }

  private renderChatPanel(): HTMLElement {
    const panel = el("section", { id: "chat-panel", class: "panel" });
    panel.appendChild(el("h2", {}, "Conversation"));
    const transcript = el("div", { class: "transcript" });
    if (this.state.transcript) {
      for (const turn of this.state.transcript.turns) {
        const block = el("div", { class: `turn turn-${turn.status}`, "data-turn": String(turn.turnIndex) });
        block.appendChild(el("p", { class: "question" }, turn.question));
        if (turn.status === "failed") {
          block.appendChild(el("p", { class: "answer failed" }, "This turn failed; the provider was unavailable."));
        } else if (turn.answer !== null) {
          block.appendChild(this.renderAnswer(turn.answer, turn.traceId));
        }
        transcript.appendChild(block);
      }
    } else {
      transcript.appendChild(el("p", { class: "placeholder" }, "Select or create a chat."));
    }
    panel.appendChild(transcript);

    if (this.state.notice) {
      panel.appendChild(el("p", { class: "notice", role: "status" }, this.state.notice));
    }

    const form = el("form", { id: "question-form" });
    const input = el("input", {
      id: "question-input",
      type: "text",
      placeholder: "Ask a question…",
    });
    const submit = el("button", { id: "question-submit", type: "submit" }, "Ask");
    if (this.state.pendingQuestion || !this.state.activeConversationId) {
      input.setAttribute("disabled", "");
      submit.setAttribute("disabled", "");
    }
    form.appendChild(input);
    form.appendChild(submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const question = input.value;
      input.value = "";
      void this.submitQuestion(question);
    });
    panel.appendChild(form);
    return panel;
  }

  /** Answer text with [n] citations as anchors that highlight source n. */
  private renderAnswer(answer: string, traceId: string | null): HTMLElement {
    const paragraph = el("p", { class: "answer" });
    if (traceId) {
      const link = el("a", { href: "#", class: "turn-link", "data-trace": traceId }, "");
      link.addEventListener("click", (event) => {
        event.preventDefault();
        void this.selectTurn(traceId);
      });
      link.appendChild(el("span", { class: "trace-icon" }, "derivation"));
      paragraph.appendChild(link);
    }
    const parts = answer.split(/(\[\d+\])/g);
    for (const part of parts) {
      const cited = /^\[(\d+)\]$/.exec(part);
      if (cited) {
        const n = cited[1];
        const anchor = el(
          "a",
          { href: `#source-${n}`, class: "citation", "data-source": n },
          part,
        );
        anchor.addEventListener("click", () => this.highlightSource(Number(n)));
        paragraph.appendChild(anchor);
      } else if (part) {
        paragraph.appendChild(document.createTextNode(part));
      }
    }
    return paragraph;
  }

  highlightSource(n: number): void {
    for (const entry of this.root.querySelectorAll(".source")) {
      entry.classList.toggle("highlighted", entry.id === `source-${n}`);
    }
  }

  private renderTracePanel(): HTMLElement {
    const panel = el("section", { id: "trace-panel", class: "panel" });
    panel.appendChild(el("h2", {}, "Answer derivation"));
    const trace = this.state.activeTraceView;
    if (!trace) {
      panel.appendChild(el("p", { class: "placeholder" }, "No turn selected."));
      return panel;
    }
    panel.appendChild(el("p", { class: "trace-question" }, trace.originalQuestion));

    const rewritten = el("div", { class: "rewritten" });
    rewritten.appendChild(el("h3", {}, "Rewritten queries"));
    rewritten.appendChild(el("pre", { class: "rewritten-sql" }, trace.explicitSqlQuestion));
    rewritten.appendChild(el("pre", { class: "rewritten-nl" }, trace.explicitNlQuestion));
    panel.appendChild(rewritten);

    const rounds = el("ol", { class: "tool-rounds" });
    for (const call of trace.toolCalls) {
      const item = el("li", { class: `tool-round tool-${call.tool}` });
      item.appendChild(
        el("h4", {}, `${call.tool === "sql_query" ? "SQL" : "Text"} round ${call.round}`),
      );
      item.appendChild(el("pre", { class: "tool-input" }, call.input));
      const outcome = call.outcome;
      if (outcome.type === "sql_error") {
        item.appendChild(el("p", { class: "tool-error" }, String(outcome.message ?? "")));
      } else {
        item.appendChild(
          el("pre", { class: "tool-output" }, JSON.stringify(outcome, null, 2)),
        );
      }
      item.appendChild(el("span", { class: "elapsed" }, `${call.elapsed.toFixed(3)} s`));
      rounds.appendChild(item);
    }
    panel.appendChild(rounds);

    const sources = el("ol", { class: "sources" });
    for (const source of trace.sources) {
      const item = el("li", { id: `source-${source.number}`, class: `source source-${source.kind}` });
      item.appendChild(el("span", { class: "source-label" }, source.label));
      item.appendChild(el("pre", { class: "source-content" }, source.content));
      sources.appendChild(item);
    }
    panel.appendChild(el("h3", {}, "Sources"));
    panel.appendChild(sources);

    const prompts = el("div", { class: "rendered-prompts" });
    prompts.appendChild(el("h3", {}, "Prompts"));
    for (const rendered of trace.renderedPrompts) {
      const details = el("details", { class: "prompt" });
      details.appendChild(el("summary", {}, rendered.name));
      details.appendChild(el("pre", {}, rendered.prompt));
      prompts.appendChild(details);
    }
    panel.appendChild(prompts);

    const timings = el("table", { class: "timings" });
    for (const [step, seconds] of Object.entries(trace.stepTimings)) {
      const row = el("tr", { "data-step": step });
      row.appendChild(el("td", {}, step));
      row.appendChild(el("td", {}, `${seconds.toFixed(3)} s`));
      timings.appendChild(row);
    }
    panel.appendChild(el("h3", {}, "Timings"));
    panel.appendChild(timings);

    for (const warning of trace.citationWarnings) {
      panel.appendChild(el("p", { class: "citation-warning" }, warning));
    }
    return panel;
  }

  private renderProfilesPanel(): HTMLElement {
    const panel = el("section", { id: "profiles-panel", class: "panel strip" });
    panel.appendChild(el("h2", {}, "Configurations"));
    const activeProfile = this.state.transcript?.profileId;
    const list = el("ul", { class: "profile-list" });
    for (const profile of this.state.profileList) {
      const item = el("li", {
        class: profile.id === activeProfile ? "profile active" : "profile",
        "data-id": profile.id,
      });
      const button = el("button", { class: "profile-switch" }, profile.name);
      if (!this.state.activeConversationId) button.setAttribute("disabled", "");
      button.addEventListener("click", () => void this.switchProfile(profile.id));
      item.appendChild(button);
      item.appendChild(
        el("span", { class: "branches" }, profile.retrievalBranches.join(" + ")),
      );
      list.appendChild(item);
    }
    panel.appendChild(list);
    return panel;
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
