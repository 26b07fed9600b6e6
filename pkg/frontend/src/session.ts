import { ApiClient, ApiError } from "./api.js";
import {
  SessionState,
  advance,
  currentItem,
  fromQueue,
  isSubmittable,
  removeItem,
  rollback,
} from "./state.js";

export type SubmitOutcome =
  | { kind: "advanced" }
  | { kind: "retryable"; message: string }
  | { kind: "forbidden"; message: string };

/** Drives one reviewer's session against the service; UI-framework free. */
export class ReviewSession {
  state: SessionState = fromQueue({ items: [], judged: 0, assigned: 0 });

  constructor(private readonly api: ApiClient) {}

  async load(): Promise<SessionState> {
    this.state = fromQueue(await this.api.getQueue());
    return this.state;
  }

  /** Submit the current draft; the draft survives retryable failures intact. */
  async submit(): Promise<SubmitOutcome> {
    const item = currentItem(this.state);
    if (!item || !isSubmittable(this.state.draft)) {
      throw new Error("nothing to submit: draft incomplete or queue empty");
    }
    const draft = this.state.draft;
    this.state = advance(this.state);
    try {
      await this.api.submitJudgment(
        item.finding_key,
        draft.issuePlausible as boolean,
        draft.improvementPlausible as boolean,
      );
      return { kind: "advanced" };
    } catch (error) {
      if (error instanceof ApiError && error.status === 403) {
        // Not ours to judge (assignment changed); drop it with an explanation.
        this.state = removeItem({ ...this.state, judged: this.state.judged - 1 }, item.finding_key);
        return { kind: "forbidden", message: error.message };
      }
      this.state = rollback(this.state, item, draft);
      const message = error instanceof ApiError ? error.message : String(error);
      return { kind: "retryable", message };
    }
  }
}
