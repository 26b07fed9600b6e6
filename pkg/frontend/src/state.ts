import type { FindingKey, JudgmentDraft, QueueItemView } from "./types.js";
import { sameKey } from "./types.js";

// Pure session state: the DOM layer renders it, the API layer feeds it.
// Advancement is optimistic (the item leaves the queue on submit) and a
// failed submit rolls the item and its draft back, so nothing is ever lost
// silently.

export interface SessionState {
  items: QueueItemView[];
  judged: number;
  assigned: number;
  draft: JudgmentDraft;
}

export const emptyDraft = (): JudgmentDraft => ({
  issuePlausible: undefined,
  improvementPlausible: undefined,
});

export const isSubmittable = (draft: JudgmentDraft): boolean =>
  draft.issuePlausible !== undefined && draft.improvementPlausible !== undefined;

export const fromQueue = (queue: {
  items: QueueItemView[];
  judged: number;
  assigned: number;
}): SessionState => ({
  items: [...queue.items],
  judged: queue.judged,
  assigned: queue.assigned,
  draft: emptyDraft(),
});

export const currentItem = (state: SessionState): QueueItemView | undefined => state.items[0];

export const isComplete = (state: SessionState): boolean => state.items.length === 0;

/** Progress label: how many of this reviewer's assignments are already judged. */
export const progressLabel = (state: SessionState): string =>
  `${state.judged} / ${state.assigned} judged`;

export const setIssue = (state: SessionState, value: boolean): SessionState => ({
  ...state,
  draft: { ...state.draft, issuePlausible: value },
});

export const setImprovement = (state: SessionState, value: boolean): SessionState => ({
  ...state,
  draft: { ...state.draft, improvementPlausible: value },
});

/** Optimistic advance: drop the head item, count it judged, reset the draft. */
export const advance = (state: SessionState): SessionState => ({
  ...state,
  items: state.items.slice(1),
  judged: state.judged + 1,
  draft: emptyDraft(),
});

/** Roll an optimistic advance back after a retryable submit failure. */
export const rollback = (
  state: SessionState,
  item: QueueItemView,
  draft: JudgmentDraft,
): SessionState => ({
  ...state,
  items: [item, ...state.items],
  judged: state.judged - 1,
  draft,
});

/** Remove an item the server refused (403): it is no longer ours to judge. */
export const removeItem = (state: SessionState, key: FindingKey): SessionState => ({
  ...state,
  items: state.items.filter((item) => !sameKey(item.finding_key, key)),
  draft: emptyDraft(),
});
