import type { JudgmentDraft, QueueItemView, TriState } from "./types.js";
import { isSubmittable, progressLabel, SessionState } from "./state.js";

// HTML string templates. Keeping these as pure functions of state means the
// submit-control rule (enabled exactly when both tri-states are set) is
// directly testable without a browser.

const escapeHtml = (text: string): string =>
  text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");

const choiceButton = (group: string, label: string, value: boolean, selected: TriState): string => {
  const pressed = selected === value ? "true" : "false";
  return (
    `<button type="button" class="choice" data-group="${group}" data-value="${value}" ` +
    `aria-pressed="${pressed}">${label}</button>`
  );
};

export const renderProgress = (state: SessionState): string =>
  `<span id="progress">${escapeHtml(progressLabel(state))}</span>`;

export const renderReviewScreen = (
  item: QueueItemView,
  draft: JudgmentDraft,
  recordingUrl: string,
): string => {
  const submitDisabled = isSubmittable(draft) ? "" : " disabled";
  return `
<section class="review-screen">
  <header>
    <h2>${escapeHtml(item.sample_name)} <small>(${escapeHtml(item.industry)})</small></h2>
    <span class="position">${item.position} of ${item.total} pending</span>
  </header>
  <video id="recording" src="${escapeHtml(recordingUrl)}" controls preload="metadata"></video>
  <aside class="criterion" id="criterion">
    <h3>${escapeHtml(item.criterion_id)} &middot; ${escapeHtml(item.criterion_name)}</h3>
    <p>${escapeHtml(item.criterion_description)}</p>
  </aside>
  <div class="finding">
    <span class="severity">${escapeHtml(item.severity)}</span>
    <p class="issue">${escapeHtml(item.issue ?? "")}</p>
    <p class="improvement">${escapeHtml(item.improvement ?? "")}</p>
  </div>
  <fieldset class="judgment">
    <legend>Is the issue description a genuine problem for this criterion?</legend>
    ${choiceButton("issue", "Yes", true, draft.issuePlausible)}
    ${choiceButton("issue", "No", false, draft.issuePlausible)}
  </fieldset>
  <fieldset class="judgment">
    <legend>Is the proposed improvement appropriate to fix it?</legend>
    ${choiceButton("improvement", "Yes", true, draft.improvementPlausible)}
    ${choiceButton("improvement", "No", false, draft.improvementPlausible)}
  </fieldset>
  <button id="submit" type="submit"${submitDisabled}>Submit judgment</button>
</section>`;
};

export const renderCompletion = (): string =>
  `<section class="done"><h2>All assignments complete</h2></section>`;

export const renderError = (message: string, retryable: boolean): string =>
  `<div class="banner ${retryable ? "retryable" : "fatal"}" role="alert">` +
  `${escapeHtml(message)}${retryable ? ' <button id="retry">Retry</button>' : ""}</div>`;
