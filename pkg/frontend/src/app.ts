import { ApiClient, ApiError } from "./api.js";
import { ReviewSession } from "./session.js";
import { currentItem, isComplete, setImprovement, setIssue } from "./state.js";
import { renderCompletion, renderError, renderProgress, renderReviewScreen } from "./render.js";

// DOM bootstrap: token entry, then the review loop. All state lives in the
// ReviewSession; this layer only re-renders and forwards events.

const root = (): HTMLElement => {
  const element = document.getElementById("app");
  if (!element) throw new Error("missing #app container");
  return element;
};

const redraw = (session: ReviewSession, api: ApiClient, banner = ""): void => {
  const container = root();
  const item = currentItem(session.state);
  const body = item
    ? renderReviewScreen(item, session.state.draft, api.recordingUrl(item))
    : renderCompletion();
  container.innerHTML = `${renderProgress(session.state)}${banner}${body}`;

  container.querySelectorAll<HTMLButtonElement>("button.choice").forEach((button) => {
    button.addEventListener("click", () => {
      const value = button.dataset.value === "true";
      session.state =
        button.dataset.group === "issue"
          ? setIssue(session.state, value)
          : setImprovement(session.state, value);
      redraw(session, api);
    });
  });

  const submit = container.querySelector<HTMLButtonElement>("#submit");
  submit?.addEventListener("click", async () => {
    submit.disabled = true;
    const outcome = await session.submit();
    if (outcome.kind === "advanced") {
      redraw(session, api);
    } else if (outcome.kind === "forbidden") {
      redraw(session, api, renderError(`Item removed: ${outcome.message}`, false));
    } else {
      redraw(session, api, renderError(outcome.message, true));
    }
  });

  container.querySelector<HTMLButtonElement>("#retry")?.addEventListener("click", () => {
    redraw(session, api);
  });

  if (isComplete(session.state)) {
    void api.getVerdicts().catch(() => undefined);
  }
};

const start = async (baseUrl: string, token: string): Promise<void> => {
  const api = new ApiClient(baseUrl, token);
  const session = new ReviewSession(api);
  try {
    await session.load();
  } catch (error) {
    const message = error instanceof ApiError ? error.message : String(error);
    root().innerHTML = renderError(`Could not load your queue: ${message}`, false);
    return;
  }
  redraw(session, api);
};

export const mount = (): void => {
  const form = document.getElementById("login") as HTMLFormElement | null;
  if (!form) return;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const baseUrl = String(data.get("service") || "").replace(/\/$/, "");
    const token = String(data.get("token") || "");
    form.hidden = true;
    void start(baseUrl, token);
  });
};

if (typeof document !== "undefined" && document.readyState !== "loading") {
  mount();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", mount);
}
