/**
 * Browser wiring: fetch the observer's plan from the session endpoint,
 * run trials strictly in plan order, persist after every answer, and
 * submit (or download) the preference record when the session completes.
 *
 * Endpoints (served by the pipeline's `serve` command):
 *   GET  /plan/<observer_id>  -> session plan JSON
 *   POST /record              -> accepts the preference record JSON
 *
 * Video renditions are served from the same origin's static root. The
 * corpus itself is raw Y4M, which browsers cannot decode, so a session
 * directory is expected to hold losslessly transcoded web renditions
 * named `<video_id>.mp4` next to the plans.
 */

import { IncompleteSessionError, StudySession } from "./session.js";
import { TrialPlayer } from "./trial.js";
import { Choice } from "./wire.js";

const DEFAULT_VIDEO_URL = (videoId: string) => `${encodeURIComponent(videoId)}.mp4`;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (text !== undefined) node.textContent = text;
  return node;
}

function showBlockingError(root: HTMLElement, message: string): void {
  root.replaceChildren();
  const box = el(root.ownerDocument, "div");
  box.className = "blocking-error";
  box.dataset.role = "blocking-error";
  box.append(
    el(root.ownerDocument, "h2", "Session cannot start"),
    el(root.ownerDocument, "p", message),
  );
  root.append(box);
}

export interface AppOptions {
  videoUrl?: (videoId: string) => string;
  storage?: Storage;
  fetchImpl?: typeof fetch;
}

export async function startApp(root: HTMLElement, options: AppOptions = {}): Promise<void> {
  const doc = root.ownerDocument;
  const win = doc.defaultView!;
  const fetchImpl = options.fetchImpl ?? win.fetch.bind(win);
  const storage = options.storage ?? win.localStorage;
  const videoUrl = options.videoUrl ?? DEFAULT_VIDEO_URL;

  const observerId = new URL(win.location.href).searchParams.get("observer");
  if (!observerId) {
    showBlockingError(root, "Missing ?observer=<id> in the URL.");
    return;
  }

  let session: StudySession;
  try {
    const response = await fetchImpl(`/plan/${encodeURIComponent(observerId)}`);
    if (!response.ok) {
      showBlockingError(root, `Plan for ${observerId} not available (HTTP ${response.status}).`);
      return;
    }
    session = StudySession.fromJson(await response.json(), { storage });
  } catch (err) {
    showBlockingError(root, `Plan for ${observerId} could not be loaded: ${String(err)}`);
    return;
  }

  root.replaceChildren();
  const progress = el(doc, "p");
  progress.dataset.role = "progress";
  const stage = el(doc, "div");
  stage.dataset.role = "stage";
  const outcome = el(doc, "p");
  outcome.dataset.role = "outcome";
  root.append(progress, stage, outcome);

  const updateProgress = () => {
    progress.textContent = session.progressLabel();
  };

  const finish = async () => {
    stage.replaceChildren();
    let record;
    try {
      record = session.exportRecord();
    } catch (err) {
      if (err instanceof IncompleteSessionError) {
        outcome.textContent = `Cannot export yet; pending trials: ${err.pendingIdx.join(", ")}`;
        return;
      }
      throw err;
    }
    const body = JSON.stringify(record, null, 2);
    try {
      const response = await fetchImpl("/record", {
        method: "POST",
        headers: { "content-type": "application/json" },
        body,
      });
      if (!response.ok) throw new Error(`HTTP ${response.status}`);
      session.clearPersisted();
      outcome.textContent = "Thank you - your responses were submitted.";
    } catch (err) {
      // keep the record reachable even without a working endpoint
      const link = el(doc, "a", "Download your responses");
      link.href = `data:application/json;charset=utf-8,${encodeURIComponent(body)}`;
      link.setAttribute("download", `${session.observerId}.json`);
      outcome.textContent = `Submission failed (${String(err)}). `;
      outcome.append(link);
    }
  };

  const runFrom = (position: number | null): void => {
    updateProgress();
    if (position === null) {
      void finish();
      return;
    }
    const trial = session.plan.trials[position];
    stage.replaceChildren();
    const advance = () => runFrom(session.firstPendingPosition());
    new TrialPlayer(stage, trial, {
      videoUrl,
      onChoice: (choice: Choice) => {
        session.answer(trial.idx, choice);
        advance();
      },
      onReplay: (side) => session.logReplay(trial.idx, side),
      onMediaFailure: (message) => {
        session.flagMediaFailure(trial.idx, message);
        advance();
      },
    });
  };

  runFrom(session.firstPendingPosition());
}
