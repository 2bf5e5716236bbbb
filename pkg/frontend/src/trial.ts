/**
 * One pairwise trial as a DOM component.
 *
 * Protocol: video A plays once automatically, then video B; the three
 * choice controls (and the replay buttons) stay disabled until both videos
 * have completed that first playback. Replays are unlimited afterward and
 * reported so they can be logged. A media error during the first playback
 * flags the trial as skipped-with-error instead of collecting a choice.
 * Side assignment comes solely from the plan; this component never swaps
 * A and B.
 */

import { Choice, CHOICES, Trial } from "./wire.js";
import { Side } from "./session.js";

export type TrialPhase =
  | "playing-a"
  | "playing-b"
  | "awaiting-choice"
  | "answered"
  | "failed";

export interface TrialPlayerOptions {
  /** Maps a video id from the plan to a playable URL. */
  videoUrl: (videoId: string) => string;
  /** Called once when the observer confirms a choice. */
  onChoice: (choice: Choice) => void;
  /** Called every time a replay starts. */
  onReplay: (side: Side) => void;
  /** Called once if media fails during the first playback. */
  onMediaFailure: (message: string) => void;
}

const CHOICE_LABELS: Record<Choice, string> = {
  A: "A is better",
  EQUAL: "Equal",
  B: "B is better",
};

export class TrialPlayer {
  readonly root: HTMLElement;

  private readonly videos: Record<Side, HTMLVideoElement>;
  private readonly replayButtons: Record<Side, HTMLButtonElement>;
  private readonly choiceButtons: Record<Choice, HTMLButtonElement>;
  private readonly status: HTMLElement;
  private readonly options: TrialPlayerOptions;

  private endedOnce: Record<Side, boolean> = { a: false, b: false };
  private phase: TrialPhase = "playing-a";

  constructor(container: HTMLElement, trial: Trial, options: TrialPlayerOptions) {
    this.options = options;
    const doc = container.ownerDocument;

    this.root = doc.createElement("section");
    this.root.className = "trial";

    const players = doc.createElement("div");
    players.className = "trial-players";
    const buildSide = (side: Side, videoId: string) => {
      const figure = doc.createElement("figure");
      const caption = doc.createElement("figcaption");
      caption.textContent = `Video ${side.toUpperCase()}`;
      const video = doc.createElement("video");
      video.dataset.side = side;
      video.src = options.videoUrl(videoId);
      video.preload = "auto";
      video.muted = true; // study clips carry no audio; muted also permits autoplay
      video.setAttribute("playsinline", "");
      const replay = doc.createElement("button");
      replay.type = "button";
      replay.dataset.replay = side;
      replay.textContent = `Replay ${side.toUpperCase()}`;
      replay.disabled = true;
      figure.append(caption, video, replay);
      players.append(figure);
      return { video, replay };
    };
    const a = buildSide("a", trial.a);
    const b = buildSide("b", trial.b);
    this.videos = { a: a.video, b: b.video };
    this.replayButtons = { a: a.replay, b: b.replay };

    const choices = doc.createElement("div");
    choices.className = "trial-choices";
    this.choiceButtons = {} as Record<Choice, HTMLButtonElement>;
    for (const choice of CHOICES) {
      const button = doc.createElement("button");
      button.type = "button";
      button.dataset.choice = choice;
      button.textContent = CHOICE_LABELS[choice];
      button.disabled = true;
      button.addEventListener("click", () => this.confirm(choice));
      this.choiceButtons[choice] = button;
    }
    // screen order A, Equal, B
    choices.append(this.choiceButtons.A, this.choiceButtons.EQUAL, this.choiceButtons.B);

    this.status = doc.createElement("p");
    this.status.dataset.role = "status";

    this.root.append(players, choices, this.status);
    container.append(this.root);

    for (const side of ["a", "b"] as const) {
      this.videos[side].addEventListener("ended", () => this.onEnded(side));
      this.videos[side].addEventListener("error", () =>
        this.fail(`video ${side.toUpperCase()} failed to play`),
      );
      this.replayButtons[side].addEventListener("click", () => this.replay(side));
    }

    this.setPhase("playing-a");
    this.play("a");
  }

  get currentPhase(): TrialPhase {
    return this.phase;
  }

  private setPhase(phase: TrialPhase): void {
    this.phase = phase;
    this.root.dataset.phase = phase;
    this.status.textContent = {
      "playing-a": "Watch video A.",
      "playing-b": "Watch video B.",
      "awaiting-choice": "Pick the better video, or Equal. Replays are allowed.",
      answered: "Choice recorded.",
      failed: "This trial was skipped because a video failed to play.",
    }[phase];
  }

  private play(side: Side): void {
    // Autoplay rejection is not a media failure by itself; a broken source
    // fires an error event, which is what flags the trial.
    try {
      const maybePromise = this.videos[side].play?.();
      if (maybePromise && typeof maybePromise.catch === "function") {
        maybePromise.catch(() => undefined);
      }
    } catch {
      // non-media environments may not implement play(); the error event
      // path still covers genuine media failures
    }
  }

  private onEnded(side: Side): void {
    this.endedOnce[side] = true;
    if (this.phase === "playing-a" && side === "a") {
      this.setPhase("playing-b");
      this.play("b");
      return;
    }
    if (this.phase === "playing-b" && this.endedOnce.a && this.endedOnce.b) {
      this.unlock();
    }
  }

  private unlock(): void {
    this.setPhase("awaiting-choice");
    for (const button of Object.values(this.choiceButtons)) button.disabled = false;
    for (const button of Object.values(this.replayButtons)) button.disabled = false;
  }

  private confirm(choice: Choice): void {
    if (this.phase !== "awaiting-choice") return; // locked or already confirmed
    this.setPhase("answered");
    for (const button of Object.values(this.choiceButtons)) button.disabled = true;
    this.options.onChoice(choice);
  }

  private replay(side: Side): void {
    if (this.phase !== "awaiting-choice" && this.phase !== "answered") return;
    this.options.onReplay(side);
    try {
      this.videos[side].currentTime = 0;
    } catch {
      // environments without seekable media still get the play() call
    }
    this.play(side);
  }

  private fail(message: string): void {
    // Only the protocol-critical first playback can void the trial; once
    // both videos completed it, a broken replay does not discard the choice.
    if (this.phase !== "playing-a" && this.phase !== "playing-b") return;
    this.setPhase("failed");
    for (const button of Object.values(this.choiceButtons)) button.disabled = true;
    for (const button of Object.values(this.replayButtons)) button.disabled = true;
    this.options.onMediaFailure(message);
  }
}
