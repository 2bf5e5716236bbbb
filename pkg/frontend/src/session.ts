/**
 * Observer session state machine.
 *
 * Holds the answer/flag/replay state for every trial of a plan, persists
 * it after every change so a reload resumes at the first unanswered trial,
 * and exports the preference record once the session is complete.
 */

import {
  Choice,
  CHOICES,
  PreferenceRecordJson,
  SessionPlan,
  sessionPlanSchema,
  Trial,
} from "./wire.js";

/** Raised when a plan fails validation; shown as a blocking error screen. */
export class PlanError extends Error {}

/** Raised when export is requested before every trial is answered or flagged. */
export class IncompleteSessionError extends Error {
  constructor(readonly pendingIdx: number[]) {
    super(`session incomplete: trials [${pendingIdx.join(", ")}] still pending`);
  }
}

export type Side = "a" | "b";

export interface TrialState {
  readonly trial: Trial;
  readonly choice: Choice | null;
  readonly answeredAtMs: number | null;
  readonly replays: { a: number; b: number };
  /** Non-null when the trial was skipped because its media failed. */
  readonly flaggedError: string | null;
}

/** The subset of the DOM Storage interface the session relies on. */
export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export interface SessionOptions {
  /** Where to persist progress (e.g. window.localStorage). */
  storage?: StorageLike;
  /** Clock used for answer timestamps; defaults to Date.now. */
  now?: () => number;
}

interface MutableTrialState {
  choice: Choice | null;
  answeredAtMs: number | null;
  replays: { a: number; b: number };
  flaggedError: string | null;
}

interface PersistedState {
  v: 1;
  trials: Record<
    string,
    {
      choice: Choice | null;
      answeredAtMs: number | null;
      replays: { a: number; b: number };
      flaggedError: string | null;
    }
  >;
}

export class StudySession {
  readonly plan: SessionPlan;

  private readonly states = new Map<number, MutableTrialState>();
  private readonly storage?: StorageLike;
  private readonly now: () => number;

  constructor(plan: SessionPlan, options: SessionOptions = {}) {
    this.plan = plan;
    this.storage = options.storage;
    this.now = options.now ?? Date.now;
    for (const trial of plan.trials) {
      this.states.set(trial.idx, {
        choice: null,
        answeredAtMs: null,
        replays: { a: 0, b: 0 },
        flaggedError: null,
      });
    }
    this.restore();
  }

  /** Validate raw plan JSON and build a session. Throws PlanError. */
  static fromJson(data: unknown, options: SessionOptions = {}): StudySession {
    const parsed = sessionPlanSchema.safeParse(data);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      const where = issue.path.length > 0 ? ` at ${issue.path.join(".")}` : "";
      throw new PlanError(`invalid session plan${where}: ${issue.message}`);
    }
    return new StudySession(parsed.data, options);
  }

  get observerId(): string {
    return this.plan.observer_id;
  }

  get trialCount(): number {
    return this.plan.trials.length;
  }

  get answeredCount(): number {
    let n = 0;
    for (const s of this.states.values()) {
      if (s.choice !== null) n += 1;
    }
    return n;
  }

  /** Progress indicator text, e.g. "0 / 300". */
  progressLabel(): string {
    return `${this.answeredCount} / ${this.trialCount}`;
  }

  trialState(idx: number): TrialState {
    const trial = this.plan.trials.find((t) => t.idx === idx);
    const state = this.states.get(idx);
    if (trial === undefined || state === undefined) {
      throw new Error(`trial idx ${idx} is not in the plan`);
    }
    return { trial, ...state, replays: { ...state.replays } };
  }

  /**
   * Plan-order position of the first trial that is neither answered nor
   * flagged, or null when the session is complete. A reload lands here.
   */
  firstPendingPosition(): number | null {
    for (let pos = 0; pos < this.plan.trials.length; pos += 1) {
      const s = this.states.get(this.plan.trials[pos].idx)!;
      if (s.choice === null && s.flaggedError === null) return pos;
    }
    return null;
  }

  pendingIndices(): number[] {
    return this.plan.trials
      .filter((t) => {
        const s = this.states.get(t.idx)!;
        return s.choice === null && s.flaggedError === null;
      })
      .map((t) => t.idx);
  }

  isComplete(): boolean {
    return this.pendingIndices().length === 0;
  }

  /** Record a confirmed choice. A trial's choice is immutable once set. */
  answer(idx: number, choice: Choice): void {
    const state = this.mutableState(idx);
    if (state.choice !== null) {
      throw new Error(`trial ${idx} already answered (${state.choice})`);
    }
    if (state.flaggedError !== null) {
      throw new Error(`trial ${idx} was flagged (${state.flaggedError})`);
    }
    state.choice = choice;
    state.answeredAtMs = this.now();
    this.persist();
  }

  /** Mark a trial skipped because its media failed. */
  flagMediaFailure(idx: number, message: string): void {
    const state = this.mutableState(idx);
    if (state.choice !== null) {
      throw new Error(`trial ${idx} already answered; cannot flag`);
    }
    if (state.flaggedError === null) {
      state.flaggedError = message;
      this.persist();
    }
  }

  /** Count one replay of the given side; replays are unlimited but logged. */
  logReplay(idx: number, side: Side): void {
    const state = this.mutableState(idx);
    state.replays[side] += 1;
    this.persist();
  }

  /**
   * Export the preference record. Results follow plan order regardless of
   * the order trials were answered in; flagged trials are listed separately.
   */
  exportRecord(): PreferenceRecordJson {
    const pending = this.pendingIndices();
    if (pending.length > 0) {
      throw new IncompleteSessionError(pending);
    }
    const record: PreferenceRecordJson = {
      observer_id: this.plan.observer_id,
      results: [],
      flagged: [],
    };
    for (const trial of this.plan.trials) {
      const s = this.states.get(trial.idx)!;
      if (s.choice !== null) {
        record.results.push({
          idx: trial.idx,
          choice: s.choice,
          answered_at_ms: s.answeredAtMs!,
          replays: { ...s.replays },
        });
      } else {
        record.flagged.push({ idx: trial.idx, error: s.flaggedError! });
      }
    }
    return record;
  }

  /** Remove persisted progress (call after a successful submit). */
  clearPersisted(): void {
    this.storage?.removeItem(this.storageKey());
  }

  private storageKey(): string {
    return `lapvqa-session:${this.plan.observer_id}:${this.plan.seed}`;
  }

  private mutableState(idx: number): MutableTrialState {
    const state = this.states.get(idx);
    if (state === undefined) {
      throw new Error(`trial idx ${idx} is not in the plan`);
    }
    return state;
  }

  private persist(): void {
    if (this.storage === undefined) return;
    const data: PersistedState = { v: 1, trials: {} };
    for (const [idx, s] of this.states) {
      data.trials[String(idx)] = {
        choice: s.choice,
        answeredAtMs: s.answeredAtMs,
        replays: { ...s.replays },
        flaggedError: s.flaggedError,
      };
    }
    this.storage.setItem(this.storageKey(), JSON.stringify(data));
  }

  /** Merge persisted progress, ignoring anything that no longer fits the plan. */
  private restore(): void {
    if (this.storage === undefined) return;
    const raw = this.storage.getItem(this.storageKey());
    if (raw === null) return;
    let data: unknown;
    try {
      data = JSON.parse(raw);
    } catch {
      return; // corrupt persistence is discarded, never fatal
    }
    if (typeof data !== "object" || data === null) return;
    const persisted = data as Partial<PersistedState>;
    if (persisted.v !== 1 || typeof persisted.trials !== "object" || persisted.trials === null) {
      return;
    }
    for (const [key, value] of Object.entries(persisted.trials)) {
      const idx = Number(key);
      const state = this.states.get(idx);
      if (state === undefined || typeof value !== "object" || value === null) continue;
      const v = value as Record<string, unknown>;
      if (typeof v.choice === "string" && (CHOICES as readonly string[]).includes(v.choice)) {
        state.choice = v.choice as Choice;
        state.answeredAtMs = typeof v.answeredAtMs === "number" ? v.answeredAtMs : 0;
      }
      if (typeof v.flaggedError === "string" && state.choice === null) {
        state.flaggedError = v.flaggedError;
      }
      const replays = v.replays as Record<string, unknown> | undefined;
      if (typeof replays === "object" && replays !== null) {
        for (const side of ["a", "b"] as const) {
          const count = replays[side];
          if (typeof count === "number" && Number.isInteger(count) && count >= 0) {
            state.replays[side] = count;
          }
        }
      }
    }
  }
}
