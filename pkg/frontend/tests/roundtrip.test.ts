// @vitest-environment happy-dom
//
// Round trip against the real pipeline CLI: plans are generated by
// `lapvqa plan`, a scripted observer answers every trial through the DOM
// component, and the exported records are fed to `lapvqa aggregate`. The
// aggregate run must succeed with nothing on stderr (zero warnings), and
// both the records and the resulting MOS table must reproduce the scripted
// choices exactly.

import { spawnSync } from "node:child_process";
import { mkdirSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { StudySession } from "../src/session.js";
import { TrialPlayer } from "../src/trial.js";
import { Choice, SessionPlan, Trial } from "../src/wire.js";

const CLI = "lapvqa";

function runCli(args: string[], cwd: string) {
  const proc = spawnSync(CLI, args, { cwd, encoding: "utf8" });
  if (proc.error) throw proc.error;
  return proc;
}

/** Severity level encoded in a corpus video id ("..._l3" -> 3). */
function levelOf(videoId: string): number {
  const match = /_l(\d+)$/.exec(videoId);
  if (match === null) throw new Error(`no level in video id ${videoId}`);
  return Number(match[1]);
}

type Script = (trial: Trial) => Choice;

const preferLower: Script = (t) => (levelOf(t.a) < levelOf(t.b) ? "A" : "B");
const preferHigher: Script = (t) => (levelOf(t.a) > levelOf(t.b) ? "A" : "B");
const equalWhenClose: Script = (t) =>
  Math.abs(levelOf(t.a) - levelOf(t.b)) === 1 ? "EQUAL" : preferLower(t);

const OBSERVERS: { id: string; script: Script }[] = [
  { id: "ui-obs-00", script: preferLower },
  { id: "ui-obs-01", script: preferHigher },
  { id: "ui-obs-02", script: equalWhenClose },
];

/**
 * Drive one full session through the UI component: for each trial in plan
 * order, let both videos finish their first playback, then click the
 * scripted choice button. Returns the export produced by the session.
 */
function runScriptedUiSession(plan: SessionPlan, script: Script) {
  const session = new StudySession(plan);
  for (const trial of plan.trials) {
    const container = document.createElement("div");
    document.body.append(container);
    const player = new TrialPlayer(container, trial, {
      videoUrl: (id) => `/media/${id}.mp4`,
      onChoice: (choice) => session.answer(trial.idx, choice),
      onReplay: (side) => session.logReplay(trial.idx, side),
      onMediaFailure: (message) => session.flagMediaFailure(trial.idx, message),
    });
    for (const side of ["a", "b"] as const) {
      container
        .querySelector<HTMLVideoElement>(`video[data-side="${side}"]`)!
        .dispatchEvent(new Event("ended"));
    }
    expect(player.currentPhase).toBe("awaiting-choice");
    container
      .querySelector<HTMLButtonElement>(`button[data-choice="${script(trial)}"]`)!
      .click();
    container.remove();
  }
  expect(session.isComplete()).toBe(true);
  return session.exportRecord();
}

/** Per-video points for one observer: win 1, tie 0.5 each. */
function pointsFor(plan: SessionPlan, script: Script): Map<string, number> {
  const points = new Map<string, number>();
  for (const trial of plan.trials) {
    points.set(trial.a, points.get(trial.a) ?? 0);
    points.set(trial.b, points.get(trial.b) ?? 0);
    const choice = script(trial);
    if (choice === "A") points.set(trial.a, points.get(trial.a)! + 1);
    else if (choice === "B") points.set(trial.b, points.get(trial.b)! + 1);
    else {
      points.set(trial.a, points.get(trial.a)! + 0.5);
      points.set(trial.b, points.get(trial.b)! + 0.5);
    }
  }
  return points;
}

const root = mkdtempSync(join(tmpdir(), "study-ui-roundtrip-"));

afterAll(() => {
  rmSync(root, { recursive: true, force: true });
});

describe("round trip through the pipeline CLI", () => {
  // one complete severity group -> 6 pairwise trials per observer
  const manifest = [1, 2, 3, 4].map((level) => ({
    id: `BL01_noise_l${level}`,
    reference_label: "BL01",
    kind: "noise",
    level,
  }));

  it("aggregates scripted UI sessions with zero warnings and exact choices", () => {
    const plansDir = join(root, "plans");
    const recordsDir = join(root, "records");
    mkdirSync(plansDir);
    mkdirSync(recordsDir);
    writeFileSync(join(root, "manifest.json"), JSON.stringify(manifest, null, 2));

    // plans come from the pipeline, one per observer
    const plans = new Map<string, SessionPlan>();
    for (const { id } of OBSERVERS) {
      const planned = runCli(
        [
          "plan",
          "--manifest",
          join(root, "manifest.json"),
          "--observer",
          id,
          "--seed",
          "5",
          "--out",
          join(plansDir, `${id}.json`),
        ],
        root,
      );
      expect(planned.status).toBe(0);
      const plan = StudySession.fromJson(
        JSON.parse(readFileSync(join(plansDir, `${id}.json`), "utf8")),
      ).plan;
      expect(plan.trials).toHaveLength(6);
      plans.set(id, plan);
    }

    // scripted observers answer through the DOM component
    for (const { id, script } of OBSERVERS) {
      const record = runScriptedUiSession(plans.get(id)!, script);
      expect(record.flagged).toEqual([]);
      writeFileSync(join(recordsDir, `${id}.json`), JSON.stringify(record, null, 2));
    }

    // the exported records reproduce the scripted choices exactly, in plan order
    for (const { id, script } of OBSERVERS) {
      const plan = plans.get(id)!;
      const onDisk = JSON.parse(readFileSync(join(recordsDir, `${id}.json`), "utf8"));
      expect(onDisk.observer_id).toBe(id);
      expect(
        onDisk.results.map((r: { idx: number; choice: string }) => ({
          idx: r.idx,
          choice: r.choice,
        })),
      ).toEqual(plan.trials.map((t) => ({ idx: t.idx, choice: script(t) })));
    }

    // the pipeline ingests them without a single warning
    const aggregated = runCli(
      [
        "aggregate",
        "--plans",
        plansDir,
        "--records",
        recordsDir,
        "--out",
        join(root, "mos.csv"),
      ],
      root,
    );
    expect(aggregated.status).toBe(0);
    expect(aggregated.stderr).toBe("");
    expect(aggregated.stdout).toContain("aggregated 3 observers (0 flagged: [])");

    // and the MOS table equals the hand-computed aggregation of the scripts
    const csv = readFileSync(join(root, "mos.csv"), "utf8").trim().split("\n");
    expect(csv[0]).toBe("video_id,mos,mos_normalized,n_observers,cohort");
    const expected = OBSERVERS.map(({ id, script }) => pointsFor(plans.get(id)!, script));
    const videoIds = [...expected[0].keys()].sort();
    expect(csv).toHaveLength(1 + videoIds.length);
    csv.slice(1).forEach((line, i) => {
      const [videoId, mosText, mosNormText, nObs] = line.split(",");
      expect(videoId).toBe(videoIds[i]);
      expect(nObs).toBe("3");
      // observer order in the table is sorted, matching OBSERVERS order here
      const sum = expected.reduce((acc, pts) => acc + pts.get(videoId)!, 0);
      expect(Number(mosText)).toBe(sum / 3);
      expect(Number(mosNormText)).toBe(sum / 3 / 3);
    });
  });
});
