/**
 * Wire formats shared with the pipeline CLI.
 *
 * A session plan arrives as JSON (read from a file or GET /plan/<observer>);
 * a preference record leaves as JSON (downloaded or POST /record). The
 * pipeline's parser reads only the keys declared here and ignores extras,
 * so the record may carry additional bookkeeping (timestamps, replay
 * counts, flagged trials) without breaking ingestion.
 */

import { z } from "zod";

export const CHOICES = ["A", "B", "EQUAL"] as const;
export type Choice = (typeof CHOICES)[number];

export const trialSchema = z
  .object({
    idx: z.number().int().nonnegative(),
    a: z.string().min(1),
    b: z.string().min(1),
    group: z.string().min(1),
  })
  .refine((t) => t.a !== t.b, {
    message: "trial compares a video with itself",
  });

export type Trial = z.infer<typeof trialSchema>;

export const sessionPlanSchema = z
  .object({
    observer_id: z.string().min(1),
    seed: z.number().int(),
    trials: z.array(trialSchema),
  })
  .superRefine((plan, ctx) => {
    const seen = new Set<number>();
    for (const t of plan.trials) {
      if (seen.has(t.idx)) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `duplicate trial idx ${t.idx}`,
          path: ["trials"],
        });
        return;
      }
      seen.add(t.idx);
    }
  });

export type SessionPlan = z.infer<typeof sessionPlanSchema>;

/** One answered trial as exported. The pipeline reads idx and choice. */
export interface TrialResultJson {
  idx: number;
  choice: Choice;
  answered_at_ms: number;
  replays: { a: number; b: number };
}

/** A trial that could not be run to protocol (media failure). */
export interface FlaggedTrialJson {
  idx: number;
  error: string;
}

/**
 * Complete export of one observer's session. `results` holds every
 * answered trial in plan order; `flagged` (an extra key the pipeline
 * ignores) holds trials skipped with an error.
 */
export interface PreferenceRecordJson {
  observer_id: string;
  results: TrialResultJson[];
  flagged: FlaggedTrialJson[];
}
