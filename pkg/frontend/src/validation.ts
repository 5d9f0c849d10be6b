// Client-side mirror of the server's submission invariants. The submit
// buttons only enable when these return no errors, so a payload the server
// would reject is never sendable.

import type { AdjudicationDraft, OutreachResponseDraft, PendingPair, VerdictLabel } from "./types.js";

export const VERDICT_LABELS: VerdictLabel[] = [
  "Met",
  "NotMet",
  "InsufficientInformation",
  "NotApplicable",
];

export interface FieldError {
  field: string;
  message: string;
}

export function criterionKeys(pair: PendingPair): Set<string> {
  return new Set(pair.verdicts.map((v) => `${v.kind}:${v.ordinal}`));
}

export function validateAdjudication(
  draft: AdjudicationDraft,
  pair: PendingPair,
): FieldError[] {
  const errors: FieldError[] = [];
  if (draft.eligible === null) {
    errors.push({ field: "eligible", message: "choose eligible yes or no" });
  }
  if (draft.beneficial !== null && draft.eligible !== true) {
    errors.push({ field: "beneficial", message: "beneficial requires eligible = yes" });
  }
  const known = criterionKeys(pair);
  for (const [key, label] of Object.entries(draft.overrides)) {
    if (!known.has(key)) {
      errors.push({ field: "overrides", message: `no criterion '${key}' on this pair` });
    }
    if (!VERDICT_LABELS.includes(label)) {
      errors.push({ field: "overrides", message: `unknown verdict label '${label}'` });
    }
  }
  return errors;
}

function likertError(field: string, value: number | null): FieldError | null {
  if (value === null) return null;
  if (!Number.isInteger(value) || value < 1 || value > 5) {
    return { field, message: "Likert ratings are whole numbers from 1 to 5" };
  }
  return null;
}

export function validateOutreachResponse(draft: OutreachResponseDraft): FieldError[] {
  const errors: FieldError[] = [];
  for (const field of ["helpfulness", "clarity"] as const) {
    const error = likertError(field, draft[field]);
    if (error) errors.push(error);
  }
  if (draft.status === "Responded" && !draft.response_date) {
    errors.push({ field: "response_date", message: "a response needs its date" });
  }
  return errors;
}

export function emptyDraft(pair: PendingPair): AdjudicationDraft {
  return {
    case_id: pair.case_id,
    trial_id: pair.trial_id,
    eligible: null,
    beneficial: null,
    overrides: {},
    note: "",
  };
}

// Mirrors the UI rule: flipping eligible away from yes clears benefit.
export function setEligible(draft: AdjudicationDraft, value: boolean): AdjudicationDraft {
  const next = { ...draft, eligible: value };
  if (value !== true) {
    next.beneficial = null;
  }
  return next;
}

export function adjudicationBody(draft: AdjudicationDraft): Record<string, unknown> {
  return {
    case_id: draft.case_id,
    trial_id: draft.trial_id,
    eligible: draft.eligible,
    beneficial: draft.beneficial,
    overrides: draft.overrides,
    note: draft.note,
  };
}
