import { describe, expect, it } from "vitest";

import type { AdjudicationDraft } from "../src/types.js";
import {
  emptyDraft,
  setEligible,
  validateAdjudication,
  validateOutreachResponse,
} from "../src/validation.js";
import { pendingPair } from "./fixtures.js";

describe("adjudication validation", () => {
  it("requires an eligibility decision", () => {
    const pair = pendingPair();
    const errors = validateAdjudication(emptyDraft(pair), pair);
    expect(errors.map((e) => e.field)).toContain("eligible");
  });

  it("blocks beneficial without eligible", () => {
    const pair = pendingPair();
    const draft = { ...emptyDraft(pair), eligible: false, beneficial: true };
    const errors = validateAdjudication(draft, pair);
    expect(errors.some((e) => e.field === "beneficial")).toBe(true);
  });

  it("accepts eligible+beneficial", () => {
    const pair = pendingPair();
    const draft = { ...emptyDraft(pair), eligible: true, beneficial: true };
    expect(validateAdjudication(draft, pair)).toEqual([]);
  });

  it("accepts eligible=no with no benefit set", () => {
    const pair = pendingPair();
    const draft = { ...emptyDraft(pair), eligible: false };
    expect(validateAdjudication(draft, pair)).toEqual([]);
  });

  it("rejects overrides for criteria the pair does not have", () => {
    const pair = pendingPair();
    const draft = {
      ...emptyDraft(pair),
      eligible: true,
      overrides: { "Exclusion:7": "Met" as const },
    };
    expect(validateAdjudication(draft, pair).some((e) => e.field === "overrides")).toBe(true);
  });

  it("accepts overrides on real criteria", () => {
    const pair = pendingPair();
    const draft = {
      ...emptyDraft(pair),
      eligible: true,
      overrides: { "Inclusion:0": "NotMet" as const },
    };
    expect(validateAdjudication(draft, pair)).toEqual([]);
  });

  it("clears benefit when eligibility flips away from yes", () => {
    const pair = pendingPair();
    let draft: AdjudicationDraft = { ...emptyDraft(pair), eligible: true, beneficial: true };
    draft = setEligible(draft, false);
    expect(draft.beneficial).toBeNull();
    expect(validateAdjudication(draft, pair)).toEqual([]);
  });
});

describe("outreach response validation", () => {
  const base = {
    status: null,
    eligibility_confirmed: null,
    helpfulness: null,
    clarity: null,
    response_date: null,
  };

  it("accepts in-range Likert scores", () => {
    for (const value of [1, 2, 3, 4, 5]) {
      expect(
        validateOutreachResponse({ ...base, helpfulness: value, clarity: 6 - value }),
      ).toEqual([]);
    }
  });

  it("rejects out-of-range and fractional Likert scores", () => {
    for (const value of [0, 6, -1, 2.5]) {
      const errors = validateOutreachResponse({ ...base, helpfulness: value });
      expect(errors.some((e) => e.field === "helpfulness")).toBe(true);
    }
  });

  it("requires a date when marking responded", () => {
    const errors = validateOutreachResponse({ ...base, status: "Responded" });
    expect(errors.some((e) => e.field === "response_date")).toBe(true);
    expect(
      validateOutreachResponse({ ...base, status: "Responded", response_date: "2024-09-05" }),
    ).toEqual([]);
  });
});
