import type { PendingPair } from "../src/types.js";

export function pendingPair(overrides: Partial<PendingPair> = {}): PendingPair {
  return {
    case_id: "case_01",
    trial_id: "NCT0001",
    methods: ["pipeline"],
    rank: 1,
    note: "First sentence. Second sentence. Third sentence.",
    note_sentences: ["First sentence.", "Second sentence.", "Third sentence."],
    trial: {
      trial_id: "NCT0001",
      brief_title: "A Study",
      phase: "Phase2",
      drugs: "",
      drugs_list: [],
      diseases: "Asthma",
      diseases_list: ["Asthma"],
      enrollment: 10,
      inclusion_criteria_text: "- asthma\n- age >= 18",
      exclusion_criteria_text: "- pregnant",
      brief_summary: "",
      recruiting_status: "Recruiting",
      locations: ["US"],
      study_type: "Interventional",
    },
    verdicts: [
      {
        kind: "Inclusion",
        ordinal: 0,
        criterion: "asthma",
        label: "Met",
        relevant_sentences: [0],
        explanation: "the note mentions 'asthma'",
      },
      {
        kind: "Inclusion",
        ordinal: 1,
        criterion: "age >= 18",
        label: "Met",
        relevant_sentences: [],
        explanation: "age ok",
      },
      {
        kind: "Exclusion",
        ordinal: 0,
        criterion: "pregnant",
        label: "NotMet",
        relevant_sentences: [2],
        explanation: "not mentioned",
      },
    ],
    relevance_score: 100,
    eligibility_score: 100,
    ...overrides,
  };
}
