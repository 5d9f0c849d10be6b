// Shapes of the review API payloads (see the server's /v1 endpoints).

export interface TrialOut {
  trial_id: string;
  brief_title: string;
  phase: string;
  drugs: string;
  drugs_list: string[];
  diseases: string;
  diseases_list: string[];
  enrollment: number;
  inclusion_criteria_text: string;
  exclusion_criteria_text: string;
  brief_summary: string;
  recruiting_status: string;
  locations: string[];
  study_type: string;
}

export type VerdictLabel = "Met" | "NotMet" | "InsufficientInformation" | "NotApplicable";

export interface VerdictOut {
  kind: "Inclusion" | "Exclusion";
  ordinal: number;
  criterion: string;
  label: VerdictLabel;
  relevant_sentences: number[];
  explanation: string;
}

export interface PendingPair {
  case_id: string;
  trial_id: string;
  methods: string[];
  rank: number | null;
  note: string;
  note_sentences: string[];
  trial: TrialOut;
  verdicts: VerdictOut[];
  relevance_score: number | null;
  eligibility_score: number | null;
}

export interface AdjudicationDraft {
  case_id: string;
  trial_id: string;
  eligible: boolean | null;
  beneficial: boolean | null;
  overrides: Record<string, VerdictLabel>;
  note: string;
}

export interface OutreachDraft {
  case_id: string;
  trial_id: string;
  contact_role: "CaseAuthor" | "TrialOrganizer" | null;
  first_contact_date: string | null; // ISO date
}

export interface OutreachResponseDraft {
  status: "Responded" | null;
  eligibility_confirmed: boolean | null;
  helpfulness: number | null; // Likert 1..5
  clarity: number | null; // Likert 1..5
  response_date: string | null;
}

export interface OutreachRecordOut {
  outreach_id: number;
  case_id: string;
  trial_id: string;
  contact_role: string;
  status: string;
  eligibility_confirmed: boolean | null;
  helpfulness: number | null;
  clarity: number | null;
  first_contact_date: string;
  response_date: string | null;
}

export interface DisagreementOut {
  case_id: string;
  trial_id: string;
  labels: { rater_id: string; eligible: boolean; beneficial: boolean | null }[];
}

export interface MetricsRowOut {
  method: string;
  stratum: string;
  n_cases: number;
  p_at: Record<string, number>;
  mrr: number;
  hit_rate: Record<string, number>;
}

export interface MetricsOut {
  n_labels: number;
  rows: MetricsRowOut[];
}
