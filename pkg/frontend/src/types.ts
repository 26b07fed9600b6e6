// View models mirroring the review service API. These are never mutated
// locally; the server stays authoritative for everything except draft state.

export interface FindingKey {
  run_id: string;
  sample_id: number;
  criterion_id: string;
}

export interface QueueItemView {
  finding_key: FindingKey;
  sample_name: string;
  industry: string;
  criterion_id: string;
  criterion_name: string;
  criterion_description: string;
  severity: string;
  issue: string | null;
  improvement: string | null;
  recording_url: string;
  position: number;
  total: number;
}

export interface QueueResponse {
  schema: number;
  reviewer: string;
  assigned: number;
  judged: number;
  items: QueueItemView[];
}

export type TriState = boolean | undefined;

export interface JudgmentDraft {
  issuePlausible: TriState;
  improvementPlausible: TriState;
}

export interface VerdictView {
  finding_key: FindingKey;
  issue_plausible_majority: boolean;
  improvement_plausible_majority: boolean;
  full_agreement_issue: boolean;
  full_agreement_improvement: boolean;
}

export interface VerdictsResponse {
  schema: number;
  verdicts: VerdictView[];
  incomplete: number;
}

export const sameKey = (a: FindingKey, b: FindingKey): boolean =>
  a.run_id === b.run_id && a.sample_id === b.sample_id && a.criterion_id === b.criterion_id;
