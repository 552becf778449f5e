/** Shared types mirroring the annotation service wire protocol. */

export type Severity = 0 | 1 | 2 | -1;

export type Category = "insertion" | "deletion" | "substitution";

export const CATEGORIES: readonly Category[] = ["insertion", "deletion", "substitution"];

export const SEVERITY_LEVELS: readonly Severity[] = [0, 1, 2, -1];

/** Level descriptions shown as inline help next to each selector. */
export const LEVEL_HELP: Record<string, string> = {
  "0": "0: no/trivial change",
  "1": "1: nontrivial but preserves main idea",
  "2": "2: does not preserve main idea",
  "-1": "-1: gibberish",
};

export interface PairRecord {
  id: string;
  complex_text: string;
  simple_text: string;
}

export interface QualificationOutcome {
  annotator_id: string;
  score: number;
  qualified: boolean;
}

/** One answer per gold pair: a severity for each category. */
export type Answer = Record<Category, Severity>;

export interface VotePayload {
  annotator: string;
  pair_id: string;
  insertion: Severity;
  deletion: Severity;
  substitution: Severity;
}

export interface Progress {
  pairs_total: number;
  pairs_complete: number;
  votes: number;
  annotators: number;
  annotators_qualified: number;
}
