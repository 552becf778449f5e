/** Pure view-state transitions for the labeling screen.
 *
 * The invariants the UI relies on live here so they can be tested without
 * a DOM: submit is enabled only when all three categories have a
 * selection, the vote payload equals the on-screen selections verbatim,
 * and selections reset after every submit.
 */

import type { Category, PairRecord, Progress, Severity, VotePayload } from "./types.js";
import { CATEGORIES, SEVERITY_LEVELS } from "./types.js";

export type Selections = Partial<Record<Category, Severity>>;

export interface ViewState {
  annotatorId: string | null;
  qualified: boolean | null; // null until a qualification outcome is known
  score: number | null;
  currentPair: PairRecord | null;
  selections: Selections;
  focusedCategory: Category;
  progress: Progress | null;
  notice: string | null;
  done: boolean;
}

export function initialState(): ViewState {
  return {
    annotatorId: null,
    qualified: null,
    score: null,
    currentPair: null,
    selections: {},
    focusedCategory: "insertion",
    progress: null,
    notice: null,
    done: false,
  };
}

export function selectLabel(state: ViewState, category: Category, severity: Severity): ViewState {
  if (!SEVERITY_LEVELS.includes(severity)) {
    throw new Error(`invalid severity: ${severity}`);
  }
  return { ...state, selections: { ...state.selections, [category]: severity } };
}

export function clearSelections(state: ViewState): ViewState {
  return { ...state, selections: {} };
}

export function canSubmit(state: ViewState): boolean {
  return (
    state.currentPair !== null &&
    state.annotatorId !== null &&
    CATEGORIES.every((category) => state.selections[category] !== undefined)
  );
}

/** The exact body POSTed to /votes; throws unless every category is chosen. */
export function votePayload(state: ViewState): VotePayload {
  if (!canSubmit(state) || state.currentPair === null || state.annotatorId === null) {
    throw new Error("vote payload requires a pair and all three selections");
  }
  return {
    annotator: state.annotatorId,
    pair_id: state.currentPair.id,
    insertion: state.selections.insertion as Severity,
    deletion: state.selections.deletion as Severity,
    substitution: state.selections.substitution as Severity,
  };
}

export function nextFocus(category: Category): Category {
  const index = CATEGORIES.indexOf(category);
  return CATEGORIES[(index + 1) % CATEGORIES.length];
}

/** Keyboard shortcut mapping: 0/1/2 pick levels, g picks gibberish. */
export function severityForKey(key: string): Severity | null {
  switch (key) {
    case "0":
      return 0;
    case "1":
      return 1;
    case "2":
      return 2;
    case "g":
    case "G":
      return -1;
    default:
      return null;
  }
}
