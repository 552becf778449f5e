/** Pure view-state transitions for the labeling screen.
 *
 * The invariants the UI relies on live here so they can be tested without
 * a DOM: submit is enabled only when all three categories have a
 * selection, the vote payload equals the on-screen selections verbatim,
 * and selections reset after every submit.
 */
import { CATEGORIES, SEVERITY_LEVELS } from "./types.js";
export function initialState() {
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
export function selectLabel(state, category, severity) {
    if (!SEVERITY_LEVELS.includes(severity)) {
        throw new Error(`invalid severity: ${severity}`);
    }
    return { ...state, selections: { ...state.selections, [category]: severity } };
}
export function clearSelections(state) {
    return { ...state, selections: {} };
}
export function canSubmit(state) {
    return (state.currentPair !== null &&
        state.annotatorId !== null &&
        CATEGORIES.every((category) => state.selections[category] !== undefined));
}
/** The exact body POSTed to /votes; throws unless every category is chosen. */
export function votePayload(state) {
    if (!canSubmit(state) || state.currentPair === null || state.annotatorId === null) {
        throw new Error("vote payload requires a pair and all three selections");
    }
    return {
        annotator: state.annotatorId,
        pair_id: state.currentPair.id,
        insertion: state.selections.insertion,
        deletion: state.selections.deletion,
        substitution: state.selections.substitution,
    };
}
export function nextFocus(category) {
    const index = CATEGORIES.indexOf(category);
    return CATEGORIES[(index + 1) % CATEGORIES.length];
}
/** Keyboard shortcut mapping: 0/1/2 pick levels, g picks gibberish. */
export function severityForKey(key) {
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
//# sourceMappingURL=state.js.map