/** Shared types mirroring the annotation service wire protocol. */
export const CATEGORIES = ["insertion", "deletion", "substitution"];
export const SEVERITY_LEVELS = [0, 1, 2, -1];
/** Level descriptions shown as inline help next to each selector. */
export const LEVEL_HELP = {
    "0": "0: no/trivial change",
    "1": "1: nontrivial but preserves main idea",
    "2": "2: does not preserve main idea",
    "-1": "-1: gibberish",
};
//# sourceMappingURL=types.js.map