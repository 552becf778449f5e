/** Qualification and labeling flows, kept free of DOM access so the
 * round-trip contracts can be tested against a mock service. */
import { ApiError } from "./api.js";
import { canSubmit, clearSelections, initialState, nextFocus, selectLabel, severityForKey, votePayload, } from "./state.js";
import { CATEGORIES } from "./types.js";
/** In-memory stand-in used by tests and as a fallback without localStorage. */
export class MemoryStorage {
    map = new Map();
    getItem(key) {
        return this.map.get(key) ?? null;
    }
    setItem(key, value) {
        this.map.set(key, value);
    }
    removeItem(key) {
        this.map.delete(key);
    }
}
export class QualificationFlow {
    api;
    annotatorId;
    storage;
    view;
    pairs = [];
    answers = [];
    index = 0;
    outcome = null;
    constructor(api, annotatorId, storage, view) {
        this.api = api;
        this.annotatorId = annotatorId;
        this.storage = storage;
        this.view = view;
    }
    get draftKey() {
        return `simpfact.qualification.${this.annotatorId}`;
    }
    async start() {
        this.pairs = await this.api.qualificationPairs();
        this.answers = this.pairs.map(() => ({}));
        const raw = this.storage.getItem(this.draftKey);
        if (raw !== null) {
            try {
                const draft = JSON.parse(raw);
                draft.answers.forEach((answer, i) => {
                    if (i < this.answers.length)
                        this.answers[i] = { ...answer };
                });
            }
            catch {
                this.storage.removeItem(this.draftKey);
            }
        }
        this.index = this.firstIncomplete();
        this.showCurrent();
    }
    firstIncomplete() {
        for (let i = 0; i < this.answers.length; i++) {
            if (!this.itemComplete(i))
                return i;
        }
        return this.answers.length - 1;
    }
    itemComplete(i) {
        return CATEGORIES.every((category) => this.answers[i][category] !== undefined);
    }
    get complete() {
        return this.answers.length > 0 && this.answers.every((_, i) => this.itemComplete(i));
    }
    get currentIndex() {
        return this.index;
    }
    showCurrent() {
        this.view.showItem(this.index, this.pairs.length, this.pairs[this.index], this.answers[this.index]);
    }
    answer(category, severity) {
        this.answers[this.index] = { ...this.answers[this.index], [category]: severity };
        this.storage.setItem(this.draftKey, JSON.stringify({ answers: this.answers }));
        if (this.itemComplete(this.index) && this.index < this.pairs.length - 1) {
            this.index += 1;
        }
        this.showCurrent();
    }
    /** POST all 30 judgments once; on network failure the draft survives. */
    async submit() {
        if (!this.complete) {
            throw new Error("cannot submit an incomplete qualification");
        }
        try {
            this.outcome = await this.api.qualify(this.annotatorId, this.answers);
        }
        catch (error) {
            if (error instanceof ApiError)
                throw error;
            this.view.showRetry(`submission failed (${String(error)}); your answers are saved`);
            return null;
        }
        this.storage.removeItem(this.draftKey);
        this.view.showOutcome(this.outcome);
        return this.outcome;
    }
}
export class LabelingFlow {
    api;
    view;
    state;
    prefetched = null;
    constructor(api, annotatorId, view) {
        this.api = api;
        this.view = view;
        this.state = { ...initialState(), annotatorId, qualified: true };
    }
    render() {
        this.view.render(this.state);
    }
    async start() {
        this.state = { ...this.state, progress: await this.api.progress() };
        await this.advance();
    }
    select(category, severity) {
        if (this.state.currentPair === null)
            return;
        this.state = selectLabel(this.state, category, severity);
        this.render();
    }
    focusNext() {
        this.state = { ...this.state, focusedCategory: nextFocus(this.state.focusedCategory) };
        this.render();
    }
    /** Keyboard shortcuts: 0/1/2/g select for the focused category. */
    handleKey(key) {
        const severity = severityForKey(key);
        if (severity !== null) {
            this.select(this.state.focusedCategory, severity);
            this.state = { ...this.state, focusedCategory: nextFocus(this.state.focusedCategory) };
            this.render();
        }
    }
    get submitEnabled() {
        return canSubmit(this.state);
    }
    async submit() {
        if (!this.submitEnabled)
            return;
        const payload = votePayload(this.state);
        try {
            await this.api.submitVote(payload);
            this.state = { ...clearSelections(this.state), notice: null };
        }
        catch (error) {
            if (error instanceof ApiError && error.code === "duplicate") {
                // the server already holds a vote from us: skip forward with a notice
                this.state = {
                    ...clearSelections(this.state),
                    notice: "already voted on this pair; skipping forward",
                };
            }
            else if (error instanceof ApiError) {
                this.state = { ...this.state, notice: `vote rejected: ${error.code}` };
                this.render();
                return;
            }
            else {
                // network failure: keep the selections so nothing is lost
                this.state = { ...this.state, notice: `network error (${String(error)}); try again` };
                this.render();
                return;
            }
        }
        this.state = { ...this.state, progress: await this.api.progress() };
        await this.advance();
    }
    async advance() {
        const annotator = this.state.annotatorId;
        let next;
        if (this.prefetched !== null && this.prefetched.id !== this.state.currentPair?.id) {
            next = this.prefetched;
        }
        else {
            next = await this.api.nextTask(annotator);
        }
        this.prefetched = null;
        if (next === null) {
            this.state = { ...this.state, currentPair: null, done: true };
            this.render();
            return;
        }
        this.state = { ...this.state, currentPair: next, done: false, focusedCategory: "insertion" };
        this.render();
        // optimistic fetch-ahead of one task; the server remains the source of truth
        try {
            this.prefetched = await this.api.nextTask(annotator);
        }
        catch {
            this.prefetched = null;
        }
    }
}
//# sourceMappingURL=controller.js.map