/** Qualification and labeling flows, kept free of DOM access so the
 * round-trip contracts can be tested against a mock service. */

import { ApiError, type ServiceApi } from "./api.js";
import {
  canSubmit,
  clearSelections,
  initialState,
  nextFocus,
  selectLabel,
  severityForKey,
  votePayload,
  type ViewState,
} from "./state.js";
import type { Answer, Category, PairRecord, QualificationOutcome, Severity } from "./types.js";
import { CATEGORIES } from "./types.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

/** In-memory stand-in used by tests and as a fallback without localStorage. */
export class MemoryStorage implements StorageLike {
  private readonly map = new Map<string, string>();

  getItem(key: string): string | null {
    return this.map.get(key) ?? null;
  }

  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }

  removeItem(key: string): void {
    this.map.delete(key);
  }
}

export interface QualificationView {
  showItem(index: number, total: number, pair: PairRecord, draft: Partial<Answer>): void;
  showOutcome(outcome: QualificationOutcome): void;
  /** Network trouble: keep the entered answers and offer a retry. */
  showRetry(message: string): void;
}

interface QualificationDraft {
  answers: Array<Partial<Answer>>;
}

export class QualificationFlow {
  private pairs: PairRecord[] = [];
  private answers: Array<Partial<Answer>> = [];
  private index = 0;
  private outcome: QualificationOutcome | null = null;

  constructor(
    private readonly api: ServiceApi,
    private readonly annotatorId: string,
    private readonly storage: StorageLike,
    private readonly view: QualificationView,
  ) {}

  private get draftKey(): string {
    return `simpfact.qualification.${this.annotatorId}`;
  }

  async start(): Promise<void> {
    this.pairs = await this.api.qualificationPairs();
    this.answers = this.pairs.map(() => ({}));
    const raw = this.storage.getItem(this.draftKey);
    if (raw !== null) {
      try {
        const draft = JSON.parse(raw) as QualificationDraft;
        draft.answers.forEach((answer, i) => {
          if (i < this.answers.length) this.answers[i] = { ...answer };
        });
      } catch {
        this.storage.removeItem(this.draftKey);
      }
    }
    this.index = this.firstIncomplete();
    this.showCurrent();
  }

  private firstIncomplete(): number {
    for (let i = 0; i < this.answers.length; i++) {
      if (!this.itemComplete(i)) return i;
    }
    return this.answers.length - 1;
  }

  private itemComplete(i: number): boolean {
    return CATEGORIES.every((category) => this.answers[i][category] !== undefined);
  }

  get complete(): boolean {
    return this.answers.length > 0 && this.answers.every((_, i) => this.itemComplete(i));
  }

  get currentIndex(): number {
    return this.index;
  }

  private showCurrent(): void {
    this.view.showItem(this.index, this.pairs.length, this.pairs[this.index], this.answers[this.index]);
  }

  answer(category: Category, severity: Severity): void {
    this.answers[this.index] = { ...this.answers[this.index], [category]: severity };
    this.storage.setItem(this.draftKey, JSON.stringify({ answers: this.answers }));
    if (this.itemComplete(this.index) && this.index < this.pairs.length - 1) {
      this.index += 1;
    }
    this.showCurrent();
  }

  /** POST all 30 judgments once; on network failure the draft survives. */
  async submit(): Promise<QualificationOutcome | null> {
    if (!this.complete) {
      throw new Error("cannot submit an incomplete qualification");
    }
    try {
      this.outcome = await this.api.qualify(this.annotatorId, this.answers as Answer[]);
    } catch (error) {
      if (error instanceof ApiError) throw error;
      this.view.showRetry(`submission failed (${String(error)}); your answers are saved`);
      return null;
    }
    this.storage.removeItem(this.draftKey);
    this.view.showOutcome(this.outcome);
    return this.outcome;
  }
}

export interface LabelingView {
  render(state: ViewState): void;
}

export class LabelingFlow {
  state: ViewState;
  private prefetched: PairRecord | null = null;

  constructor(
    private readonly api: ServiceApi,
    annotatorId: string,
    private readonly view: LabelingView,
  ) {
    this.state = { ...initialState(), annotatorId, qualified: true };
  }

  private render(): void {
    this.view.render(this.state);
  }

  async start(): Promise<void> {
    this.state = { ...this.state, progress: await this.api.progress() };
    await this.advance();
  }

  select(category: Category, severity: Severity): void {
    if (this.state.currentPair === null) return;
    this.state = selectLabel(this.state, category, severity);
    this.render();
  }

  focusNext(): void {
    this.state = { ...this.state, focusedCategory: nextFocus(this.state.focusedCategory) };
    this.render();
  }

  /** Keyboard shortcuts: 0/1/2/g select for the focused category. */
  handleKey(key: string): void {
    const severity = severityForKey(key);
    if (severity !== null) {
      this.select(this.state.focusedCategory, severity);
      this.state = { ...this.state, focusedCategory: nextFocus(this.state.focusedCategory) };
      this.render();
    }
  }

  get submitEnabled(): boolean {
    return canSubmit(this.state);
  }

  async submit(): Promise<void> {
    if (!this.submitEnabled) return;
    const payload = votePayload(this.state);
    try {
      await this.api.submitVote(payload);
      this.state = { ...clearSelections(this.state), notice: null };
    } catch (error) {
      if (error instanceof ApiError && error.code === "duplicate") {
        // the server already holds a vote from us: skip forward with a notice
        this.state = {
          ...clearSelections(this.state),
          notice: "already voted on this pair; skipping forward",
        };
      } else if (error instanceof ApiError) {
        this.state = { ...this.state, notice: `vote rejected: ${error.code}` };
        this.render();
        return;
      } else {
        // network failure: keep the selections so nothing is lost
        this.state = { ...this.state, notice: `network error (${String(error)}); try again` };
        this.render();
        return;
      }
    }
    this.state = { ...this.state, progress: await this.api.progress() };
    await this.advance();
  }

  private async advance(): Promise<void> {
    const annotator = this.state.annotatorId as string;
    let next: PairRecord | null;
    if (this.prefetched !== null && this.prefetched.id !== this.state.currentPair?.id) {
      next = this.prefetched;
    } else {
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
    } catch {
      this.prefetched = null;
    }
  }
}
