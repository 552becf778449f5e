/** DOM rendering for the workbench. All labeling logic lives in the
 * controller; this module only draws state and forwards events. */

import type { LabelingFlow, QualificationFlow } from "./controller.js";
import type { ViewState } from "./state.js";
import type { Answer, Category, PairRecord, QualificationOutcome, Severity } from "./types.js";
import { CATEGORIES, LEVEL_HELP, SEVERITY_LEVELS } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function pairPanel(pair: PairRecord): HTMLElement {
  const panel = el("div", "pair-panel");
  const complexBox = el("div", "text-box complex");
  complexBox.append(el("h3", "", "Original"), el("p", "", pair.complex_text));
  const simpleBox = el("div", "text-box simple");
  simpleBox.append(el("h3", "", "Simplified"), el("p", "", pair.simple_text));
  panel.append(complexBox, simpleBox);
  return panel;
}

function severityName(severity: Severity): string {
  return LEVEL_HELP[String(severity)];
}

function categorySelector(
  category: Category,
  selected: Severity | undefined,
  focused: boolean,
  onSelect: (category: Category, severity: Severity) => void,
): HTMLElement {
  const wrap = el("fieldset", focused ? "category focused" : "category");
  wrap.append(el("legend", "", category));
  for (const severity of SEVERITY_LEVELS) {
    const label = el("label", selected === severity ? "level selected" : "level");
    const input = el("input");
    input.type = "radio";
    input.name = `${category}`;
    input.checked = selected === severity;
    input.addEventListener("change", () => onSelect(category, severity));
    label.append(input, el("span", "", severityName(severity)));
    wrap.append(label);
  }
  return wrap;
}

export class DomView {
  private readonly root: HTMLElement;

  constructor(root: HTMLElement) {
    this.root = root;
  }

  private swap(...children: HTMLElement[]): void {
    this.root.replaceChildren(...children);
  }

  // ------------------------------------------------------------ qualification

  qualificationView(flow: () => QualificationFlow): {
    showItem(index: number, total: number, pair: PairRecord, draft: Partial<Answer>): void;
    showOutcome(outcome: QualificationOutcome): void;
    showRetry(message: string): void;
  } {
    return {
      showItem: (index, total, pair, draft) => {
        const header = el("h2", "", `Qualification ${index + 1} / ${total}`);
        const help = el(
          "p",
          "help",
          "Rate each category of information change between the original and the simplified text.",
        );
        const selectors = el("div", "selectors");
        for (const category of CATEGORIES) {
          selectors.append(
            categorySelector(category, draft[category], false, (cat, severity) =>
              flow().answer(cat, severity),
            ),
          );
        }
        const submit = el("button", "primary", "Submit all answers");
        submit.disabled = !flow().complete;
        submit.addEventListener("click", () => void flow().submit());
        this.swap(header, help, pairPanel(pair), selectors, submit);
      },
      showOutcome: (outcome) => {
        const pct = (outcome.score * 100).toFixed(0);
        if (outcome.qualified) {
          const go = el("button", "primary", "Start labeling");
          go.addEventListener("click", () => window.dispatchEvent(new Event("simpfact:qualified")));
          this.swap(el("h2", "", `Qualified (score ${pct}%)`), go);
        } else {
          this.swap(
            el("h2", "", `Not qualified (score ${pct}%)`),
            el("p", "", "A score of at least 75% is required; the task view stays locked."),
          );
        }
      },
      showRetry: (message) => {
        const banner = el("div", "banner error", message);
        const retry = el("button", "primary", "Retry submission");
        retry.addEventListener("click", () => void flow().submit());
        this.root.prepend(banner, retry);
      },
    };
  }

  // ----------------------------------------------------------------- labeling

  labelingView(flow: () => LabelingFlow): { render(state: ViewState): void } {
    return {
      render: (state) => {
        if (state.done) {
          const progress = state.progress;
          const summary = progress
            ? `${progress.pairs_complete} of ${progress.pairs_total} pairs complete, ${progress.votes} votes collected.`
            : "";
          this.swap(el("h2", "", "All done"), el("p", "", `No more pairs for you. ${summary}`));
          return;
        }
        if (state.currentPair === null) {
          this.swap(el("p", "", "Loading…"));
          return;
        }
        const header = el("h2", "", `Pair ${state.currentPair.id}`);
        const selectors = el("div", "selectors");
        for (const category of CATEGORIES) {
          selectors.append(
            categorySelector(
              category,
              state.selections[category],
              state.focusedCategory === category,
              (cat, severity) => flow().select(cat, severity),
            ),
          );
        }
        const submit = el("button", "primary", "Submit vote");
        submit.disabled = !flow().submitEnabled;
        submit.addEventListener("click", () => void flow().submit());
        const shortcuts = el(
          "p",
          "help",
          "Keys: 0 / 1 / 2 / g set the focused category, Tab moves focus, Enter submits.",
        );
        const children: HTMLElement[] = [header];
        if (state.notice) children.push(el("div", "banner", state.notice));
        const progress = state.progress;
        if (progress) {
          children.push(
            el("p", "progress", `${progress.pairs_complete}/${progress.pairs_total} pairs complete`),
          );
        }
        children.push(pairPanel(state.currentPair), selectors, submit, shortcuts);
        this.swap(...children);
      },
    };
  }

  showError(message: string): void {
    this.swap(el("div", "banner error", message));
  }
}
