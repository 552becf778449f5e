/** Entry point: session bootstrap and screen routing.
 *
 * The service base URL comes from the `service` query parameter, falling
 * back to the default local port.
 */

import { HttpApi } from "./api.js";
import { LabelingFlow, MemoryStorage, QualificationFlow, type StorageLike } from "./controller.js";
import { DomView } from "./dom.js";

const DEFAULT_SERVICE = "http://127.0.0.1:8765";

function serviceBaseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? DEFAULT_SERVICE;
}

function storage(): StorageLike {
  try {
    window.localStorage.setItem("simpfact.probe", "1");
    window.localStorage.removeItem("simpfact.probe");
    return window.localStorage;
  } catch {
    return new MemoryStorage();
  }
}

function startLabeling(api: HttpApi, view: DomView, annotatorId: string): void {
  let flow: LabelingFlow;
  flow = new LabelingFlow(api, annotatorId, view.labelingView(() => flow));
  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement && event.target.type === "text") return;
    if (event.key === "Tab") {
      event.preventDefault();
      flow.focusNext();
    } else if (event.key === "Enter") {
      void flow.submit();
    } else {
      flow.handleKey(event.key);
    }
  });
  void flow.start().catch((error) => view.showError(`cannot reach the service: ${error}`));
}

function startQualification(api: HttpApi, view: DomView, annotatorId: string): void {
  let flow: QualificationFlow;
  flow = new QualificationFlow(api, annotatorId, storage(), view.qualificationView(() => flow));
  window.addEventListener("simpfact:qualified", () => startLabeling(api, view, annotatorId));
  void flow.start().catch((error) => view.showError(`cannot reach the service: ${error}`));
}

function showLogin(api: HttpApi, view: DomView, root: HTMLElement): void {
  const form = document.createElement("form");
  form.className = "login";
  const heading = document.createElement("h2");
  heading.textContent = "Annotator sign-in";
  const input = document.createElement("input");
  input.type = "text";
  input.placeholder = "annotator id";
  input.required = true;
  const button = document.createElement("button");
  button.className = "primary";
  button.textContent = "Continue";
  form.append(heading, input, button);
  root.replaceChildren(form);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const annotatorId = input.value.trim();
    if (!annotatorId) return;
    void api
      .qualificationStatus(annotatorId)
      .then((outcome) => {
        if (outcome !== null && outcome.qualified) {
          startLabeling(api, view, annotatorId);
        } else if (outcome !== null && !outcome.qualified) {
          view.showError(
            `Annotator ${annotatorId} scored ${(outcome.score * 100).toFixed(0)}% and is not qualified.`,
          );
        } else {
          startQualification(api, view, annotatorId);
        }
      })
      .catch((error) => view.showError(`cannot reach the service: ${error}`));
  });
}

function boot(): void {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app container");
  const api = new HttpApi(serviceBaseUrl());
  const view = new DomView(root);
  showLogin(api, view, root);
}

boot();
