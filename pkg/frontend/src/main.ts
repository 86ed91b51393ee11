/** DOM wiring: highlight a span of the loaded document as the pre-search
 * context, optionally type a partial intent, and submit. */

import { ApiClient, ApiError, PredictResponseBody } from "./api.js";
import {
  HistoryEntry,
  buildPredictRequest,
  expectedVariant,
  initialState,
  normalizeNewlines,
  pushHistory,
  snapshotState,
} from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const docInput = el<HTMLTextAreaElement>("doc-input");
const loadButton = el<HTMLButtonElement>("load-doc");
const docView = el<HTMLPreElement>("doc-view");
const selectionLabel = el<HTMLSpanElement>("selection-label");
const wholeDocToggle = el<HTMLInputElement>("whole-doc");
const intentInput = el<HTMLInputElement>("intent-input");
const questionsToggle = el<HTMLInputElement>("mode-questions");
const passagesToggle = el<HTMLInputElement>("mode-passages");
const kInput = el<HTMLInputElement>("k-input");
const nQuestionsInput = el<HTMLInputElement>("n-questions-input");
const submitButton = el<HTMLButtonElement>("submit");
const regenerateButton = el<HTMLButtonElement>("regenerate");
const errorBox = el<HTMLDivElement>("error");
const badge = el<HTMLSpanElement>("variant-badge");
const questionsList = el<HTMLUListElement>("questions");
const passagesList = el<HTMLOListElement>("passages");
const passageDetail = el<HTMLPreElement>("passage-detail");
const historyList = el<HTMLUListElement>("history");
const apiBaseInput = el<HTMLInputElement>("api-base");
const healthLabel = el<HTMLSpanElement>("health");

const params = new URLSearchParams(window.location.search);
const defaultBase = params.get("api") ?? `${window.location.protocol}//${window.location.hostname}:8080`;
apiBaseInput.value = defaultBase;

const client = new ApiClient(defaultBase);
const state = initialState();
let history: HistoryEntry<PredictResponseBody>[] = [];
let submitted = false;

function refreshHealth(): void {
  client
    .health()
    .then((health) => {
      healthLabel.textContent = `${health.status} (${health.corpus_docs} docs)`;
    })
    .catch(() => {
      healthLabel.textContent = "unreachable";
    });
}

apiBaseInput.addEventListener("change", () => {
  client.setBaseUrl(apiBaseInput.value.trim());
  refreshHealth();
});

loadButton.addEventListener("click", () => {
  state.documentText = normalizeNewlines(docInput.value);
  state.selection = null;
  docView.textContent = state.documentText;
  selectionLabel.textContent = "none";
});

// The document is rendered as a single text node, so range offsets are
// character offsets into the normalized text.
docView.addEventListener("mouseup", () => {
  const selection = window.getSelection();
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) return;
  const range = selection.getRangeAt(0);
  const textNode = docView.firstChild;
  if (!textNode || range.startContainer !== textNode || range.endContainer !== textNode) return;
  state.selection = { start: range.startOffset, end: range.endOffset };
  selectionLabel.textContent = `[${range.startOffset}, ${range.endOffset})`;
});

function readControls(): void {
  state.wholeDocument = wholeDocToggle.checked;
  state.intentText = intentInput.value;
  state.modes = { questions: questionsToggle.checked, passages: passagesToggle.checked };
}

function renderResponse(response: PredictResponseBody): void {
  badge.textContent = response.variant_used;
  questionsList.replaceChildren(
    ...response.questions.map((q) => {
      const item = document.createElement("li");
      item.textContent = q.text;
      const provider = document.createElement("small");
      provider.textContent = ` (${q.provider})`;
      item.appendChild(provider);
      return item;
    }),
  );
  passagesList.replaceChildren(
    ...response.passages.map((p) => {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = "#";
      link.textContent = `${p.doc_id} (${p.score.toFixed(4)})`;
      link.addEventListener("click", (event) => {
        event.preventDefault();
        client
          .document(p.doc_id)
          .then((doc) => {
            passageDetail.textContent = doc.text;
          })
          .catch((error) => showError(error));
      });
      item.appendChild(link);
      item.appendChild(document.createTextNode(" " + p.snippet));
      return item;
    }),
  );
}

function renderHistory(): void {
  historyList.replaceChildren(
    ...history.map((entry, i) => {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = "#";
      const variant = entry.response.variant_used;
      link.textContent = `#${i + 1} ${variant}: ${entry.state.intentText || "(no intent)"}`;
      link.addEventListener("click", (event) => {
        event.preventDefault();
        renderResponse(entry.response);
      });
      item.appendChild(link);
      return item;
    }),
  );
}

function showError(error: unknown): void {
  // inline error; prior results stay on screen
  const message =
    error instanceof ApiError
      ? `API error ${error.code}: ${error.message}`
      : error instanceof Error
        ? error.message
        : String(error);
  errorBox.textContent = message;
  errorBox.hidden = false;
}

function submit(): void {
  readControls();
  errorBox.hidden = true;
  let body;
  try {
    body = buildPredictRequest(state, {
      k: Number(kInput.value) || 10,
      nQuestions: Number(nQuestionsInput.value) || 3,
    });
  } catch (error) {
    showError(error);
    return;
  }
  badge.textContent = expectedVariant(body) ?? "?";
  client
    .predict(body)
    .then((response) => {
      submitted = true;
      regenerateButton.disabled = false;
      renderResponse(response);
      history = pushHistory(history, { state: snapshotState(state), response });
      renderHistory();
    })
    .catch((error) => {
      if (error instanceof DOMException && error.name === "AbortError") return;
      showError(error);
    });
}

submitButton.addEventListener("click", submit);
regenerateButton.addEventListener("click", () => {
  if (submitted) submit();
});

refreshHealth();
