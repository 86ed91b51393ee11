/**
 * Pure selection/request logic, kept free of DOM so it can be tested
 * without a browser.
 */

export type Mode = "questions" | "passages";
export type VariantName = "context_intent" | "source_intent" | "context" | "source";

export interface SelectionSpan {
  start: number;
  end: number;
}

export interface SelectionState {
  /** Newline-normalized document text. */
  documentText: string;
  selection: SelectionSpan | null;
  /** Treat the whole document as the context when nothing is selected. */
  wholeDocument: boolean;
  intentText: string;
  modes: { questions: boolean; passages: boolean };
}

export interface PredictRequestBody {
  source?: string;
  context: string;
  intent?: string;
  modes: Mode[];
  k: number;
  n_questions: number;
}

export function initialState(): SelectionState {
  return {
    documentText: "",
    selection: null,
    wholeDocument: false,
    intentText: "",
    modes: { questions: true, passages: true },
  };
}

/** The UI's single normalization point: all line endings become "\n". */
export function normalizeNewlines(text: string): string {
  return text.replace(/\r\n/g, "\n").replace(/\r/g, "\n");
}

export function sliceSelection(documentText: string, span: SelectionSpan): string {
  if (!(span.start >= 0 && span.start < span.end && span.end <= documentText.length)) {
    throw new RangeError(
      `selection [${span.start}, ${span.end}) out of bounds for document of length ${documentText.length}`,
    );
  }
  return documentText.slice(span.start, span.end);
}

export function enabledModes(state: SelectionState): Mode[] {
  const modes: Mode[] = [];
  if (state.modes.questions) modes.push("questions");
  if (state.modes.passages) modes.push("passages");
  return modes;
}

export interface RequestOptions {
  k?: number;
  nQuestions?: number;
}

/**
 * Build the /api/predict body: context is the selected span (or the whole
 * document), the source accompanies it only when the span is a strict
 * substring, and the intent rides along when nonempty.
 */
export function buildPredictRequest(
  state: SelectionState,
  options: RequestOptions = {},
): PredictRequestBody {
  const modes = enabledModes(state);
  if (modes.length === 0) {
    throw new Error("enable at least one of questions/passages before submitting");
  }
  let context: string;
  let source: string | undefined;
  if (state.selection) {
    context = sliceSelection(state.documentText, state.selection);
    const strict =
      state.selection.start > 0 || state.selection.end < state.documentText.length;
    if (strict) {
      source = state.documentText;
    }
  } else if (state.wholeDocument) {
    context = state.documentText;
  } else {
    throw new Error("select a span or turn on whole-document mode");
  }
  if (!context.trim()) {
    throw new Error("the selected context is empty");
  }
  const body: PredictRequestBody = {
    context,
    modes,
    k: options.k ?? 10,
    n_questions: options.nQuestions ?? 3,
  };
  if (source !== undefined) {
    body.source = source;
  }
  const intent = state.intentText.trim();
  if (intent) {
    body.intent = intent;
  }
  return body;
}

/** Client-side mirror of the server's variant routing, for the badge. */
export function expectedVariant(body: {
  source?: string;
  context?: string;
  intent?: string;
}): VariantName | null {
  const has = (value?: string) => Boolean(value && value.trim());
  if (has(body.intent)) {
    if (has(body.context)) return "context_intent";
    if (has(body.source)) return "source_intent";
    return null;
  }
  if (has(body.context)) return "context";
  if (has(body.source)) return "source";
  return null;
}

export interface HistoryEntry<R> {
  state: SelectionState;
  response: R;
}

export const HISTORY_CAP = 10;

/** Append keeping only the most recent `cap` entries. */
export function pushHistory<R>(
  history: HistoryEntry<R>[],
  entry: HistoryEntry<R>,
  cap: number = HISTORY_CAP,
): HistoryEntry<R>[] {
  return [...history, entry].slice(-cap);
}

/** Deep-copy the state so history entries stay immutable snapshots. */
export function snapshotState(state: SelectionState): SelectionState {
  return {
    documentText: state.documentText,
    selection: state.selection ? { ...state.selection } : null,
    wholeDocument: state.wholeDocument,
    intentText: state.intentText,
    modes: { ...state.modes },
  };
}
