// Client-side state. Everything shown on screen comes from payloads;
// this records only which timestamp is displayed and what is selected.

export type PaneName =
  | "threads"
  | "stack"
  | "trace"
  | "code"
  | "locals"
  | "objects"
  | "output";

export interface WatchRow {
  ref: string;
  at: string;
}

export interface UiState {
  t: number;
  prevT: number | null; // timestamp displayed before the current one
  selectedPane: PaneName | null;
  selectedFrame: number | null; // stack index, null = innermost
  watch: WatchRow[];
  message: string;
}

export function initialState(t: number): UiState {
  return {
    t,
    prevT: null,
    selectedPane: null,
    selectedFrame: null,
    watch: [],
    message: "",
  };
}
