// Wire types for the session protocol. Field names mirror the JSON
// exactly; the server owns all value formatting and diffing, so every
// string here is displayed as-is.

export interface ThreadInfo {
  idx: number;
  name: string;
  fn: string;
}

export interface SessionInfo {
  path: string;
  entry: string;
  base: number;
  next_t: number;
  horizon: number;
  gc_runs: number;
  quantum: number;
  excluded: string[];
  threads: ThreadInfo[];
}

export interface ThreadRow {
  idx: number;
  name: string;
  state: string;
  blocked_on: string | null;
}

export interface FrameRow {
  method: string;
  receiver: string | null;
  line: number;
  call_t: number | null;
  pre_horizon: boolean;
  locals: Record<string, string>;
}

export interface ViewPayload {
  t: number;
  kind: string;
  line: number;
  thread: { idx: number; name: string };
  event: string;
  threads: ThreadRow[];
  stack: FrameRow[];
  output: string;
  changed: string | null;
  trace: string;
  trace_ts: (number | null)[];
  output_ts: number[];
  starred: string[];
}

export interface ValuesPayload {
  ref: string;
  at: string;
  values: [number, string][];
}

export interface EvalPayload {
  value: string | null;
  threw: string | null;
  stdout: string;
  events: string[];
}

export interface SourcePayload {
  path: string;
  text: string;
}

export interface Reply {
  status: number;
  body: any;
}

export interface Transport {
  get(path: string, params: Record<string, string | number>): Promise<Reply>;
  post(path: string, body: object): Promise<Reply>;
}

// JSON.stringify with object keys sorted at every level, so a request
// body has exactly one textual form. Transcript fixtures are keyed by
// these strings; the python fixture recorder builds the same ones.
export function stableStringify(v: unknown): string {
  if (v === null || typeof v !== "object") return JSON.stringify(v);
  if (Array.isArray(v)) return "[" + v.map(stableStringify).join(",") + "]";
  const keys = Object.keys(v as object).sort();
  const parts = keys.map(
    (k) => JSON.stringify(k) + ":" + stableStringify((v as any)[k]),
  );
  return "{" + parts.join(",") + "}";
}

export function requestKey(
  method: string,
  path: string,
  paramsOrBody: Record<string, string | number> | object | null,
): string {
  if (method === "GET") {
    const params = (paramsOrBody ?? {}) as Record<string, string | number>;
    const qs = Object.keys(params)
      .sort()
      .map((k) => `${k}=${params[k]}`)
      .join("&");
    return qs ? `GET ${path}?${qs}` : `GET ${path}`;
  }
  return `${method} ${path} ${stableStringify(paramsOrBody ?? {})}`;
}

export class HttpTransport implements Transport {
  constructor(private base: string = "") {}

  async get(
    path: string,
    params: Record<string, string | number>,
  ): Promise<Reply> {
    const qs = Object.keys(params)
      .sort()
      .map((k) => `${encodeURIComponent(k)}=${encodeURIComponent(params[k])}`)
      .join("&");
    const url = this.base + path + (qs ? "?" + qs : "");
    const resp = await fetch(url);
    return { status: resp.status, body: await resp.json() };
  }

  async post(path: string, body: object): Promise<Reply> {
    const resp = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return { status: resp.status, body: await resp.json() };
  }
}
