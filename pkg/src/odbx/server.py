"""HTTP face of a recorded session.

Every endpoint is a pure handler taking the store and plain parameters
and returning ``(status, body)``; the socket layer below them only
parses requests and serializes JSON. Tests and other frontends can call
the handlers directly. Protocol details in docs/protocol.md.

Values cross the wire as display text, never as raw object graphs: the
client renders strings, the server owns formatting.
"""

from __future__ import annotations

import json
import os
import posixpath
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .errors import PatternError, PreHorizonError, ReplayError
from . import query as _query
from . import replay as _replay
from . import timeline as tm
from .recorder import EventStore

__all__ = [
    "session_info",
    "view_json",
    "navigate_json",
    "values_json",
    "search_json",
    "eval_json",
    "source_info",
    "make_server",
    "serve",
]


def _fmt(store, v, t):
    return tm.format_value_at(store, v, t)


def session_info(store: EventStore) -> tuple[int, dict]:
    return 200, {
        "path": store.path,
        "entry": store.entry,
        "base": store.base,
        "next_t": store.next_t,
        "horizon": store.horizon,
        "gc_runs": store.gc_runs,
        "quantum": store.quantum,
        "excluded": list(store.excluded),
        "threads": [{"idx": th.idx, "name": th.name, "fn": th.fn_name}
                    for th in store.threads],
    }


def view_json(store: EventStore, t: int,
              prev: int | None = None) -> tuple[int, dict]:
    try:
        v = tm.reconstruct_view(store, t)
        starred = [] if prev is None else tm.starred_locals(store, prev, t)
    except (PreHorizonError, IndexError) as e:
        return 422, {"error": str(e)}
    frames = []
    for fr in v.stack:
        tl = fr.tl
        frames.append({
            "method": tl.method,
            "receiver": None if tl.receiver is None
            else tm.format_value(tl.receiver),
            "line": fr.line,
            "call_t": tl.call_t,
            "pre_horizon": tl.pre_horizon,
            "locals": {name: _fmt(store, val, t)
                       for name, val in fr.locals.items()},
        })
    changed = tm.changed_ref(store, t)
    return 200, {
        "t": v.t,
        "kind": tm.event_kind_name(v.kind),
        "line": v.line,
        "thread": {"idx": v.thread_idx, "name": v.thread_name},
        "event": v.event_text,
        "threads": [{"idx": th.idx, "name": th.name, "state": th.state,
                     "blocked_on": None if th.blocked_on is None
                     else tm.format_value(th.blocked_on)}
                    for th in v.threads],
        "stack": frames,
        "output": v.output,
        "changed": None if changed is None else tm.format_ref(store, changed),
        "trace": tm.format_trace_block(store, v.thread_idx, t),
        "trace_ts": [ct for ct, _ in
                     tm.trace_block_lines(store, v.thread_idx, t)],
        "output_ts": tm.output_ts_at(store, t),
        "starred": starred,
    }


def navigate_json(store: EventStore, body: dict) -> tuple[int, dict]:
    t = body.get("t")
    command = body.get("command")
    if not isinstance(t, int) or not isinstance(command, str):
        return 400, {"error": "navigate needs integer t and string command"}
    try:
        target = tm.navigate(store, t, command, body.get("arg"))
    except ValueError as e:
        return 422, {"error": str(e)}
    except (PreHorizonError, IndexError) as e:
        return 422, {"error": str(e)}
    return 200, {"t": target}


def values_json(store: EventStore, ref_text: str, t: int) -> tuple[int, dict]:
    try:
        ref = tm.resolve_ref(store, t, ref_text)
    except (ValueError, PreHorizonError, IndexError) as e:
        return 422, {"error": str(e)}
    history = [[vt, _fmt(store, v, vt)]
               for vt, v in tm.values_of(store, ref)]
    return 200, {
        "ref": tm.format_ref(store, ref),
        "at": _fmt(store, tm.value_at(store, ref, t), t),
        "values": history,
    }


def search_json(store: EventStore, body: dict) -> tuple[int, dict]:
    pattern = body.get("pattern")
    if not isinstance(pattern, str):
        return 400, {"error": "search needs a pattern string"}
    from_t = body.get("from")
    if from_t is not None and not isinstance(from_t, int):
        return 400, {"error": "from must be an integer"}
    try:
        if body.get("all"):
            return 200, {"matches": _query.all_matches(store, pattern)}
        t = _query.search_events(store, pattern, from_t,
                                 bool(body.get("backward")))
    except PatternError as e:
        return 422, {"error": str(e), "pos": e.pos}
    return 200, {"t": t}


def eval_json(store: EventStore, body: dict) -> tuple[int, dict]:
    t = body.get("t")
    call = body.get("call")
    if not isinstance(t, int) or not isinstance(call, str):
        return 400, {"error": "eval needs integer t and string call"}
    overrides = body.get("overrides", [])
    if not (isinstance(overrides, list)
            and all(isinstance(o, list) and len(o) == 2
                    and isinstance(o[0], str) and isinstance(o[1], str)
                    for o in overrides)):
        return 400, {"error": "overrides must be [ref, value] string pairs"}
    try:
        r = _replay.eval_text(store, t, call,
                              [(ref, val) for ref, val in overrides])
    except (ReplayError, PreHorizonError, IndexError, ValueError) as e:
        return 422, {"error": str(e)}
    st2 = r.store
    last = st2.next_t - 1
    return 200, {
        "value": None if r.threw is not None
        else tm.format_value_at(st2, r.value, last),
        "threw": None if r.threw is None
        else tm.format_value(r.threw),
        "stdout": r.stdout,
        "events": [f"{t2}  {tm.describe_event(st2, t2)}"
                   for t2 in range(st2.base, st2.next_t)],
    }


def source_info(store: EventStore) -> tuple[int, dict]:
    return 200, {"path": store.path, "text": store.source}


_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


def make_server(store: EventStore, host: str = "127.0.0.1", port: int = 8600,
                static_dir: str | None = None) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server for one session."""

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _send_file(self, relpath: str) -> bool:
            if static_dir is None:
                return False
            clean = posixpath.normpath(relpath.lstrip("/"))
            if clean.startswith(".."):
                return False
            full = os.path.join(static_dir, clean)
            if not os.path.isfile(full):
                return False
            ext = os.path.splitext(full)[1]
            ctype = _CONTENT_TYPES.get(ext, "application/octet-stream")
            with open(full, "rb") as fp:
                data = fp.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
            return True

        def _query_int(self, qs: dict, name: str):
            raw = qs.get(name, [None])[0]
            if raw is None:
                return None, None
            try:
                return int(raw), None
            except ValueError:
                return None, f"{name} must be an integer"

        def do_GET(self):
            url = urlsplit(self.path)
            qs = parse_qs(url.query)
            route = url.path
            if route == "/session":
                self._send(*session_info(store))
            elif route == "/view":
                t, err = self._query_int(qs, "t")
                prev, perr = self._query_int(qs, "prev")
                if err or perr or t is None:
                    self._send(400, {"error": err or perr or "t is required"})
                    return
                self._send(*view_json(store, t, prev))
            elif route == "/values":
                t, err = self._query_int(qs, "t")
                ref = qs.get("ref", [None])[0]
                if err or t is None or ref is None:
                    self._send(400, {"error": err or "ref and t required"})
                    return
                self._send(*values_json(store, ref, t))
            elif route == "/source":
                self._send(*source_info(store))
            elif route == "/" and self._send_file("index.html"):
                pass
            elif self._send_file(route):
                pass
            else:
                self._send(404, {"error": f"no such resource {route}"})

        def do_POST(self):
            url = urlsplit(self.path)
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
                if not isinstance(body, dict):
                    raise ValueError
            except (ValueError, json.JSONDecodeError):
                self._send(400, {"error": "request body must be a JSON "
                                          "object"})
                return
            if url.path == "/navigate":
                self._send(*navigate_json(store, body))
            elif url.path == "/search":
                self._send(*search_json(store, body))
            elif url.path == "/eval":
                self._send(*eval_json(store, body))
            else:
                self._send(404, {"error": f"no such resource {url.path}"})

    return ThreadingHTTPServer((host, port), Handler)


def serve(store: EventStore, host: str = "127.0.0.1", port: int = 8600,
          static_dir: str | None = None) -> None:
    """Serve one session until interrupted."""
    httpd = make_server(store, host, port, static_dir)
    try:
        httpd.serve_forever()
    finally:
        httpd.server_close()
