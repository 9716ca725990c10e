"""Live study service: curriculum sessions for human players over HTTP.

Each session pairs one player with a task-picking condition: NoTutorial
drops the player straight into the final test task, ExpertOrdered walks a
fixed lesson sequence, and HapAdaptive runs the same logit-teacher update
used in training, one update per finished episode, so the tasks a player
struggles with come back more often.

Every state change appends events to a per-session append-only log; clients
read batches over request/response or subscribe to a push stream. The wire
format is line-delimited JSON, documented byte-exactly in docs/protocol.md.
Determinism contract: two sessions with the same seed and the same scripted
inputs produce identical event logs (session ids never appear inside
events, only in the response envelope and the export header).
"""

from __future__ import annotations

import json
import mimetypes
import re
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

import numpy as np

from .envs import make_env
from .envs.base import CELL_CHARS, SIZE
from .nn import sample
from .rng import SeedTree
from .teacher import CurriculumConfig, LogitTeacher, task_distribution, update_logit_teacher

WIRE_VERSION = "hap-wire-1"
EXPORT_VERSION = "hap-session-1"

CONDITIONS = ("NoTutorial", "ExpertOrdered", "HapAdaptive")

# lesson order for the scripted expert; ends on the test task and stays there
EXPERT_SEQUENCE = ("empty", "crossing", "doorkey", "fourrooms", "multiroom", "playground")
TEST_TASK = "playground"

# one-line skill captions shown by tutorial conditions with each assignment
SKILL_CAPTIONS = {
    "empty": "Walk to the goal tile.",
    "crossing": "Find the opening in the wall; stay out of the lava.",
    "doorkey": "Pick up the key, open the locked door, then reach the goal.",
    "fourrooms": "Move from room to room through the doorways.",
    "multiroom": "Open each closed door on the way to the goal.",
    "playground": "Use every skill you have practiced; reach the goal.",
}

# human-timescale teacher: immediate single-episode updates, short memory,
# raw returns as the signal (a batch of one has no usable batch mean)
HUMAN_TEACHER = dict(kind="logit", teacher_lr=1.0, entropy_weight=0.01, p_min=0.05,
                     warmup_episodes_per_task=0, update_every=1, history_window=10,
                     baseline="none")

MOVE_LABELS = {0: "up", 1: "down", 2: "left", 3: "right"}


def wire_dumps(obj) -> str:
    """Canonical one-line JSON: compact separators, keys in insertion order."""
    return json.dumps(obj, separators=(",", ":"))


class ServiceError(Exception):
    """Protocol-level failure carried to the client as a JSON error line."""

    def __init__(self, error: str, message: str, status: int):
        super().__init__(message)
        self.error = error
        self.message = message
        self.status = status


def bad_request(message: str) -> ServiceError:
    return ServiceError("bad_request", message, 400)


def not_found(message: str) -> ServiceError:
    return ServiceError("not_found", message, 404)


def conflict(message: str) -> ServiceError:
    return ServiceError("conflict", message, 409)


class Session:
    """One player's curriculum run; every mutation happens under self.lock.

    The event log is append-only and totally ordered (seq starts at 1); the
    condition is fixed at creation; at most one episode is active at a time.
    """

    def __init__(self, sid: str, condition: str, seed: int,
                 env_kind: str = "minigrid", cap: int = 200):
        if condition not in CONDITIONS:
            raise bad_request(f"unknown condition {condition!r}; choose from {list(CONDITIONS)}")
        self.id = sid
        self.condition = condition
        self.seed = int(seed)
        self.lock = threading.RLock()
        self.changed = threading.Condition(self.lock)
        self.env = make_env(env_kind, cap=cap)
        tree = SeedTree(self.seed).child("service")
        self._layout_rng = tree.stream("layout-seeds")
        self._assign_rng = tree.stream("teacher")
        self._label_rng = tree.stream("labels")
        self.teacher = None
        if condition == "HapAdaptive":
            self.teacher = LogitTeacher(self.env.space, CurriculumConfig(**HUMAN_TEACHER))
        self.events: list[dict] = []
        self.inputs: list[list] = []
        self.answers: dict | None = None
        self.history = deque(maxlen=HUMAN_TEACHER["history_window"])
        self.episode = 0
        self.episode_done = True
        self.score = 0.0
        self.score_by_episode: list[float] = []
        self.attempts = {t: 0 for t in self.env.space.tasks}
        self.successes = {t: 0 for t in self.env.space.tasks}
        self.total_actions = 0
        self._expert_pos = 0
        self._ret = 0.0
        self._steps = 0
        self._obs_seq = -1
        self._labels = self._make_labels()
        with self.lock:
            self._emit("session_created",
                       condition=self.condition,
                       seed=self.seed,
                       env={"kind": self.env.kind, "cap": self.env.cap},
                       tasks=list(self.env.space.tasks),
                       actions=[{"id": a, "label": self._labels[a],
                                 "kind": "move" if a in MOVE_LABELS else "button"}
                                for a in range(self.env.n_actions)],
                       teacher=dict(HUMAN_TEACHER) if self.teacher else None)
            self._begin_episode(self._next_task()[0])

    # -- event log ------------------------------------------------------------

    def _emit(self, kind: str, **payload) -> dict:
        event = {"v": WIRE_VERSION, "seq": len(self.events) + 1, "type": kind}
        event.update(payload)
        self.events.append(event)
        self.changed.notify_all()
        return event

    def events_after(self, after: int) -> list[dict]:
        with self.lock:
            return self.events[after:]

    def wait_events(self, after: int, timeout: float) -> list[dict]:
        """Events with seq > after, blocking up to timeout for new ones."""
        with self.changed:
            if len(self.events) <= after:
                self.changed.wait(timeout)
            return self.events[after:]

    # -- assignment -----------------------------------------------------------

    def _make_labels(self) -> dict[int, str]:
        labels = dict(MOVE_LABELS)
        extra = [a for a in range(self.env.n_actions) if a not in MOVE_LABELS]
        order = self._label_rng.permutation(len(extra))
        for a, j in zip(extra, order):
            labels[a] = f"Button {int(j) + 1}"
        return labels

    def _next_task(self) -> tuple[str, str, np.ndarray | None]:
        if self.condition == "NoTutorial":
            return TEST_TASK, "fixed", None
        if self.condition == "ExpertOrdered":
            task = EXPERT_SEQUENCE[min(self._expert_pos, len(EXPERT_SEQUENCE) - 1)]
            self._expert_pos += 1
            return task, "sequence", None
        dist = task_distribution(self.teacher)
        idx = sample(dist, self._assign_rng)
        return self.env.space.tasks[idx], "teacher", dist.probs

    def _begin_episode(self, task: str) -> None:
        self.episode += 1
        self.episode_done = False
        self._ret = 0.0
        self._steps = 0
        layout_seed = int(self._layout_rng.integers(2**31 - 1))
        self.env.reset(task, layout_seed)
        caption = None if self.condition == "NoTutorial" else SKILL_CAPTIONS.get(task)
        self._emit("task_assigned", task=task, episode=self.episode, caption=caption)
        self._obs_seq = self._emit("observation", **self._obs_payload())["seq"]

    def _obs_payload(self) -> dict:
        grid = ["".join(CELL_CHARS[int(c)] for c in self.env.grid[r]) for r in range(SIZE)]
        return dict(task=self.env.current_task,
                    episode=self.episode,
                    step=self._steps,
                    grid=grid,
                    agent=[int(self.env.agent[0]), int(self.env.agent[1])],
                    inventory={k: int(self.env.inventory[k]) for k in self.env.inventory_items})

    # -- operations -----------------------------------------------------------

    def submit_action(self, action: int, obs_seq: int) -> list[dict]:
        with self.lock:
            self.inputs.append(["action", int(action), int(obs_seq)])
            if self.episode_done:
                raise conflict("episode has ended; advance the curriculum first")
            if int(obs_seq) != self._obs_seq:
                raise conflict(f"stale observation seq {int(obs_seq)}; latest is {self._obs_seq}")
            if not 0 <= int(action) < self.env.n_actions:
                raise bad_request(f"action id {action} outside 0..{self.env.n_actions - 1}")
            first = len(self.events)
            task = self.env.current_task
            _, reward, done = self.env.step(int(action))
            reward = float(reward)
            done = bool(done)
            success = bool(self.env.succeeded)
            self._steps += 1
            self.total_actions += 1
            self._ret += reward
            self.score += reward
            self._emit("action_result", action=int(action), label=self._labels[int(action)],
                       obs_seq=int(obs_seq), reward=round(reward, 6), done=done,
                       success=success if done else False)
            self._obs_seq = self._emit("observation", **self._obs_payload())["seq"]
            self._emit("score_update", score=round(self.score, 6), delta=round(reward, 6))
            if done:
                self.episode_done = True
                self.attempts[task] += 1
                if success:
                    self.successes[task] += 1
                self.score_by_episode.append(self.score)
                self.history.append(self._ret)
                if self.teacher is not None:
                    self.teacher.on_episode(self.env.space.index(task), self._ret, success)
                    update_logit_teacher(self.teacher, [(task, self._ret)])
                self._emit("episode_end", task=task, episode=self.episode,
                           steps=self._steps, ret=round(self._ret, 6), success=success)
            return self.events[first:]

    def advance(self) -> list[dict]:
        with self.lock:
            self.inputs.append(["advance"])
            if not self.episode_done:
                raise conflict("episode still active; finish it before advancing")
            first = len(self.events)
            task, source, probs = self._next_task()
            dist = None
            if probs is not None:
                dist = {t: round(float(p), 6) for t, p in zip(self.env.space.tasks, probs)}
            self._emit("curriculum_advanced", source=source, distribution=dist)
            self._begin_episode(task)
            return self.events[first:]

    def summary(self) -> list[dict]:
        with self.lock:
            self.inputs.append(["summary"])
            event = self._emit(
                "session_summary",
                condition=self.condition,
                tasks={t: {"attempts": self.attempts[t], "successes": self.successes[t]}
                       for t in self.env.space.tasks},
                score=round(self.score, 6),
                score_by_episode=[round(s, 6) for s in self.score_by_episode],
                episode=self.episode,
                episodes_completed=len(self.score_by_episode),
                actions=self.total_actions)
            return [event]

    def set_answers(self, answers: dict) -> None:
        with self.lock:
            self.inputs.append(["answers", answers])
            self.answers = answers

    # -- export / replay --------------------------------------------------------

    def export_lines(self) -> list[dict]:
        with self.lock:
            meta = {"v": EXPORT_VERSION, "session": self.id, "condition": self.condition,
                    "seed": self.seed, "inputs": [list(op) for op in self.inputs],
                    "answers": self.answers}
            return [meta] + list(self.events)


def replay_session(condition: str, seed: int, inputs: list[list],
                   env_kind: str = "minigrid", cap: int = 200) -> Session:
    """Drive a fresh session through recorded inputs; protocol errors are
    part of the record (they emit nothing) and are skipped."""
    session = Session("replay", condition, seed, env_kind=env_kind, cap=cap)
    for op in inputs:
        try:
            if op[0] == "action":
                session.submit_action(int(op[1]), int(op[2]))
            elif op[0] == "advance":
                session.advance()
            elif op[0] == "summary":
                session.summary()
            elif op[0] == "answers":
                session.set_answers(op[1])
            else:
                raise bad_request(f"unknown recorded input {op[0]!r}")
        except ServiceError as err:
            if err.error == "bad_request" and op[0] not in ("action", "advance", "summary", "answers"):
                raise
    return session


class SessionStore:
    """All live sessions; the dict itself is guarded, sessions self-guard."""

    def __init__(self, env_kind: str = "minigrid", cap: int = 200):
        self.env_kind = env_kind
        self.cap = cap
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._counter = 0

    def _new_id(self) -> str:
        self._counter += 1
        return f"s-{self._counter:06d}"

    def create(self, condition: str, seed: int) -> Session:
        session = Session("pending", condition, seed, env_kind=self.env_kind, cap=self.cap)
        with self._lock:
            session.id = self._new_id()
            self._sessions[session.id] = session
        return session

    def get(self, sid: str) -> Session:
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise not_found(f"no session {sid!r}")
        return session

    def adopt(self, session: Session, preferred_id: str) -> Session:
        with self._lock:
            session.id = preferred_id if preferred_id not in self._sessions else self._new_id()
            self._sessions[session.id] = session
        return session

    def import_export(self, text: str) -> Session:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise bad_request("empty import")
        try:
            meta = json.loads(lines[0])
        except json.JSONDecodeError as err:
            raise bad_request(f"import header is not JSON: {err}") from None
        if not isinstance(meta, dict) or meta.get("v") != EXPORT_VERSION:
            raise bad_request(f"import header must declare v {EXPORT_VERSION!r}")
        for key in ("session", "condition", "seed", "inputs"):
            if key not in meta:
                raise bad_request(f"import header missing {key!r}")
        recorded = [json.loads(ln) for ln in lines[1:]]
        session = replay_session(meta["condition"], int(meta["seed"]), meta["inputs"],
                                 env_kind=self.env_kind, cap=self.cap)
        if meta.get("answers") is not None:
            session.answers = meta["answers"]
            if ["answers", meta["answers"]] not in session.inputs:
                session.inputs.append(["answers", meta["answers"]])
        if session.events != recorded:
            raise bad_request("import replay diverged from the recorded event log")
        return self.adopt(session, str(meta["session"]))


# -- HTTP layer -----------------------------------------------------------------

STREAM_TICK = 0.25


class ServiceServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, handler, store: SessionStore, static_dir=None):
        super().__init__(address, handler)
        self.store = store
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        self.stopping = threading.Event()

    def shutdown(self):
        self.stopping.set()
        super().shutdown()


class Handler(BaseHTTPRequestHandler):
    server: ServiceServer

    def log_message(self, fmt, *args):
        pass

    # -- plumbing -------------------------------------------------------------

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as err:
            raise bad_request(f"request body is not JSON: {err}") from None
        if not isinstance(body, dict):
            raise bad_request("request body must be a JSON object")
        return body

    def _send_lines(self, lines: list[dict], status: int = 200) -> None:
        body = "".join(wire_dumps(ln) + "\n" for ln in lines).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_events(self, session_id: str, events: list[dict], extra: dict | None = None) -> None:
        envelope = {"v": WIRE_VERSION, "session": session_id, "status": "ok",
                    "events": len(events)}
        if extra:
            envelope.update(extra)
        self._send_lines([envelope] + events)

    def _send_error(self, err: ServiceError) -> None:
        self._send_lines([{"v": WIRE_VERSION, "status": "error",
                           "error": err.error, "message": err.message}], status=err.status)

    def _int_query(self, query: dict, name: str, default: int) -> int:
        values = query.get(name)
        if not values:
            return default
        try:
            return int(values[0])
        except ValueError:
            raise bad_request(f"query parameter {name} must be an integer") from None

    # -- routing --------------------------------------------------------------

    ROUTES = (
        ("POST", re.compile(r"^/api/sessions$"), "_create"),
        ("POST", re.compile(r"^/api/sessions/([^/]+)/actions$"), "_actions"),
        ("POST", re.compile(r"^/api/sessions/([^/]+)/advance$"), "_advance"),
        ("GET", re.compile(r"^/api/sessions/([^/]+)/summary$"), "_summary"),
        ("GET", re.compile(r"^/api/sessions/([^/]+)/events$"), "_events"),
        ("GET", re.compile(r"^/api/sessions/([^/]+)/export$"), "_export"),
        ("POST", re.compile(r"^/api/sessions/([^/]+)/answers$"), "_answers"),
        ("POST", re.compile(r"^/api/import$"), "_import"),
    )

    def _route(self, method: str) -> None:
        parts = urlsplit(self.path)
        query = parse_qs(parts.query)
        try:
            for verb, pattern, name in self.ROUTES:
                match = pattern.match(parts.path)
                if match:
                    if verb != method:
                        raise bad_request(f"{parts.path} expects {verb}")
                    getattr(self, name)(*match.groups(), query=query)
                    return
            if method == "GET" and not parts.path.startswith("/api/"):
                self._static(parts.path)
                return
            raise not_found(f"no route {parts.path}")
        except ServiceError as err:
            self._send_error(err)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def do_GET(self):
        self._route("GET")

    def do_POST(self):
        self._route("POST")

    # -- handlers ---------------------------------------------------------------

    def _create(self, query: dict) -> None:
        body = self._body()
        condition = body.get("condition")
        if not isinstance(condition, str):
            raise bad_request("body must carry a string field 'condition'")
        seed = body.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise bad_request("'seed' must be an integer")
        session = self.server.store.create(condition, seed)
        self._send_events(session.id, session.events_after(0))

    def _actions(self, sid: str, query: dict) -> None:
        session = self.server.store.get(sid)
        body = self._body()
        action = body.get("action")
        obs_seq = body.get("obs_seq")
        if not isinstance(action, int) or isinstance(action, bool):
            raise bad_request("body must carry an integer field 'action'")
        if not isinstance(obs_seq, int) or isinstance(obs_seq, bool):
            raise bad_request("body must carry an integer field 'obs_seq' "
                              "(seq of the observation acted on)")
        self._send_events(session.id, session.submit_action(action, obs_seq))

    def _advance(self, sid: str, query: dict) -> None:
        session = self.server.store.get(sid)
        self._body()
        self._send_events(session.id, session.advance())

    def _summary(self, sid: str, query: dict) -> None:
        session = self.server.store.get(sid)
        self._send_events(session.id, session.summary())

    def _events(self, sid: str, query: dict) -> None:
        session = self.server.store.get(sid)
        after = self._int_query(query, "after", 0)
        wait = self._int_query(query, "wait", 1)
        if wait == 0:
            self._send_events(session.id, session.events_after(after))
            return
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Connection", "close")
        self.end_headers()
        head = {"v": WIRE_VERSION, "session": session.id, "status": "ok", "stream": True}
        try:
            self.wfile.write((wire_dumps(head) + "\n").encode())
            self.wfile.flush()
            cursor = after
            while not self.server.stopping.is_set():
                batch = session.wait_events(cursor, timeout=STREAM_TICK)
                for event in batch:
                    self.wfile.write((wire_dumps(event) + "\n").encode())
                if batch:
                    cursor = batch[-1]["seq"]
                    self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _export(self, sid: str, query: dict) -> None:
        session = self.server.store.get(sid)
        self._send_lines(session.export_lines())

    def _answers(self, sid: str, query: dict) -> None:
        session = self.server.store.get(sid)
        body = self._body()
        if not body:
            raise bad_request("answers body must be a non-empty JSON object")
        session.set_answers(body)
        self._send_events(session.id, [], extra={"answers": body})

    def _import(self, query: dict) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        text = self.rfile.read(length).decode() if length else ""
        session = self.server.store.import_export(text)
        self._send_events(session.id, session.events_after(0))

    # -- static UI ----------------------------------------------------------------

    def _static(self, path: str) -> None:
        root = self.server.static_dir
        if root is None:
            raise not_found("no static bundle configured (set --static-dir or HAP_STATIC_DIR)")
        rel = path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if root not in target.parents and target != root:
            raise not_found("path escapes the static root")
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            raise not_found(f"no static file {rel!r}")
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def make_server(bind: str = "127.0.0.1", port: int = 8008, static_dir=None,
                env_kind: str = "minigrid", cap: int = 200) -> ServiceServer:
    store = SessionStore(env_kind=env_kind, cap=cap)
    return ServiceServer((bind, port), Handler, store, static_dir=static_dir)


def serve(bind: str = "127.0.0.1", port: int = 8008, static_dir=None) -> None:
    server = make_server(bind=bind, port=port, static_dir=static_dir)
    host, actual_port = server.server_address[:2]
    print(f"live study service on http://{host}:{actual_port}/ (Ctrl-C stops)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
