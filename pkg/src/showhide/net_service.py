"""Networked game service: session lifecycle, real-time channel, scoring, export.

Single-process deployment: persistence is an append-only event log per
session plus periodic snapshots in a data directory; on startup every log is
replayed and sessions resume. Event application per session is serialized
through one asyncio lock; scoring and preview run on the thread pool so they
never block the per-session queue.
"""

from __future__ import annotations

import asyncio
import json
import logging
import secrets
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from . import game_core
from .chart_spec import chart_spec_from_dict, validate_spec
from .data_model import Dataset, PuzzleSpec
from .errors import (
    CorruptLogError,
    ForbiddenError,
    IllegalEventError,
    ParseError,
    RosterSizeError,
    RoundNotCompleteError,
    ShowHideError,
)
from .game_core import (
    ADMIN,
    GameEvent,
    Phase,
    SessionConfig,
    SessionState,
    apply_event,
    legal_actions,
)
from .puzzle_gen import load_bundle
from .signal_rubric import RubricParams, score
from .transform_engine import evaluate
from .utils import canonical_json

logger = logging.getLogger(__name__)

MAX_ENVELOPE_BYTES = 256 * 1024
SNAPSHOT_EVERY = 50
_CODE_ALPHABET = "ABCDEFGHJKMNPQRSTUVWXYZ23456789"


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8787
    data_dir: str = "./data"
    admin_token: str = "admin-token"
    puzzles: dict[str, str] = dc_field(default_factory=dict)   # puzzle id -> bundle dir

    @classmethod
    def from_file(cls, path: str | Path) -> "ServerConfig":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(host=d.get("host", "127.0.0.1"), port=d.get("port", 8787),
                   data_dir=d.get("data_dir", "./data"),
                   admin_token=d["admin_token"], puzzles=dict(d.get("puzzles", {})))


@dataclass
class _Session:
    state: SessionState
    log_path: Path
    join_codes: dict[str, str]                 # player -> code
    tokens: dict[str, str]                     # token -> player
    player_tokens: dict[str, str]              # player -> token
    idempotency: dict[str, dict]               # key -> ack payload
    lock: asyncio.Lock = dc_field(default_factory=asyncio.Lock)
    connections: dict[int, tuple[str, asyncio.Queue]] = dc_field(default_factory=dict)
    next_conn: int = 0


def _snapshot_path(log_path: Path) -> Path:
    return log_path.with_suffix(".snapshot.json")


def _session_from_dict(d: dict) -> SessionState:
    config = SessionConfig.from_dict(d["config"])
    groups = tuple(
        game_core.Group(members=tuple(g["members"]),
                        role_schedule=tuple(g["role_schedule"]),
                        puzzle_order=tuple(g["puzzle_order"]))
        for g in d["groups"])
    rounds = {}
    for key, rd in d["rounds"].items():
        gi, ri = key.split(":")
        rs = game_core.RoundState(
            puzzle_idx=rd["puzzle_idx"],
            phase=Phase(rd["phase"]),
            response_counts=dict(rd["response_counts"]),
            followups_sent=set(rd["followups_sent"]),
            responded_after_followup=set(rd["responded_after_followup"]),
            messages=[game_core.Message(seq=m["seq"], sender=m["from"],
                                        to=tuple(m["to"]), kind=m["kind"],
                                        text=m["text"], charts=tuple(m["charts"]))
                      for m in rd["messages"]],
            contract=rd["contract"],
            abandoned=rd["abandoned"],
        )
        rounds[(int(gi), int(ri))] = rs
    return SessionState(session_id=d["session_id"], config=config,
                        roster=tuple(d["roster"]), groups=groups,
                        current_round=list(d["current_round"]), rounds=rounds,
                        last_seq=d["last_seq"],
                        finished_groups=set(d["finished_groups"]))


class SessionHub:
    """All live sessions plus the puzzle bundles they play over."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.data_dir = Path(config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, _Session] = {}
        self.bundles: dict[str, tuple[Dataset, PuzzleSpec, dict]] = {}
        for pid, path in config.puzzles.items():
            self.bundles[pid] = load_bundle(path)

    # -- persistence -------------------------------------------------------

    def load_existing(self) -> None:
        for log_path in sorted(self.data_dir.glob("*.log")):
            session_id = log_path.stem
            try:
                state = self._resume(log_path)
            except (CorruptLogError, ShowHideError, json.JSONDecodeError) as exc:
                quarantine = log_path.with_suffix(".quarantined")
                log_path.rename(quarantine)
                logger.error("session %s quarantined: %s", session_id, exc)
                continue
            meta = json.loads(log_path.with_suffix(".meta.json").read_text("utf-8"))
            self.sessions[session_id] = _Session(
                state=state, log_path=log_path,
                join_codes=meta["join_codes"],
                tokens={t: p for p, t in meta["tokens"].items()},
                player_tokens=dict(meta["tokens"]),
                idempotency={},
            )
            logger.info("resumed session %s at seq %d", session_id, state.last_seq)

    def _resume(self, log_path: Path) -> SessionState:
        events = self._read_events(log_path)
        snap_path = _snapshot_path(log_path)
        if snap_path.exists():
            snap = json.loads(snap_path.read_text("utf-8"))
            state = _session_from_dict(snap)
            tail = [e for e in events if e.seq > state.last_seq]
            for event in tail:
                state = apply_event(state, event)
            return state
        return game_core.replay(events)

    def _read_events(self, log_path: Path) -> list[GameEvent]:
        events = []
        for line in log_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                events.append(GameEvent.from_dict(json.loads(line)))
        return events

    def _append(self, sess: _Session, event: GameEvent) -> None:
        with sess.log_path.open("a", encoding="utf-8") as fh:
            fh.write(canonical_json(event.to_dict()) + "\n")
        if event.seq % SNAPSHOT_EVERY == 0:
            _snapshot_path(sess.log_path).write_text(
                canonical_json(sess.state.to_dict()), encoding="utf-8")

    def _write_meta(self, session_id: str) -> None:
        sess = self.sessions[session_id]
        meta = {"join_codes": sess.join_codes, "tokens": sess.player_tokens}
        sess.log_path.with_suffix(".meta.json").write_text(
            canonical_json(meta), encoding="utf-8")

    # -- auth ----------------------------------------------------------------

    def resolve(self, session_id: str, token: str) -> str:
        """Return the player name for a token, or ADMIN for the admin token."""
        if token == self.config.admin_token:
            return ADMIN
        sess = self.sessions.get(session_id)
        if sess is None or token not in sess.tokens:
            raise ForbiddenError("unknown token")
        return sess.tokens[token]

    def grant(self, session_id: str, player: str) -> dict:
        sess = self.sessions[session_id]
        state = sess.state
        gi = state.group_of(player)
        ri = state.current_round[gi]
        group = state.groups[gi]
        role = "receiver" if group.receiver(ri) == player else "sender"
        is_sender = role == "sender" and gi not in state.finished_groups
        return {
            "player": player,
            "role": role,
            "group": gi,
            "round": ri,
            "puzzle": state.config.puzzles[state.rounds[(gi, ri)].puzzle_idx],
            "token": sess.player_tokens[player],
            "capabilities": {"can_download_dataset": is_sender,
                             "can_preview": is_sender},
        }

    # -- lifecycle -------------------------------------------------------------

    def create_session(self, session_id: str, config: SessionConfig,
                       roster: list[str]) -> dict:
        if session_id in self.sessions:
            raise IllegalEventError("SessionExists", session_id)
        for pid in config.puzzles:
            if pid not in self.bundles:
                raise ParseError("config.puzzles", f"unknown puzzle {pid!r}")
        event = game_core.session_created(session_id, config, roster)
        state = apply_event(None, event)
        log_path = self.data_dir / f"{session_id}.log"
        sess = _Session(state=state, log_path=log_path,
                        join_codes={}, tokens={}, player_tokens={}, idempotency={})
        for player in roster:
            code = "".join(secrets.choice(_CODE_ALPHABET) for _ in range(6))
            token = secrets.token_hex(16)
            sess.join_codes[player] = code
            sess.tokens[token] = player
            sess.player_tokens[player] = token
        self.sessions[session_id] = sess
        self._append(sess, event)
        self._write_meta(session_id)
        return {"session": session_id, "join_codes": dict(sess.join_codes)}

    def join(self, session_id: str, code: str) -> dict:
        sess = self.sessions.get(session_id)
        if sess is None:
            raise ForbiddenError("unknown session")
        for player, c in sess.join_codes.items():
            if c == code:
                return self.grant(session_id, player)
        raise ForbiddenError("bad join code")

    # -- event application -------------------------------------------------------

    async def submit(self, session_id: str, actor: str, msg_type: str, payload: dict,
                     idempotency_key: str | None = None) -> dict:
        sess = self.sessions.get(session_id)
        if sess is None:
            raise ForbiddenError("unknown session")
        async with sess.lock:
            if idempotency_key and idempotency_key in sess.idempotency:
                return sess.idempotency[idempotency_key]
            state = sess.state
            if msg_type == "QuerySent":
                event = game_core.query_sent(state, actor, payload.get("text", ""))
            elif msg_type == "ResponseSent":
                event = game_core.response_sent(state, actor, payload.get("text", ""),
                                                payload.get("charts", []))
            elif msg_type == "FollowupSent":
                event = game_core.followup_sent(state, actor,
                                                payload.get("target_sender", ""),
                                                payload.get("text", ""))
            elif msg_type == "ContractSigned":
                event = game_core.contract_signed(state, actor,
                                                  payload.get("winner", ""),
                                                  payload.get("rationale", ""))
            elif msg_type == "RoundAdvanced":
                if actor != ADMIN:
                    raise ForbiddenError("only the admin advances rounds")
                event = game_core.round_advanced(state, int(payload.get("group", 0)))
            else:
                raise IllegalEventError("UnknownEventType", msg_type)
            sess.state = apply_event(state, event)
            self._append(sess, event)
            ack = {"type": "ack", "seq": event.seq}
            if idempotency_key:
                ack["idempotency_key"] = idempotency_key
                sess.idempotency[idempotency_key] = ack
            await self._broadcast(sess, event)
            return ack

    async def _broadcast(self, sess: _Session, event: GameEvent) -> None:
        """Mailbox updates first, then the state update carrying the same seq."""
        state = sess.state
        mailbox_msg = None
        if event.group >= 0 and event.payload.get("type") != "RoundAdvanced":
            rs = state.rounds.get((event.group, event.round))
            if rs is not None and rs.messages and rs.messages[-1].seq == event.seq:
                mailbox_msg = rs.messages[-1]
        update = {"type": "state_update", "seq": event.seq, "payload": {
            "group": event.group,
            "round": event.round,
            "phase": (state.rounds[(event.group, event.round)].phase.value
                      if event.group >= 0 else None),
            "current_round": list(state.current_round),
            "finished": state.finished,
        }}
        for player, queue in sess.connections.values():
            if mailbox_msg is not None and (player == ADMIN
                                            or mailbox_msg.sender == player
                                            or player in mailbox_msg.to):
                await queue.put({"type": "mailbox_update", "seq": event.seq,
                                 "payload": mailbox_msg.to_dict()})
            await queue.put(update)

    # -- views ------------------------------------------------------------------

    def state_view(self, session_id: str, who: str) -> dict:
        sess = self.sessions[session_id]
        state = sess.state
        if who == ADMIN:
            return {
                "session": session_id,
                "roster": list(state.roster),
                "groups": [
                    {"members": list(g.members),
                     "current_round": state.current_round[gi],
                     "phase": sess.state.rounds[(gi, state.current_round[gi])].phase.value,
                     "contract": state.rounds[(gi, state.current_round[gi])].contract,
                     "finished": gi in state.finished_groups}
                    for gi, g in enumerate(state.groups)],
                "finished": state.finished,
                "last_seq": state.last_seq,
            }
        grant = self.grant(session_id, who)
        gi = grant["group"]
        rs = state.rounds[(gi, grant["round"])]
        return {
            "session": session_id,
            "player": who,
            "role": grant["role"],
            "group": gi,
            "round": grant["round"],
            "puzzle": grant["puzzle"],
            "phase": rs.phase.value,
            "finished": gi in state.finished_groups,
            "capabilities": grant["capabilities"],
            "legal_actions": sorted((a.to_dict() for a in legal_actions(state, who)),
                                    key=lambda d: (d["kind"], d.get("target", ""))),
            "mailbox": game_core.mailbox_view(state, who),
            "contract": rs.contract,
            "last_seq": state.last_seq,
        }

    def current_puzzle_id(self, session_id: str, player: str) -> str:
        state = self.sessions[session_id].state
        gi = state.group_of(player)
        rs = state.rounds[(gi, state.current_round[gi])]
        return state.config.puzzles[rs.puzzle_idx]

    def visible_chart(self, session_id: str, who: str, seq: int,
                      chart_index: int) -> tuple[dict, str]:
        """A chart from a message the caller can see, plus its puzzle id."""
        state = self.sessions[session_id].state
        for (gi, _ri), rs in state.rounds.items():
            for m in rs.messages:
                if m.seq != seq:
                    continue
                if who != ADMIN and m.sender != who and who not in m.to:
                    raise ForbiddenError("message is not in your mailbox")
                if not (0 <= chart_index < len(m.charts)):
                    raise ForbiddenError("no such chart on that message")
                return m.charts[chart_index], state.config.puzzles[rs.puzzle_idx]
        raise ForbiddenError("no such message")

    def export_log(self, session_id: str, seed: int) -> str:
        sess = self.sessions[session_id]
        events = self._read_events(sess.log_path)
        anonymized = game_core.anonymize(events, seed)
        return "\n".join(canonical_json(e.to_dict()) for e in anonymized) + "\n"

    def score_round(self, session_id: str, group: int, round_idx: int,
                    params: RubricParams) -> list[dict]:
        state = self.sessions[session_id].state
        rs = state.rounds.get((group, round_idx))
        if rs is None:
            raise RoundNotCompleteError(f"no round {round_idx} for group {group}")
        if rs.phase != Phase.COMPLETE:
            raise RoundNotCompleteError(f"round is {rs.phase.value}")
        puzzle_id = state.config.puzzles[rs.puzzle_idx]
        dataset, puzzle, _ = self.bundles[puzzle_id]
        cards = []
        for m in rs.messages:
            if m.kind != "response":
                continue
            for chart in m.charts:
                spec = chart_spec_from_dict(chart)
                card = score(spec, dataset, puzzle, params)
                entry = card.to_dict()
                entry["sender"] = m.sender
                entry["message_seq"] = m.seq
                cards.append(entry)
        return cards


# --- HTTP + WS app ---------------------------------------------------------------------


def create_app(config: ServerConfig) -> FastAPI:
    hub = SessionHub(config)
    hub.load_existing()
    app = FastAPI(title="showhide", version="0.1.0")
    app.state.hub = hub

    def _error(status: int, reason: str, detail: str = "") -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"error": reason, "detail": detail})

    @app.exception_handler(ForbiddenError)
    async def _forbidden(_req, exc):
        return _error(403, "Forbidden", str(exc))

    @app.exception_handler(ShowHideError)
    async def _domain_error(_req, exc):
        return _error(400, type(exc).__name__, str(exc))

    def _token_of(request: Request) -> str:
        return request.headers.get("x-token") or request.query_params.get("token", "")

    @app.post("/sessions")
    async def create_session(request: Request):
        if _token_of(request) != config.admin_token:
            raise ForbiddenError("admin token required")
        body = await request.json()
        try:
            session_id = body["session"]
            cfg = SessionConfig.from_dict(body["config"])
            roster = list(body["roster"])
        except (KeyError, TypeError) as exc:
            raise ParseError("body", f"bad session payload: {exc}") from None
        try:
            return hub.create_session(session_id, cfg, roster)
        except RosterSizeError as exc:
            raise ParseError("roster", str(exc)) from None

    @app.post("/sessions/{session_id}/join")
    async def join(session_id: str, request: Request):
        body = await request.json()
        return hub.join(session_id, str(body.get("code", "")))

    @app.get("/sessions/{session_id}/state")
    async def get_state(session_id: str, request: Request):
        who = hub.resolve(session_id, _token_of(request))
        return hub.state_view(session_id, who)

    @app.get("/puzzles/{puzzle_id}/dataset.csv")
    async def get_dataset(puzzle_id: str, request: Request, session: str):
        who = hub.resolve(session, _token_of(request))
        if who == ADMIN:
            pass  # the instructor can always inspect puzzle data
        else:
            grant = hub.grant(session, who)
            if not grant["capabilities"]["can_download_dataset"]:
                raise ForbiddenError("receivers cannot download the dataset")
            if hub.current_puzzle_id(session, who) != puzzle_id:
                raise ForbiddenError("puzzle is not part of your current round")
        if puzzle_id not in hub.bundles:
            return _error(404, "UnknownPuzzle", puzzle_id)
        dataset, _, _ = hub.bundles[puzzle_id]
        return PlainTextResponse(dataset.to_csv(), media_type="text/csv")

    @app.post("/preview")
    async def preview(request: Request):
        body = await request.json()
        session_id = str(body.get("session", ""))
        who = hub.resolve(session_id, _token_of(request))
        if who != ADMIN:
            grant = hub.grant(session_id, who)
            if not grant["capabilities"]["can_preview"]:
                raise ForbiddenError("preview is sender-only")
        puzzle_id = str(body.get("puzzle", ""))
        if puzzle_id not in hub.bundles:
            return _error(404, "UnknownPuzzle", puzzle_id)
        if who != ADMIN and hub.current_puzzle_id(session_id, who) != puzzle_id:
            raise ForbiddenError("puzzle is not part of your current round")
        dataset, _, _ = hub.bundles[puzzle_id]
        spec = chart_spec_from_dict(body.get("spec", {}))
        report = validate_spec(spec, dataset.schema)
        if not report.ok:
            return JSONResponse(status_code=422, content=report.to_dict())

        def run():
            view = evaluate(spec, dataset)
            return view.to_dict(provenance="sizes")

        return await asyncio.to_thread(run)

    @app.post("/sessions/{session_id}/render")
    async def render_message_chart(session_id: str, request: Request):
        """Evaluate a chart attached to a message the caller can already see.

        Unlike /preview this needs no sender capability: received charts are
        part of the conversation, and the view ships provenance sizes only.
        """
        who = hub.resolve(session_id, _token_of(request))
        body = await request.json()
        chart, puzzle_id = hub.visible_chart(session_id, who,
                                             int(body.get("seq", -1)),
                                             int(body.get("chart", 0)))
        dataset, _, _ = hub.bundles[puzzle_id]
        spec = chart_spec_from_dict(chart)

        def run():
            return evaluate(spec, dataset).to_dict(provenance="sizes")

        return await asyncio.to_thread(run)

    @app.post("/sessions/{session_id}/score")
    async def score_endpoint(session_id: str, request: Request):
        who = hub.resolve(session_id, _token_of(request))
        if who != ADMIN:
            raise ForbiddenError("scoring is admin-only")
        body = await request.json()
        group = int(body.get("group", 0))
        round_idx = int(body.get("round", 0))
        params = (RubricParams.from_dict(body["params"]) if body.get("params")
                  else RubricParams())
        return await asyncio.to_thread(hub.score_round, session_id, group, round_idx,
                                       params)

    @app.get("/sessions/{session_id}/export")
    async def export(session_id: str, request: Request, seed: int = 0):
        who = hub.resolve(session_id, _token_of(request))
        if who != ADMIN:
            raise ForbiddenError("export is admin-only")
        return PlainTextResponse(hub.export_log(session_id, seed),
                                 media_type="application/x-ndjson")

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        token = websocket.query_params.get("token", "")
        session_id = websocket.query_params.get("session", "")
        try:
            who = hub.resolve(session_id, token)
        except ForbiddenError:
            await websocket.close(code=4403)
            return
        await websocket.accept()
        sess = hub.sessions[session_id]
        queue: asyncio.Queue = asyncio.Queue()
        conn_id = sess.next_conn
        sess.next_conn += 1
        sess.connections[conn_id] = (who, queue)

        async def pump():
            while True:
                await websocket.send_text(canonical_json(await queue.get()))

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                raw = await websocket.receive_text()
                if len(raw.encode("utf-8")) > MAX_ENVELOPE_BYTES:
                    await queue.put({"type": "error", "reason": "EnvelopeTooLarge",
                                     "detail": f"limit {MAX_ENVELOPE_BYTES} bytes"})
                    continue
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    await queue.put({"type": "error", "reason": "BadJson",
                                     "detail": exc.msg})
                    continue
                if msg.get("session") not in (None, session_id):
                    await queue.put({"type": "error", "reason": "WrongSession"})
                    continue
                try:
                    ack = await hub.submit(session_id, who, str(msg.get("type")),
                                           msg.get("payload", {}) or {},
                                           msg.get("idempotency_key"))
                    await queue.put(ack)
                except (IllegalEventError, ForbiddenError, ShowHideError) as exc:
                    await queue.put({"type": "error",
                                     "reason": getattr(exc, "reason", type(exc).__name__),
                                     "detail": str(exc)})
        except WebSocketDisconnect:
            pass
        finally:
            pump_task.cancel()
            sess.connections.pop(conn_id, None)

    return app


def run_server(config: ServerConfig) -> None:
    """Serve until interrupted; replays every event log in the data dir first."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
