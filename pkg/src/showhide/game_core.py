"""Event-sourced state machine for sessions, groups, rounds, and role rotation.

All state is derived by folding apply_event over an append-only event log;
replaying a log reproduces the live state exactly. Illegal events are
rejected with a reason, never silently dropped.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone
from typing import Any, Iterable, Sequence

from .errors import CorruptLogError, IllegalEventError, RosterSizeError, UnknownPlayerError
from .utils import canonical_hash

ADMIN = "admin"


class Phase(str, enum.Enum):
    AWAIT_QUERY = "AwaitQuery"
    AWAIT_FIRST_RESPONSES = "AwaitFirstResponses"
    AWAIT_FOLLOWUPS = "AwaitFollowups"
    AWAIT_SECOND_RESPONSES = "AwaitSecondResponses"
    AWAIT_CONTRACT = "AwaitContract"
    COMPLETE = "Complete"


#: phases in which the receiver may sign (follow-ups are optional)
_CONTRACT_PHASES = (Phase.AWAIT_FOLLOWUPS, Phase.AWAIT_SECOND_RESPONSES,
                    Phase.AWAIT_CONTRACT)


@dataclass(frozen=True)
class SessionConfig:
    puzzles: tuple[str, ...]
    responses_per_sender: int = 2
    charts_per_message: int = 3
    round_minutes: int = 20
    rotation_seed: int = 0

    def __post_init__(self):
        if self.responses_per_sender < 1:
            raise ValueError("responses_per_sender must be >= 1")
        if not self.puzzles:
            raise ValueError("at least one puzzle is required")

    def to_dict(self) -> dict:
        return {"puzzles": list(self.puzzles),
                "responses_per_sender": self.responses_per_sender,
                "charts_per_message": self.charts_per_message,
                "round_minutes": self.round_minutes,
                "rotation_seed": self.rotation_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        return cls(puzzles=tuple(d["puzzles"]),
                   responses_per_sender=d.get("responses_per_sender", 2),
                   charts_per_message=d.get("charts_per_message", 3),
                   round_minutes=d.get("round_minutes", 20),
                   rotation_seed=d.get("rotation_seed", 0))


@dataclass(frozen=True)
class Group:
    members: tuple[str, str, str]
    role_schedule: tuple[dict[str, str], ...]   # per round: receiver / sender_a / sender_b
    puzzle_order: tuple[int, ...]

    def receiver(self, round_idx: int) -> str:
        return self.role_schedule[round_idx]["receiver"]

    def senders(self, round_idx: int) -> tuple[str, str]:
        sched = self.role_schedule[round_idx]
        return (sched["sender_a"], sched["sender_b"])

    def to_dict(self) -> dict:
        return {"members": list(self.members),
                "role_schedule": [dict(r) for r in self.role_schedule],
                "puzzle_order": list(self.puzzle_order)}


@dataclass
class Message:
    seq: int
    sender: str
    to: tuple[str, ...]
    kind: str                      # query | response | followup | contract
    text: str
    charts: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {"seq": self.seq, "from": self.sender, "to": list(self.to),
                "kind": self.kind, "text": self.text, "charts": list(self.charts)}


@dataclass
class RoundState:
    puzzle_idx: int
    phase: Phase = Phase.AWAIT_QUERY
    response_counts: dict[str, int] = dc_field(default_factory=dict)
    followups_sent: set[str] = dc_field(default_factory=set)
    responded_after_followup: set[str] = dc_field(default_factory=set)
    messages: list[Message] = dc_field(default_factory=list)
    contract: dict[str, str] | None = None
    abandoned: bool = False

    def to_dict(self) -> dict:
        return {"puzzle_idx": self.puzzle_idx, "phase": self.phase.value,
                "response_counts": dict(sorted(self.response_counts.items())),
                "followups_sent": sorted(self.followups_sent),
                "responded_after_followup": sorted(self.responded_after_followup),
                "messages": [m.to_dict() for m in self.messages],
                "contract": self.contract, "abandoned": self.abandoned}


@dataclass
class SessionState:
    session_id: str
    config: SessionConfig
    roster: tuple[str, ...]
    groups: tuple[Group, ...]
    current_round: list[int]               # per group
    rounds: dict[tuple[int, int], RoundState]
    last_seq: int = 0
    finished_groups: set[int] = dc_field(default_factory=set)

    @property
    def finished(self) -> bool:
        return len(self.finished_groups) == len(self.groups)

    def group_of(self, player: str) -> int:
        for gi, g in enumerate(self.groups):
            if player in g.members:
                return gi
        raise UnknownPlayerError(player)

    def round_state(self, group_idx: int) -> RoundState:
        return self.rounds[(group_idx, self.current_round[group_idx])]

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "config": self.config.to_dict(),
            "roster": list(self.roster),
            "groups": [g.to_dict() for g in self.groups],
            "current_round": list(self.current_round),
            "rounds": {f"{g}:{r}": rs.to_dict() for (g, r), rs in sorted(self.rounds.items())},
            "last_seq": self.last_seq,
            "finished_groups": sorted(self.finished_groups),
        }

    def state_hash(self) -> str:
        return canonical_hash(self.to_dict())


@dataclass(frozen=True)
class GameEvent:
    seq: int
    ts: str
    session: str
    group: int                      # -1 for session-level events
    round: int
    actor: str
    payload: dict[str, Any]

    def to_dict(self) -> dict:
        return {"seq": self.seq, "ts": self.ts, "session": self.session,
                "group": self.group, "round": self.round, "actor": self.actor,
                "event": self.payload}

    @classmethod
    def from_dict(cls, d: dict) -> "GameEvent":
        return cls(seq=d["seq"], ts=d["ts"], session=d["session"], group=d["group"],
                   round=d["round"], actor=d["actor"], payload=d["event"])


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# --- event constructors ------------------------------------------------------------


def session_created(session: str, config: SessionConfig, roster: Sequence[str],
                    ts: str | None = None) -> GameEvent:
    return GameEvent(seq=1, ts=ts or now_iso(), session=session, group=-1, round=-1,
                     actor=ADMIN,
                     payload={"type": "SessionCreated", "config": config.to_dict(),
                              "roster": list(roster)})


def _player_event(state: SessionState, actor: str, payload: dict,
                  ts: str | None = None) -> GameEvent:
    gi = state.group_of(actor) if actor != ADMIN else -1
    ri = state.current_round[gi] if gi >= 0 else -1
    return GameEvent(seq=state.last_seq + 1, ts=ts or now_iso(), session=state.session_id,
                     group=gi, round=ri, actor=actor, payload=payload)


def query_sent(state: SessionState, actor: str, text: str,
               ts: str | None = None) -> GameEvent:
    return _player_event(state, actor, {"type": "QuerySent", "text": text}, ts)


def response_sent(state: SessionState, actor: str, text: str,
                  charts: Sequence[dict] = (), ts: str | None = None) -> GameEvent:
    return _player_event(state, actor, {"type": "ResponseSent", "sender": actor,
                                        "text": text, "charts": list(charts)}, ts)


def followup_sent(state: SessionState, actor: str, target_sender: str, text: str,
                  ts: str | None = None) -> GameEvent:
    return _player_event(state, actor, {"type": "FollowupSent",
                                        "target_sender": target_sender, "text": text}, ts)


def contract_signed(state: SessionState, actor: str, winner: str, rationale: str,
                    ts: str | None = None) -> GameEvent:
    return _player_event(state, actor, {"type": "ContractSigned", "winner": winner,
                                        "rationale": rationale}, ts)


def round_advanced(state: SessionState, group_idx: int,
                   ts: str | None = None) -> GameEvent:
    return GameEvent(seq=state.last_seq + 1, ts=ts or now_iso(),
                     session=state.session_id, group=group_idx,
                     round=state.current_round[group_idx], actor=ADMIN,
                     payload={"type": "RoundAdvanced"})


# --- session construction ------------------------------------------------------------


def _build_groups(config: SessionConfig, roster: Sequence[str]) -> tuple[Group, ...]:
    rng = random.Random(config.rotation_seed)
    order = list(roster)
    rng.shuffle(order)
    n_rounds = len(config.puzzles)
    groups = []
    for base in range(0, len(order), 3):
        members = tuple(order[base:base + 3])
        offset = rng.randrange(3)
        schedule = []
        for r in range(n_rounds):
            receiver = members[(r + offset) % 3]
            senders = [m for m in members if m != receiver]
            schedule.append({"receiver": receiver, "sender_a": senders[0],
                             "sender_b": senders[1]})
        puzzle_order = list(range(n_rounds))
        rng.shuffle(puzzle_order)
        groups.append(Group(members=members, role_schedule=tuple(schedule),
                            puzzle_order=tuple(puzzle_order)))
    return tuple(groups)


def new_session(config: SessionConfig, roster: Sequence[str],
                session_id: str = "session", ts: str | None = None) -> SessionState:
    """Build a fresh session; groups and schedules derive from rotation_seed."""
    return apply_event(None, session_created(session_id, config, roster, ts))


# --- legal actions --------------------------------------------------------------------


@dataclass(frozen=True)
class LegalAction:
    kind: str
    target: str | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        if self.target is not None:
            d["target"] = self.target
        return d


def legal_actions(state: SessionState, player: str) -> frozenset[LegalAction]:
    if player == ADMIN:
        actions = set()
        for gi in range(len(state.groups)):
            if gi not in state.finished_groups:
                actions.add(LegalAction("RoundAdvanced", target=str(gi)))
        return frozenset(actions)
    gi = state.group_of(player)
    if gi in state.finished_groups:
        return frozenset()
    group = state.groups[gi]
    ri = state.current_round[gi]
    rs = state.rounds[(gi, ri)]
    receiver = group.receiver(ri)
    senders = group.senders(ri)
    actions: set[LegalAction] = set()

    if rs.phase == Phase.AWAIT_QUERY:
        if player == receiver:
            actions.add(LegalAction("QuerySent"))
    elif rs.phase == Phase.AWAIT_FIRST_RESPONSES:
        if player in senders and rs.response_counts.get(player, 0) == 0:
            actions.add(LegalAction("ResponseSent"))
    elif rs.phase == Phase.AWAIT_FOLLOWUPS:
        if player == receiver:
            for s in senders:
                if s not in rs.followups_sent:
                    actions.add(LegalAction("FollowupSent", target=s))
            actions.add(LegalAction("ContractSigned"))
    elif rs.phase == Phase.AWAIT_SECOND_RESPONSES:
        if (player in senders and player in rs.followups_sent
                and player not in rs.responded_after_followup
                and rs.response_counts.get(player, 0) < state.config.responses_per_sender):
            actions.add(LegalAction("ResponseSent"))
        if player == receiver:
            actions.add(LegalAction("ContractSigned"))
    elif rs.phase == Phase.AWAIT_CONTRACT:
        if player == receiver:
            actions.add(LegalAction("ContractSigned"))
    return frozenset(actions)


# --- event application ----------------------------------------------------------------


def _illegal(reason: str, detail: str = "") -> IllegalEventError:
    return IllegalEventError(reason, detail)


def apply_event(state: SessionState | None, event: GameEvent) -> SessionState:
    """Validate and fold one event into the session state (mutates in place)."""
    kind = event.payload.get("type")
    if state is None:
        if kind != "SessionCreated":
            raise _illegal("NoSession", f"first event must be SessionCreated, got {kind}")
        config = SessionConfig.from_dict(event.payload["config"])
        roster = tuple(event.payload["roster"])
        if len(roster) == 0 or len(roster) % 3 != 0:
            raise RosterSizeError(len(roster))
        if len(set(roster)) != len(roster):
            raise _illegal("DuplicatePlayers")
        groups = _build_groups(config, roster)
        rounds = {(gi, 0): RoundState(puzzle_idx=g.puzzle_order[0])
                  for gi, g in enumerate(groups)}
        return SessionState(session_id=event.session, config=config, roster=roster,
                            groups=groups, current_round=[0] * len(groups),
                            rounds=rounds, last_seq=event.seq)

    if kind == "SessionCreated":
        raise _illegal("DuplicateSessionCreated")
    if event.seq != state.last_seq + 1:
        raise _illegal("BadSeq", f"expected {state.last_seq + 1}, got {event.seq}")

    if kind == "RoundAdvanced":
        _apply_round_advanced(state, event)
        state.last_seq = event.seq
        return state

    actor = event.actor
    gi = state.group_of(actor)
    if gi in state.finished_groups:
        raise _illegal("GroupFinished")
    if event.group != gi:
        raise _illegal("WrongGroup", f"actor {actor} is in group {gi}")
    ri = state.current_round[gi]
    if event.round != ri:
        raise _illegal("WrongRound", f"group {gi} is on round {ri}")
    group = state.groups[gi]
    rs = state.rounds[(gi, ri)]
    receiver = group.receiver(ri)
    senders = group.senders(ri)

    if kind == "QuerySent":
        if actor != receiver:
            raise _illegal("WrongActor", "only the receiver queries")
        if rs.phase != Phase.AWAIT_QUERY:
            raise _illegal("WrongPhase", rs.phase.value)
        text = event.payload.get("text", "")
        # delivered identically to both senders
        rs.messages.append(Message(seq=event.seq, sender=receiver, to=senders,
                                   kind="query", text=text))
        rs.phase = Phase.AWAIT_FIRST_RESPONSES
    elif kind == "ResponseSent":
        if actor not in senders:
            raise _illegal("WrongActor", "only senders respond")
        charts = event.payload.get("charts", [])
        if len(charts) > state.config.charts_per_message:
            raise _illegal("TooManyCharts",
                           f"{len(charts)} > cap {state.config.charts_per_message}")
        count = rs.response_counts.get(actor, 0)
        if count >= state.config.responses_per_sender:
            raise _illegal("LimitExceeded",
                           f"sender {actor} already sent {count} responses")
        if rs.phase == Phase.AWAIT_FIRST_RESPONSES:
            if count != 0:
                raise _illegal("LimitExceeded", "already responded this phase")
        elif rs.phase == Phase.AWAIT_SECOND_RESPONSES:
            if actor not in rs.followups_sent:
                raise _illegal("WrongPhase", "no follow-up was addressed to this sender")
            if actor in rs.responded_after_followup:
                raise _illegal("LimitExceeded", "already responded to the follow-up")
        else:
            raise _illegal("WrongPhase", rs.phase.value)
        rs.messages.append(Message(seq=event.seq, sender=actor, to=(receiver,),
                                   kind="response", text=event.payload.get("text", ""),
                                   charts=tuple(charts)))
        rs.response_counts[actor] = count + 1
        if rs.phase == Phase.AWAIT_FIRST_RESPONSES:
            if all(rs.response_counts.get(s, 0) >= 1 for s in senders):
                rs.phase = Phase.AWAIT_FOLLOWUPS
        else:
            rs.responded_after_followup.add(actor)
            done = all(s in rs.responded_after_followup
                       or rs.response_counts.get(s, 0) >= state.config.responses_per_sender
                       for s in rs.followups_sent)
            if done:
                rs.phase = Phase.AWAIT_CONTRACT
    elif kind == "FollowupSent":
        if actor != receiver:
            raise _illegal("WrongActor", "only the receiver follows up")
        if rs.phase != Phase.AWAIT_FOLLOWUPS:
            raise _illegal("WrongPhase", rs.phase.value)
        target = event.payload.get("target_sender")
        if target not in senders:
            raise _illegal("UnknownTarget", str(target))
        if target in rs.followups_sent:
            raise _illegal("LimitExceeded", "one follow-up per sender")
        rs.messages.append(Message(seq=event.seq, sender=receiver, to=(target,),
                                   kind="followup", text=event.payload.get("text", "")))
        rs.followups_sent.add(target)
        if all(s in rs.followups_sent for s in senders):
            rs.phase = Phase.AWAIT_SECOND_RESPONSES
    elif kind == "ContractSigned":
        if actor != receiver:
            raise _illegal("WrongActor", "only the receiver signs")
        if rs.phase not in _CONTRACT_PHASES:
            raise _illegal("WrongPhase", rs.phase.value)
        winner = event.payload.get("winner")
        rationale = event.payload.get("rationale", "")
        if winner not in senders:
            raise _illegal("UnknownTarget", str(winner))
        if not rationale.strip():
            raise _illegal("EmptyRationale")
        if rs.response_counts.get(winner, 0) < 1:
            raise _illegal("WinnerNeverResponded", str(winner))
        rs.messages.append(Message(seq=event.seq, sender=receiver,
                                   to=tuple(group.members), kind="contract",
                                   text=rationale))
        rs.contract = {"winner": winner, "rationale": rationale}
        rs.phase = Phase.COMPLETE
    else:
        raise _illegal("UnknownEventType", str(kind))

    state.last_seq = event.seq
    return state


def _apply_round_advanced(state: SessionState, event: GameEvent) -> None:
    if event.actor != ADMIN:
        raise _illegal("WrongActor", "only the admin advances rounds")
    gi = event.group
    if not (0 <= gi < len(state.groups)):
        raise _illegal("WrongGroup", str(gi))
    if gi in state.finished_groups:
        raise _illegal("GroupFinished")
    ri = state.current_round[gi]
    rs = state.rounds[(gi, ri)]
    if rs.phase != Phase.COMPLETE:
        rs.abandoned = True   # timer expiry: the admin moves on, never auto-forfeits
    if ri + 1 < len(state.config.puzzles):
        state.current_round[gi] = ri + 1
        group = state.groups[gi]
        state.rounds[(gi, ri + 1)] = RoundState(puzzle_idx=group.puzzle_order[ri + 1])
    else:
        state.finished_groups.add(gi)


# --- replay / anonymize ----------------------------------------------------------------


def replay(events: Iterable[GameEvent]) -> SessionState:
    """Fold a seq-ordered log; any illegal or out-of-order event aborts."""
    state: SessionState | None = None
    expected = 1
    for event in events:
        if event.seq != expected:
            raise CorruptLogError(event.seq, f"expected seq {expected}")
        try:
            state = apply_event(state, event)
        except (IllegalEventError, RosterSizeError, UnknownPlayerError) as exc:
            raise CorruptLogError(event.seq, str(exc)) from exc
        expected += 1
    if state is None:
        raise CorruptLogError(0, "empty log")
    return state


def _coarsen_ts(ts: str) -> str:
    try:
        dt = datetime.fromisoformat(ts)
    except ValueError:
        return ts
    return dt.replace(second=0, microsecond=0).isoformat(timespec="seconds")


def anonymize(events: Sequence[GameEvent], seed: int) -> list[GameEvent]:
    """Replace player ids with stable pseudonyms; coarsen timestamps to minutes.

    Free-text fields are preserved verbatim; the admin actor is structural
    and keeps its name.
    """
    roster: list[str] = []
    for e in events:
        if e.payload.get("type") == "SessionCreated":
            roster = list(e.payload["roster"])
            break
    order = sorted(roster)
    rng = random.Random(seed)
    rng.shuffle(order)
    mapping = {p: f"P{i + 1:02d}" for i, p in enumerate(order)}

    def swap(p: str) -> str:
        return mapping.get(p, p)

    out = []
    for e in events:
        payload = dict(e.payload)
        if payload.get("type") == "SessionCreated":
            payload["roster"] = [swap(p) for p in payload["roster"]]
        for key in ("sender", "target_sender", "winner"):
            if key in payload:
                payload[key] = swap(payload[key])
        out.append(GameEvent(seq=e.seq, ts=_coarsen_ts(e.ts), session=e.session,
                             group=e.group, round=e.round, actor=swap(e.actor),
                             payload=payload))
    return out


def mailbox_view(state: SessionState, player: str) -> list[dict]:
    """Messages visible to one player; senders never see each other's threads."""
    gi = state.group_of(player)
    visible = []
    for (g, _r), rs in sorted(state.rounds.items()):
        if g != gi:
            continue
        for m in rs.messages:
            if m.sender == player or player in m.to:
                visible.append(m.to_dict())
    return visible
