"""Random legal event-sequence generator driven by legal_actions.

Used by the state-machine property tests: every emitted event is chosen from
the currently legal action set, so any rejection during replay is a bug.
"""

from __future__ import annotations

import random

from showhide.game_core import (
    ADMIN,
    GameEvent,
    Phase,
    SessionConfig,
    SessionState,
    apply_event,
    contract_signed,
    followup_sent,
    legal_actions,
    query_sent,
    response_sent,
    round_advanced,
    session_created,
)

WORDS = ("peaks", "gaps", "please", "show", "zones", "counts", "more", "detail")


def _some_text(rng: random.Random) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 4)))


def _some_charts(rng: random.Random, cap: int) -> list[dict]:
    n = rng.randint(0, min(2, cap))
    return [{"mark": "point", "encoding": {"x": {"field": "pollutant_ppb"}}}
            for _ in range(n)]


def random_legal_session(seed: int, n_groups: int = 1) -> list[GameEvent]:
    """Build one full session log; all events legal by construction."""
    rng = random.Random(seed)
    roster = [f"player{i:02d}" for i in range(3 * n_groups)]
    config = SessionConfig(puzzles=("pz-a", "pz-b", "pz-c"),
                           rotation_seed=rng.randrange(10_000))
    first = session_created(f"sess-{seed}", config, roster,
                            ts="2026-03-02T10:00:00+00:00")
    state = apply_event(None, first)
    events = [first]
    ts_minute = 0

    while not state.finished and len(events) < 400:
        choices: list[tuple[str, object]] = []
        for player in state.roster:
            for action in legal_actions(state, player):
                choices.append((player, action))
        admin_actions = legal_actions(state, ADMIN)
        for action in admin_actions:
            gi = int(action.target)
            rs = state.rounds[(gi, state.current_round[gi])]
            # prefer advancing completed rounds; rarely abandon a live one
            weight = 6 if rs.phase == Phase.COMPLETE else (1 if rng.random() < 0.02 else 0)
            choices.extend([(ADMIN, action)] * weight)
        if not choices:
            raise AssertionError("no legal action available before session end")
        actor, action = rng.choice(choices)
        ts_minute += 1
        ts = f"2026-03-02T{10 + ts_minute // 60:02d}:{ts_minute % 60:02d}:30+00:00"

        if action.kind == "QuerySent":
            event = query_sent(state, actor, _some_text(rng), ts)
        elif action.kind == "ResponseSent":
            event = response_sent(state, actor, _some_text(rng),
                                  _some_charts(rng, state.config.charts_per_message), ts)
        elif action.kind == "FollowupSent":
            event = followup_sent(state, actor, action.target, _some_text(rng), ts)
        elif action.kind == "ContractSigned":
            gi = state.group_of(actor)
            rs = state.rounds[(gi, state.current_round[gi])]
            eligible = [s for s in state.groups[gi].senders(state.current_round[gi])
                        if rs.response_counts.get(s, 0) >= 1]
            if not eligible:
                continue
            event = contract_signed(state, actor, rng.choice(eligible),
                                    _some_text(rng), ts)
        elif action.kind == "RoundAdvanced":
            event = round_advanced(state, int(action.target), ts)
        else:
            raise AssertionError(f"unknown action kind {action.kind}")
        state = apply_event(state, event)
        events.append(event)
    return events
