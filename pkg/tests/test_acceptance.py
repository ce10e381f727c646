"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; the suite is deterministic (fixed seeds throughout).
"""

from __future__ import annotations

import json
import socket
import threading
import time

import numpy as np
import pytest

import oracles
from legal_sequences import random_legal_session
from oracle_battery import build_cases
from showhide.chart_spec import chart_spec_from_dict
from showhide.data_model import SignalBinding, SignalKind
from showhide.errors import IllegalEventError
from showhide.game_core import (
    Phase,
    SessionConfig,
    apply_event,
    contract_signed,
    new_session,
    query_sent,
    replay,
    response_sent,
)
from showhide.puzzle_gen import default_params, gen_dataset, verify_puzzle, walkthrough_specs
from showhide.signal_rubric import (
    Adherence,
    RubricParams,
    Verdict,
    detect,
    ground_truth,
    score,
)
from showhide.transform_engine import evaluate, kde, quantile

RP = RubricParams()


def _report(criterion: str, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE [{'PASS' if ok else 'FAIL'}] {criterion}"
    if detail:
        line += f" — {detail}"
    print(line)
    assert ok, line


# --- 1. walkthrough golden triple -----------------------------------------------------

def test_walkthrough_golden_triple():
    t0 = time.perf_counter()
    ds, puzzle = gen_dataset(default_params("peaks_gaps", seed=7))
    got = []
    for _name, spec in walkthrough_specs():
        card = score(spec, ds, puzzle, RP)
        got.append(card.constraint_adherence)
    elapsed = time.perf_counter() - t0
    expected = [Adherence.BROKEN, Adherence.RISKED, Adherence.SATISFIED]
    _report("A.2 golden triple",
            got == expected and elapsed < 1.0,
            f"gap constraint = {[a.value for a in got]}, {elapsed * 1000:.0f} ms")


# --- 2. documented grading case battery --------------------------------------------------

def test_documented_case_battery():
    sat_ds, sat_puzzle = gen_dataset(default_params("saturation_locations", seed=7))
    out_ds, out_puzzle = gen_dataset(default_params("outliers_points", seed=7))
    results = []

    card = score(chart_spec_from_dict(
        {"mark": "point", "encoding": {"x": {"field": "longitude"},
                                       "y": {"field": "latitude"}}}),
        sat_ds, sat_puzzle, RP)
    results.append(("raw lat/lon points", card.constraint_adherence,
                    Adherence.BROKEN))

    fine_spec = chart_spec_from_dict(
        {"mark": "rect", "encoding": {
            "x": {"field": "longitude", "bin": {"count": 30}},
            "y": {"field": "latitude", "bin": {"count": 30}},
            "color": {"aggregate": "count"}}})
    view = evaluate(fine_spec, sat_ds)
    assert oracles.min_provenance(view.instances) == 1, "battery needs a singleton cell"
    card = score(fine_spec, sat_ds, sat_puzzle, RP)
    results.append(("fine 2-D bins, singleton cell", card.constraint_adherence,
                    Adherence.RISKED))

    region_spec = chart_spec_from_dict(
        {"mark": "bar", "encoding": {"x": {"field": "regions"},
                                     "y": {"aggregate": "count"}}})
    view = evaluate(region_spec, sat_ds)
    assert oracles.min_provenance(view.instances) >= 5
    card = score(region_spec, sat_ds, sat_puzzle, RP)
    results.append(("region-level counts", card.constraint_adherence,
                    Adherence.SATISFIED))

    card = score(chart_spec_from_dict(
        {"mark": "point", "encoding": {"x": {"field": "avg_daily_parcels"},
                                       "y": {"field": "pct_late_deliveries"}}}),
        out_ds, out_puzzle, RP)
    results.append(("id-less performance scatter", card.constraint_adherence,
                    Adherence.RISKED))

    card = score(chart_spec_from_dict(
        {"mark": "boxplot", "encoding": {"x": {"field": "avg_daily_parcels"}}}),
        out_ds, out_puzzle, RP)
    results.append(("boxplot with outlier dots", card.need_adherence,
                    Adherence.SATISFIED))

    bad = [(n, got.value, want.value) for n, got, want in results if got != want]
    _report("documented case battery", not bad,
            "5/5 exact" if not bad else f"mismatches: {bad}")


# --- 3. oracle agreement -------------------------------------------------------------

def _perturbed(params: RubricParams, name: str, factor: float) -> RubricParams:
    d = params.to_dict()
    value = d[name] * factor
    if name == "k_safe":
        value = max(2, int(round(value)))
    d[name] = value
    return RubricParams.from_dict(d)


def test_oracle_agreement():
    t0 = time.perf_counter()
    cases = build_cases(500, RP)
    mismatches = []
    ambiguous = []
    for case in cases:
        view = evaluate(chart_spec_from_dict(case.spec_dict), case.dataset)
        ev = detect(view, case.binding, case.dataset, RP)
        if ev.verdict.value != case.oracle_verdict:
            mismatches.append((case.name, ev.verdict.value, case.oracle_verdict))
        elif ev.verdict == Verdict.AMBIGUOUS:
            ambiguous.append((case, view, ev))
    flips = 0
    for case, view, ev in ambiguous:
        param = ev.deciding.param
        if any(detect(view, case.binding, case.dataset,
                      _perturbed(RP, param, f)).verdict != Verdict.AMBIGUOUS
               for f in (0.9, 1.1)):
            flips += 1
    elapsed = time.perf_counter() - t0
    flip_rate = flips / len(ambiguous) if ambiguous else 1.0
    _report("oracle agreement",
            not mismatches and flip_rate >= 0.95 and elapsed < 30.0,
            f"0 disagreements over {len(cases)} cases, "
            f"{flips}/{len(ambiguous)} ambiguous flip ({flip_rate:.1%}), "
            f"{elapsed:.1f} s" if not mismatches else f"mismatches: {mismatches[:5]}")


# --- 4. transform property suite -------------------------------------------------------

def test_transform_property_suite():
    failures = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 80))
        values = rng.uniform(0, 100, n).round(4)
        zones = [f"z{int(z)}" for z in rng.integers(0, 4, n)]
        from conftest import make_dataset
        ds = make_dataset({"v": values.tolist(), "z": zones},
                          {"v": "quantitative", "z": "nominal"})

        # count conservation
        bins = int(rng.integers(1, 15))
        hist = evaluate(chart_spec_from_dict(
            {"mark": "bar", "encoding": {"x": {"field": "v", "bin": {"count": bins}},
                                         "y": {"aggregate": "count"}}}), ds)
        if sum(i.value("y") for i in hist.instances) != n:
            failures.append((seed, "count conservation"))

        # bin partition: every value in exactly one rendered bin's span
        intervals = sorted({i.value("x") for i in hist.instances},
                           key=lambda iv: iv.index)
        lo = min(iv.lo for iv in intervals)
        hi = max(iv.hi for iv in intervals)
        if not (lo <= values.min() and hi >= values.max()):
            failures.append((seed, "bin coverage"))
        for a, b in zip(intervals, intervals[1:]):
            if b.lo < a.hi - 1e-9:
                failures.append((seed, "bin overlap"))

        # subsample subset
        k = int(rng.integers(1, n + 1))
        sub = evaluate(chart_spec_from_dict(
            {"mark": "point",
             "transforms": [{"op": "subsample", "n": k, "seed": int(rng.integers(1e6))}],
             "encoding": {"x": {"field": "v"}}}), ds)
        rows = set()
        for inst in sub.instances:
            rows |= inst.source_rows
        if not (rows <= set(range(n)) and len(sub.instances) <= k):
            failures.append((seed, "subsample subset"))

        # quantile monotonicity
        qs = sorted(rng.uniform(0, 1, 4))
        quants = [quantile(values.tolist(), q) for q in qs]
        if quants != sorted(quants):
            failures.append((seed, "quantile monotone"))

        # kde integral
        if len(set(values.tolist())) >= 2:
            curve = kde(values.tolist(), grid_n=64)
            if abs(np.trapezoid(curve.density, curve.grid) - 1.0) > 1e-3:
                failures.append((seed, "kde integral"))

        # determinism
        spec = {"mark": "bar",
                "transforms": [{"op": "subsample", "fraction": 0.7,
                                "seed": int(rng.integers(1e6))}],
                "encoding": {"x": {"field": "z"}, "y": {"aggregate": "count"}}}
        h1 = evaluate(chart_spec_from_dict(spec), ds).content_hash()
        h2 = evaluate(chart_spec_from_dict(spec), ds).content_hash()
        if h1 != h2:
            failures.append((seed, "determinism"))

    _report("transform property suite", not failures,
            "200 randomized inputs x 6 properties"
            if not failures else f"failures: {failures[:5]}")


# --- 5. plant-recover --------------------------------------------------------------------

def test_plant_recover():
    misses = []
    both_present = 0
    total = 0
    for template in ("peaks_gaps", "outliers_points", "saturation_locations"):
        for seed in range(1, 51):
            total += 1
            params = default_params(template, seed)
            ds, puzzle = gen_dataset(params)
            need_truth = ground_truth(ds, puzzle.need, RP)
            constraint_truth = ground_truth(ds, puzzle.constraint, RP)
            if template == "peaks_gaps":
                plant = params.plant
                if len(need_truth.peaks) != len(plant.modes):
                    misses.append((template, seed, "peaks", len(need_truth.peaks)))
                realized = constraint_truth.gaps
                if len(realized) != len(plant.gaps) or not all(
                        rl <= gl and rh >= gh
                        for (rl, rh), (gl, gh) in zip(realized, plant.gaps)):
                    misses.append((template, seed, "gaps", realized))
            elif template == "outliers_points":
                if len(need_truth.outlier_rows) != params.plant.n_outliers:
                    misses.append((template, seed, "outliers",
                                   len(need_truth.outlier_rows)))
            else:
                if need_truth.cv is None or need_truth.cv < RP.cv_threshold:
                    misses.append((template, seed, "saturation cv", need_truth.cv))
            report = verify_puzzle(ds, puzzle, RP)
            if report.need_present and report.constraint_present:
                both_present += 1
    _report("plant-recover", not misses and both_present == total,
            f"150/150 plants recovered, {both_present}/{total} puzzles verified"
            if not misses else f"misses: {misses[:5]}")


# --- 6. state-machine safety ------------------------------------------------------------

def _check_round_invariants(state) -> None:
    limit = state.config.responses_per_sender
    for (gi, ri), rs in state.rounds.items():
        for sender, count in rs.response_counts.items():
            assert count <= limit
        assert (rs.contract is not None) == (rs.phase == Phase.COMPLETE)
        if rs.contract:
            assert rs.contract["rationale"].strip()
        for m in rs.messages:
            assert len(m.charts) <= state.config.charts_per_message


def _canonical_illegal_injections() -> int:
    """Play to the relevant phase and inject each canonical illegal event."""
    rejected = 0
    cfg = SessionConfig(puzzles=("pa", "pb", "pc"), rotation_seed=5)
    for trial in range(100):
        state = new_session(cfg, ["ana", "bo", "cy"], f"inj{trial}")
        group = state.groups[0]
        recv = group.receiver(0)
        s_a, s_b = group.senders(0)
        state = apply_event(state, query_sent(state, recv, "q"))
        # contract before any response from the named winner
        try:
            apply_event(state, contract_signed(state, recv, s_a, "early"))
        except IllegalEventError:
            rejected += 1
        state = apply_event(state, response_sent(state, s_a, "r1"))
        state = apply_event(state, response_sent(state, s_b, "r1"))
        # empty rationale
        try:
            apply_event(state, contract_signed(state, recv, s_a, "  "))
        except IllegalEventError:
            rejected += 1
        # third response (limit is two)
        from showhide.game_core import followup_sent
        state = apply_event(state, followup_sent(state, recv, s_a, "f"))
        state = apply_event(state, followup_sent(state, recv, s_b, "f"))
        state = apply_event(state, response_sent(state, s_a, "r2"))
        try:
            apply_event(state, response_sent(state, s_a, "r3"))
        except IllegalEventError:
            rejected += 1
    return rejected


def test_state_machine_safety():
    t0 = time.perf_counter()
    bad = []
    for seed in range(1000):
        events = random_legal_session(seed, n_groups=1 + seed % 2)
        live = None
        for e in events:
            live = apply_event(live, e)
            _check_round_invariants(live)
        if replay(events).state_hash() != live.state_hash():
            bad.append((seed, "replay hash"))
    rejected = _canonical_illegal_injections()
    elapsed = time.perf_counter() - t0
    _report("state-machine safety", not bad and rejected == 300,
            f"1000 sequences replay-stable, {rejected}/300 canonical "
            f"illegal events rejected, {elapsed:.1f} s"
            if not bad else f"failures: {bad[:5]}")


# --- 7. end-to-end loopback ---------------------------------------------------------------

class _Client:
    """One scripted player: REST via httpx, realtime via a sync websocket."""

    def __init__(self, base, ws_base, session, grant):
        import httpx

        self.http = httpx.Client(base_url=base, timeout=10)
        self.session = session
        self.grant = grant
        self.token = grant["token"]
        self.player = grant["player"]
        from websockets.sync.client import connect

        self.ws = connect(f"{ws_base}/ws?token={self.token}&session={session}")

    def submit(self, msg_type: str, payload: dict) -> dict:
        self.ws.send(json.dumps({"type": msg_type, "session": self.session,
                                 "payload": payload}))
        while True:
            msg = json.loads(self.ws.recv(timeout=10))
            if msg["type"] == "ack":
                return msg
            assert msg["type"] != "error", msg

    def state(self) -> dict:
        r = self.http.get(f"/sessions/{self.session}/state",
                          headers={"x-token": self.token})
        assert r.status_code == 200
        return r.json()

    def close(self):
        self.ws.close()
        self.http.close()


@pytest.fixture(scope="module")
def live_server(tmp_path_factory):
    import uvicorn

    from showhide.net_service import ServerConfig, create_app
    from showhide.puzzle_gen import write_bundle

    root = tmp_path_factory.mktemp("loopback")
    puzzles = {}
    for template in ("peaks_gaps", "outliers_points", "saturation_locations"):
        pid = f"{template}-7"
        write_bundle(root / pid, default_params(template, 7))
        puzzles[pid] = str(root / pid)
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    config = ServerConfig(host="127.0.0.1", port=port, data_dir=str(root / "data"),
                          admin_token="loopback-admin", puzzles=puzzles)
    app = create_app(config)
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    yield f"http://127.0.0.1:{port}", f"ws://127.0.0.1:{port}", config
    server.should_exit = True
    thread.join(timeout=5)


def test_end_to_end_loopback(live_server):
    import httpx

    base, ws_base, config = live_server
    admin = httpx.Client(base_url=base, timeout=10,
                         headers={"x-token": config.admin_token})
    created = admin.post("/sessions", json={
        "session": "loop",
        "config": {"puzzles": ["peaks_gaps-7", "outliers_points-7",
                               "saturation_locations-7"], "rotation_seed": 12},
        "roster": ["ana", "bo", "cy"]})
    assert created.status_code == 200, created.text
    codes = created.json()["join_codes"]

    clients = {}
    for player, code in codes.items():
        grant = httpx.post(f"{base}/sessions/loop/join", json={"code": code},
                           timeout=10).json()
        clients[player] = _Client(base, ws_base, "loop", grant)

    t0 = time.perf_counter()
    chart = {"mark": "point", "encoding": {"x": {"field": "pollutant_ppb"}}}
    for round_idx in range(3):
        views = {p: c.state() for p, c in clients.items()}
        receiver = next(p for p, v in views.items() if v["role"] == "receiver")
        senders = [p for p, v in views.items() if v["role"] == "sender"]
        assert views[receiver]["round"] == round_idx
        clients[receiver].submit("QuerySent", {"text": f"round {round_idx} query"})
        for s in senders:
            payload = {"text": "see attached"}
            if views[s]["puzzle"].startswith("peaks_gaps"):
                payload["charts"] = [chart]
            clients[s].submit("ResponseSent", payload)
        for s in senders:
            clients[receiver].submit("FollowupSent",
                                     {"target_sender": s, "text": "one more view?"})
        for s in senders:
            clients[s].submit("ResponseSent", {"text": "updated"})
        clients[receiver].submit("ContractSigned",
                                 {"winner": senders[0],
                                  "rationale": "most directly useful"})
        r = admin.post("/sessions/loop/score", json={"group": 0, "round": round_idx})
        assert r.status_code == 200
        # admin advances over the realtime channel like any other actor
        from websockets.sync.client import connect

        with connect(f"{ws_base}/ws?token={config.admin_token}&session=loop") as ws:
            ws.send(json.dumps({"type": "RoundAdvanced", "session": "loop",
                                "payload": {"group": 0}}))
            while json.loads(ws.recv(timeout=10))["type"] != "ack":
                pass
    elapsed = time.perf_counter() - t0

    final_admin_view = admin.get("/sessions/loop/state").json()
    assert final_admin_view["finished"]

    # access-control matrix on the live server: no dataset bytes to receivers
    leaks = []
    views = {p: c.state() for p, c in clients.items()}
    for p, c in clients.items():
        resp = c.http.get("/puzzles/peaks_gaps-7/dataset.csv",
                          params={"session": "loop"}, headers={"x-token": c.token})
        can = views[p]["capabilities"]["can_download_dataset"] \
            and views[p]["puzzle"] == "peaks_gaps-7"
        if can and resp.status_code != 200:
            leaks.append((p, "sender denied"))
        if not can:
            if resp.status_code == 200 or "pollutant_ppb" in resp.text:
                leaks.append((p, "dataset bytes leaked"))
        if c.http.get("/sessions/loop/export",
                      headers={"x-token": c.token}).status_code != 403:
            leaks.append((p, "export exposed"))
        if c.http.post("/sessions/loop/score", json={"group": 0, "round": 0},
                       headers={"x-token": c.token}).status_code != 403:
            leaks.append((p, "scoring exposed"))

    export_text = admin.get("/sessions/loop/export", params={"seed": 9}).text
    from showhide.game_core import GameEvent

    events = [GameEvent.from_dict(json.loads(line))
              for line in export_text.splitlines() if line.strip()]
    replayed = replay(events)
    structural_ok = (replayed.finished
                     and all(rs.phase == Phase.COMPLETE and rs.contract
                             for rs in replayed.rounds.values()))

    for c in clients.values():
        c.close()
    admin.close()
    _report("end-to-end loopback",
            elapsed < 5.0 and not leaks and structural_ok,
            f"3 rounds in {elapsed:.2f} s, export replays to a finished session, "
            f"access matrix clean"
            if not leaks else f"leaks: {leaks}")
