"""Command-line entry points: serve, score, genpuzzle, export, replay."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .chart_spec import parse_chart_spec, validate_spec
from .errors import ShowHideError
from .game_core import GameEvent, anonymize, replay as replay_events
from .net_service import ServerConfig, run_server
from .puzzle_gen import TEMPLATES, default_params, load_bundle, write_bundle
from .signal_rubric import RubricParams, score
from .utils import canonical_json


@click.group()
def main():
    """Disclosure-game platform: author charts, score disclosure, run sessions."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Server config JSON (host, port, data_dir, admin_token, puzzles).")
def serve(config_path: str):
    """Run the game server; resumes sessions found in the data directory."""
    run_server(ServerConfig.from_file(config_path))


@main.command("score")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True),
              help="Puzzle bundle directory (dataset.csv, puzzle.json, manifest.json).")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="Chart spec JSON file to grade.")
@click.option("--params", "params_path", type=click.Path(exists=True),
              help="Optional rubric parameter overrides (JSON).")
@click.option("--explain", is_flag=True, help="Print one line per trace entry.")
def score_cmd(bundle_dir: str, spec_path: str, params_path: str | None, explain: bool):
    """Score one chart spec against a puzzle bundle."""
    dataset, puzzle, _ = load_bundle(bundle_dir)
    spec = parse_chart_spec(Path(spec_path).read_text(encoding="utf-8"))
    report = validate_spec(spec, dataset.schema)
    if not report.ok:
        click.echo(json.dumps(report.to_dict(), indent=2))
        sys.exit(2)
    params = (RubricParams.from_dict(json.loads(Path(params_path).read_text("utf-8")))
              if params_path else RubricParams())
    card = score(spec, dataset, puzzle, params)
    if explain:
        click.echo(card.explain())
    else:
        click.echo(json.dumps(card.to_dict(), indent=2))


@main.command()
@click.option("--template", required=True, type=click.Choice(TEMPLATES))
@click.option("--seed", required=True, type=int)
@click.option("--rows", type=int, default=None, help="Override the template row count.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Bundle output directory (default: ./<template>_<seed>).")
def genpuzzle(template: str, seed: int, rows: int | None, out_dir: str | None):
    """Generate a seeded puzzle bundle and its tension report."""
    params = default_params(template, seed, rows)
    out = Path(out_dir) if out_dir else Path(f"{template}_{seed}")
    write_bundle(out, params)
    tension = json.loads((out / "tension.json").read_text(encoding="utf-8"))
    click.echo(f"bundle written to {out}")
    click.echo(json.dumps(tension, indent=2))


@main.command()
@click.option("--session", required=True, help="Session id (log file stem).")
@click.option("--data-dir", "data_dir", default="./data", type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, help="Pseudonym seed.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Output file (default: stdout).")
def export(session: str, data_dir: str, seed: int, out_path: str | None):
    """Export a session's anonymized event log."""
    log_path = Path(data_dir) / f"{session}.log"
    if not log_path.exists():
        raise click.ClickException(f"no log for session {session!r} in {data_dir}")
    events = [GameEvent.from_dict(json.loads(line))
              for line in log_path.read_text(encoding="utf-8").splitlines() if line.strip()]
    text = "\n".join(canonical_json(e.to_dict()) for e in anonymize(events, seed)) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
def replay(log_path: str):
    """Validate an event log and print the terminal state summary."""
    events = [GameEvent.from_dict(json.loads(line))
              for line in Path(log_path).read_text(encoding="utf-8").splitlines()
              if line.strip()]
    try:
        state = replay_events(events)
    except ShowHideError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps({
        "session": state.session_id,
        "events": state.last_seq,
        "finished": state.finished,
        "state_hash": state.state_hash(),
    }, indent=2))


if __name__ == "__main__":
    main()
