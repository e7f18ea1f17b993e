#!/usr/bin/env python3
"""fedbot command line: ``sim`` runs scenarios, ``run`` starts a live bot, ``repl`` talks to one."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TextIO

import requests

from core.logging import setup_logging
from sim import SCENARIO_DIR
from sim.invariants import InvariantReport, check_invariants, summarize
from sim.runner import enumerate_small_schedules, run_scenario
from sim.scenario import Mode, Scenario, ScenarioError
from sim.trace import EventTrace

logger = logging.getLogger("fedbot")

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_SCENARIO = 2
SEED_ENV = "FEDBOT_SEED"
QUIT = "/quit"


# ---- sim ----

def resolve_scenario_path(value: str) -> Path:
    path = Path(value)
    if path.exists():
        return path
    bundled = SCENARIO_DIR / f"{value}.json"
    return bundled if bundled.exists() else path


def resolve_seed(cli_seed: Optional[int], scenario: Scenario) -> int:
    if cli_seed is not None:
        return cli_seed
    raw = os.environ.get(SEED_ENV, "").strip()
    if raw:
        try:
            return int(raw)
        except ValueError as exc:
            raise ScenarioError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc
    return scenario.seed


def _exit_code(reports: Sequence[InvariantReport]) -> int:
    return EXIT_OK if all(report.passed for report in reports) else EXIT_INVARIANT


def _print_summary(
    scenario: Scenario, seed: int, traces: List[EventTrace], reports: List[InvariantReport], out: TextIO
) -> None:
    counts = summarize(traces[0])
    runs = f" over {len(traces)} schedules" if len(traces) > 1 else ""
    out.write(
        f"scenario {scenario.name} (seed {seed}{runs}): "
        f"{counts['executions']} executions, {counts['deliveries']} deliveries, "
        f"{counts['unclaimed']} unclaimed, {counts['timeouts']} timeouts\n"
    )
    failed = {}
    for number, report in enumerate(reports):
        for result in report.failures():
            failed.setdefault(result.name, (number, result))
    for result in reports[0].results:
        if result.name in failed:
            number, failure = failed[result.name]
            where = f" in schedule {number}" if len(reports) > 1 else ""
            detail = f" ({failure.detail})" if failure.detail else ""
            out.write(f"  FAIL {result.name}{where}: events {failure.offending}{detail}\n")
        else:
            out.write(f"  ok   {result.name}\n")


def cmd_sim(args: argparse.Namespace, out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        scenario = Scenario.load(resolve_scenario_path(args.scenario))
        seed = resolve_seed(args.seed, scenario)
        scenario = scenario.with_seed(seed)
        if scenario.mode is Mode.EXHAUSTIVE:
            traces = enumerate_small_schedules(scenario)
        else:
            traces = [run_scenario(scenario)]
    except ScenarioError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_SCENARIO

    reports = [check_invariants(trace, scenario) for trace in traces]
    if args.trace:
        Path(args.trace).write_text("".join(trace.to_jsonl() for trace in traces), encoding="utf-8")
    if args.json:
        payload = {
            "scenario": scenario.name,
            "seed": seed,
            "schedules": len(traces),
            "summary": summarize(traces[0]),
            "passed": all(report.passed for report in reports),
            "report": reports[0].to_dict() if len(reports) == 1 else [report.to_dict() for report in reports if not report.passed],
        }
        out.write(json.dumps(payload) + "\n")
    else:
        _print_summary(scenario, seed, traces, reports, out)
    return _exit_code(reports)


# ---- run ----

def cmd_run(args: argparse.Namespace) -> int:
    import uvicorn

    from app import create_app
    from core.channel import BrokerUnavailable
    from core.config import AppConfig
    from core.plugins import PluginLoadError
    from core.runtime import BotRuntime

    try:
        config = AppConfig.from_file(args.config)
    except (FileNotFoundError, RuntimeError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_SCENARIO
    setup_logging("DEBUG" if args.verbose else config.log_level)

    try:
        runtime = BotRuntime(config)
    except (BrokerUnavailable, PluginLoadError) as exc:
        logger.error("Cannot start %s: %s", config.bot.name, exc)
        return EXIT_INVARIANT

    api = create_app(runtime)
    try:
        uvicorn.run(api, host=config.host, port=config.port, log_level=config.log_level.lower())
    except KeyboardInterrupt:
        runtime.stop()
    return EXIT_OK


# ---- repl ----

class ConnectionLost(RuntimeError):
    pass


class ReplSession:
    """A user typing at one bot over its HTTP front routes."""

    def __init__(
        self,
        base_url: str,
        bot: str,
        user: str,
        session: Optional[requests.Session] = None,
        timeout: float = 10.0,
        out: Optional[TextIO] = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.bot = bot
        self.user = user
        self.session = session or requests.Session()
        self.timeout = timeout
        self.out = out or sys.stdout
        self.next_index = 0
        self._lock = threading.Lock()

    def _request(self, method: str, path: str, **kwargs):
        try:
            response = self.session.request(method, f"{self.base_url}{path}", timeout=self.timeout, **kwargs)
        except requests.exceptions.RequestException as exc:
            raise ConnectionLost(f"Lost connection to {self.base_url}: {exc}") from exc
        if response.status_code == 404:
            raise ConnectionLost(f"No bot named {self.bot} at {self.base_url}")
        return response

    def send(self, line: str) -> None:
        response = self._request("post", f"/bots/{self.bot}/say", json={"user": self.user, "text": line})
        if response.status_code >= 400:
            detail = response.json().get("detail", response.status_code)
            self.out.write(f"! {detail}\n")

    def poll(self) -> List[str]:
        """Print deliveries that arrived since the last poll, each exactly once."""

        with self._lock:
            response = self._request(
                "get", f"/bots/{self.bot}/outbox", params={"user": self.user, "after": self.next_index}
            )
            data = response.json()
            texts = [entry["text"] for entry in data["deliveries"]]
            self.next_index = max(self.next_index, int(data["next"]))
            for text in texts:
                self.out.write(f"{self.bot}> {text}\n")
            self.out.flush()
            return texts

    def run(self, read_line: Callable[[], str] = input, interval: float = 0.5) -> int:
        stop = threading.Event()
        lost: List[ConnectionLost] = []

        def poller() -> None:
            while not stop.wait(interval):
                try:
                    self.poll()
                except ConnectionLost as exc:
                    lost.append(exc)
                    stop.set()

        thread = threading.Thread(target=poller, name="repl-poll", daemon=True)
        thread.start()
        try:
            while not stop.is_set():
                try:
                    line = read_line()
                except EOFError:
                    break
                if line.strip() == QUIT:
                    break
                self.send(line)
        except ConnectionLost as exc:
            lost.append(exc)
        finally:
            stop.set()
            thread.join(timeout=interval * 2)
        if lost:
            sys.stderr.write(f"error: {lost[0]}\n")
            return EXIT_INVARIANT
        return EXIT_OK


def cmd_repl(args: argparse.Namespace) -> int:
    session = ReplSession(args.url, args.attach, args.user)
    sys.stdout.write(f"Talking to {args.attach} as {args.user}; {QUIT} to leave.\n")
    try:
        session.poll()
    except ConnectionLost as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVARIANT
    return session.run()


# ---- entry point ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedbot", description="Federated chatbots over a shared C&C channel")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    sim = subparsers.add_parser("sim", help="Run a scenario and check protocol invariants")
    sim.add_argument("scenario", help="Scenario JSON file or bundled scenario name")
    sim.add_argument("--seed", type=int, default=None, help=f"Override the scenario seed (wins over {SEED_ENV})")
    sim.add_argument("--trace", metavar="PATH", default=None, help="Write the event trace as JSON lines")
    sim.add_argument("--json", action="store_true", help="Machine-readable summary")
    sim.set_defaults(handler=cmd_sim)

    run = subparsers.add_parser("run", help="Start a live bot from a dotenv config file")
    run.add_argument("config", help="Path to the bot's .env file")
    run.set_defaults(handler=cmd_run)

    repl = subparsers.add_parser("repl", help="Chat with a running bot")
    repl.add_argument("--attach", required=True, metavar="NAME", help="Bot to talk to")
    repl.add_argument("--url", default=os.environ.get("FEDBOT_URL", "http://127.0.0.1:4321"), help="Bot base URL")
    repl.add_argument("--user", default=os.environ.get("USER", "user") + "@localhost", help="Your user handle")
    repl.set_defaults(handler=cmd_repl)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.subcommand != "run":
        setup_logging("DEBUG" if args.verbose else os.environ.get("LOG_LEVEL", "WARNING"))
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
