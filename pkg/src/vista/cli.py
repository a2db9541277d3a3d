"""Command-line client.

Every subcommand is a thin HTTP client of the service app: by default the app
is mounted in-process (no server or network needed), or point --server at a
running `vista serve` instance. All commands are non-interactive; exit codes
are stable: 0 success, 1 config/usage error, 2 fatal backend.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional

import httpx

from .config import load_config_file
from .errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BACKEND = 2

_BACKEND_ERROR_STATUSES = (502,)


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_CONFIG):
        super().__init__(message)
        self.exit_code = exit_code


class ServiceClient:
    """Issues requests against a remote server or the in-process app.

    The in-process app is created once per client so state like the run
    registry survives across the requests of one command.
    """

    def __init__(self, server: Optional[str] = None, timeout: float = 600.0):
        self.server = server
        self.timeout = timeout
        self._app = None
        if not server:
            from .service.app import create_app

            self._app = create_app()

    def request(self, method: str, path: str, *, body: Any = None,
                params: Optional[dict] = None) -> dict:
        return asyncio.run(self._request(method, path, body, params))

    async def _request(self, method: str, path: str, body: Any,
                       params: Optional[dict]) -> dict:
        if self.server:
            client = httpx.AsyncClient(base_url=self.server, timeout=self.timeout)
        else:
            transport = httpx.ASGITransport(app=self._app)
            client = httpx.AsyncClient(
                transport=transport, base_url="http://vista.internal", timeout=self.timeout
            )
        try:
            response = await client.request(method, path, json=body, params=params)
        except httpx.HTTPError as exc:
            raise CliError(f"cannot reach service: {exc}", EXIT_BACKEND)
        finally:
            await client.aclose()
        if response.status_code >= 400:
            detail = _error_detail(response)
            code = EXIT_BACKEND if response.status_code in _BACKEND_ERROR_STATUSES else EXIT_CONFIG
            raise CliError(detail, code)
        return response.json()


def _error_detail(response: httpx.Response) -> str:
    try:
        payload = response.json()
    except ValueError:
        return f"HTTP {response.status_code}: {response.text[:200]}"
    if isinstance(payload, dict):
        if "detail" in payload and isinstance(payload["detail"], str):
            return payload["detail"]
        if "error" in payload:
            return f"{payload.get('error')}: {payload.get('detail', '')}"
        return json.dumps(payload)
    return str(payload)


def _read_prompt_file(path: str) -> str:
    prompt_path = Path(path)
    if not prompt_path.is_file():
        raise CliError(f"prompt file not found: {prompt_path}")
    text = prompt_path.read_text(encoding="utf-8").strip()
    if not text:
        raise CliError(f"prompt file is empty: {prompt_path}")
    return text


def _load_config_arg(path: Optional[str]) -> Optional[dict]:
    if path is None:
        return None
    try:
        return load_config_file(Path(path))
    except ConfigError as exc:
        raise CliError(str(exc))


# --- subcommands ---------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    body = {
        "prompt_text": _read_prompt_file(args.prompt_file),
        "duration_seconds": args.duration,
        "video_type": args.video_type,
        "backend": args.backend,
        "out_dir": args.out_dir,
        "config": _load_config_arg(args.config),
        "transcript": args.transcript,
        "wait": True,
    }
    if args.seed is not None:
        body["seed"] = args.seed
    if args.iterations is not None:
        body["iterations"] = args.iterations
    if args.early_stop is not None:
        body["early_stop"] = args.early_stop
    if args.light:
        body["light"] = True
    info = client.request("POST", "/runs", body=body)
    _print_run_info(info)
    return EXIT_OK


def cmd_resume(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    info = client.request(
        "POST", "/runs/resume", body={"run_dir": args.run_dir, "wait": True}
    )
    _print_run_info(info)
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    opened = client.request("POST", "/runs/open", body={"run_dir": args.run_dir})
    run_id = opened.get("run_id")
    if not run_id:
        raise CliError(f"{args.run_dir} has no readable run manifest")
    view = client.request("GET", f"/runs/{run_id}/iterations/{args.iteration}")
    _print_iteration(view)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    body = {
        "prompt_file": args.prompt_file,
        "side_a": args.side_a,
        "side_b": args.side_b,
        "backend": args.backend,
        "seed": args.seed or 0,
        "transcript": args.transcript,
        "duration_seconds": args.duration,
        "results_out": args.results_out,
    }
    summary = client.request("POST", "/eval", body=body)
    print(
        f"pairs={summary['matches']} win={summary['win']:.1f}% "
        f"tie={summary['tie']:.1f}% loss={summary['loss']:.1f}% "
        f"delta={summary['delta']:.1f}"
    )
    breakdown = summary.get("criteria_breakdown") or {}
    if breakdown:
        width = max(len(name) for name in breakdown)
        print(f"{'criterion'.ljust(width)}  A_better  B_better  tie")
        for name, row in breakdown.items():
            print(
                f"{name.ljust(width)}  {row['A_BETTER']:>8}  {row['B_BETTER']:>8}  "
                f"{row['TIE']:>3}"
            )
    if summary.get("results_file"):
        print(f"results: {summary['results_file']}")
    return EXIT_OK


def cmd_transcript(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    info = client.request("GET", "/transcripts/info", params={"path": args.path})
    if args.action == "verify":
        if info["valid"]:
            print(f"ok: {info['records']} record(s)")
            return EXIT_OK
        print(f"corrupt: {info.get('detail')}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"path: {info['path']}")
    print(f"records: {info['records']}")
    for template, count in sorted(info["templates"].items()):
        print(f"  {template}: {count}")
    if not info["valid"]:
        print(f"warning: {info.get('detail')}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def _print_run_info(info: dict) -> None:
    print(f"run {info.get('run_id')}: {info.get('status')}")
    print(f"out dir: {info.get('out_dir')}")
    costs = info.get("costs")
    if costs:
        print(
            f"iterations: {info.get('iterations_completed')} | "
            f"tokens in/out: {costs.get('tokens_in')}/{costs.get('tokens_out')} | "
            f"videos: {costs.get('new_videos')}"
        )
    champion = info.get("champion")
    if champion:
        print(f"champion video: {info.get('champion_video_path') or champion['video']['id']}")
        print("champion prompt:")
        print(champion["prompt"]["text"])


def _print_iteration(view: dict) -> None:
    print(f"run {view['run_id']} iteration {view['index']} ({view['phase']})")
    print(f"champion video: {view['champion_video_id']}")
    print(f"prompts ({len(view['prompts'])}):")
    for prompt in view["prompts"]:
        marker = " [carryover]" if prompt["carryover"] else ""
        first_line = prompt["text"].splitlines()[0][:90]
        print(f"  - {prompt['id']} {prompt['lineage']}{marker}: {first_line}")
    if view["verdicts"]:
        print(f"comparisons ({len(view['verdicts'])}):")
        for verdict in view["verdicts"]:
            print(
                f"  - {verdict['pair'][0][:12]} vs {verdict['pair'][1][:12]} -> "
                f"{verdict['winner'][:12]} ({verdict['via']})"
            )
    tallies = view.get("criterion_tallies") or {}
    if tallies:
        print("per-criterion outcomes (slot A wins / ties / slot B wins):")
        for criterion, tally in tallies.items():
            print(
                f"  {criterion}: {tally['first_wins']}/{tally['ties']}/{tally['second_wins']}"
            )
    if view["meta_scores"]:
        print("meta scores:")
        for dimension, scores in view["meta_scores"].items():
            rendered = ", ".join(f"{k}={v}" for k, v in scores.items())
            print(f"  {dimension}: {rendered}")
    if view["modification_actions"]:
        print("modification actions:")
        for action in view["modification_actions"]:
            print(f"  - {action}")
    costs = view["costs"]
    print(
        f"costs: tokens {costs.get('tokens_in')}/{costs.get('tokens_out')}, "
        f"calls {costs.get('model_calls')}, new videos {costs.get('new_videos')}"
    )
    for warning in view["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vista",
        description="Iterative text-to-video prompt optimization.",
    )
    parser.add_argument("--server", help="URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="start an optimization run")
    run.add_argument("--prompt-file", required=True)
    run.add_argument("--out-dir", required=True)
    run.add_argument("--config", help="config file (YAML or JSON)")
    run.add_argument("--backend", choices=["live", "mock", "replay"], default="mock")
    run.add_argument("--transcript", help="transcript file (required for replay)")
    run.add_argument("--seed", type=int)
    run.add_argument("--iterations", type=int)
    run.add_argument("--early-stop", type=int, dest="early_stop")
    run.add_argument("--light", action="store_true")
    run.add_argument("--duration", type=int, default=8)
    run.add_argument("--video-type", default="real")
    run.set_defaults(handler=cmd_run)

    resume = sub.add_parser("resume", help="continue an interrupted run")
    resume.add_argument("run_dir")
    resume.set_defaults(handler=cmd_resume)

    inspect = sub.add_parser("inspect", help="print one iteration of a run")
    inspect.add_argument("run_dir")
    inspect.add_argument("--iteration", type=int, default=0)
    inspect.set_defaults(handler=cmd_inspect)

    evaluate = sub.add_parser("eval", help="pairwise-evaluate two video sets")
    evaluate.add_argument("side_a", help="video directory or run directory")
    evaluate.add_argument("side_b", help="video directory or run directory")
    evaluate.add_argument("--prompt-file", required=True)
    evaluate.add_argument("--backend", choices=["live", "mock", "replay"], default="mock")
    evaluate.add_argument("--transcript")
    evaluate.add_argument("--seed", type=int)
    evaluate.add_argument("--duration", type=int, default=8)
    evaluate.add_argument("--results-out", dest="results_out")
    evaluate.set_defaults(handler=cmd_eval)

    transcript = sub.add_parser("transcript", help="inspect or verify a transcript")
    transcript.add_argument("action", choices=["info", "verify"])
    transcript.add_argument("path")
    transcript.set_defaults(handler=cmd_transcript)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8321)
    serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", level=logging.WARNING)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
