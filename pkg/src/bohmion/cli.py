"""Command-line front-end: a thin client of the HTTP service.

Subcommands:

    bohmion run <cfg> [--out DIR] [--url URL]
    bohmion check [--seed N] [--only name ...] [--url URL]
    bohmion converge <cfg> --param {dt,grid_spacing,alpha} [--levels K] [--url URL]
    bohmion serve [--host H] [--port P]

Without --url the service app is mounted in-process (no server needed);
with --url the same requests go to a remote instance.  The output root
may be overridden with the BOHMION_OUTPUT_ROOT environment variable.

Exit codes: 0 success, 1 config error, 2 invariant failure, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_NUMERICAL = 3

OUTPUT_ROOT_ENV = "BOHMION_OUTPUT_ROOT"


class _InProcessClient:
    """Synchronous facade over the ASGI app (no server process needed)."""

    def __init__(self):
        from .service import app

        self._app = app

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        import asyncio

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://bohmion.local", timeout=None
            ) as client:
                return await client.request(method, path, **kwargs)

        return asyncio.run(go())

    def post(self, path: str, **kwargs) -> httpx.Response:
        return self._request("POST", path, **kwargs)

    def get(self, path: str, **kwargs) -> httpx.Response:
        return self._request("GET", path, **kwargs)


def _client(url: str | None):
    if url:
        return httpx.Client(base_url=url, timeout=600.0)
    return _InProcessClient()


def _resolve_output_dir(cli_out: str | None, config_out: str | None) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    chosen = cli_out or config_out or "bohmion-out"
    path = Path(chosen)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _write_summary(out_dir: Path, summary: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path


def _cmd_run(args) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.is_file():
        print(f"error: config file not found: {cfg_path}", file=sys.stderr)
        return EXIT_CONFIG
    text = cfg_path.read_text()

    # peek at [output] directory without failing: the server re-parses anyway
    config_out = None
    for line in text.splitlines():
        if line.strip().startswith("directory"):
            _, _, value = line.partition("=")
            config_out = value.split(";")[0].split("#")[0].strip()

    with _client(args.url) as client:
        resp = client.post("/run", json={"config_text": text})
        if resp.status_code == 400:
            print(f"config error: {resp.json()['detail']}", file=sys.stderr)
            return EXIT_CONFIG
        resp.raise_for_status()
        payload = resp.json()

    out_dir = _resolve_output_dir(args.out, config_out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for series in payload["series"]:
        (out_dir / f"{series['name']}.csv").write_text(series["csv"])
    summary_path = _write_summary(out_dir, payload["summary"])

    status = payload["status"]
    if status == "numerical_failure":
        print(f"numerical failure: {payload['message']}", file=sys.stderr)
        return EXIT_NUMERICAL
    drifts = payload["summary"].get("invariant_drifts", {})
    for name, value in sorted(drifts.items()):
        print(f"  {name}: {value:.3e}")
    print(f"wrote {summary_path}")
    if status == "invariant_failure":
        print(
            "invariant failure: " + ", ".join(payload["failures"]), file=sys.stderr
        )
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_check(args) -> int:
    body = {"seed": args.seed}
    if args.only:
        body["names"] = args.only
    with _client(args.url) as client:
        resp = client.post("/check", json=body)
        resp.raise_for_status()
        payload = resp.json()
    width = max((len(r["name"]) for r in payload["results"]), default=10)
    for r in payload["results"]:
        mark = "PASS" if r["passed"] else "FAIL"
        extra = f"  ({r['detail']})" if r["detail"] else ""
        measured = "" if r["measured"] is None else f"  measured {r['measured']:.3e}"
        print(f"{mark}  {r['name']:<{width}}{measured}{extra}")
    if not payload["passed"]:
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_converge(args) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.is_file():
        print(f"error: config file not found: {cfg_path}", file=sys.stderr)
        return EXIT_CONFIG
    body = {
        "config_text": cfg_path.read_text(),
        "parameter": args.param,
        "levels": args.levels,
    }
    with _client(args.url) as client:
        resp = client.post("/converge", json=body)
        if resp.status_code == 400:
            print(f"config error: {resp.json()['detail']}", file=sys.stderr)
            return EXIT_CONFIG
        resp.raise_for_status()
        payload = resp.json()
    print(f"parameter: {payload['parameter']}   ({payload['detail']})")
    for value, err in zip(payload["values"], payload["errors"]):
        print(f"  {payload['parameter']} = {value:.6g}   error = {err:.6e}")
    orders = ", ".join(f"{o:.3f}" for o in payload["observed_orders"])
    print(f"observed orders: {orders}")
    if not payload["monotone"]:
        print("warning: non-monotone error sequence", file=sys.stderr)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bohmion",
        description="Regularized quantum hydrodynamics lab (thin client of the service)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (default: config or bohmion-out)")
    p_run.add_argument("--url", help="remote service URL (default: in-process)")
    p_run.set_defaults(fn=_cmd_run)

    p_check = sub.add_parser("check", help="run the invariant and property suites")
    p_check.add_argument("--seed", type=int, default=1234)
    p_check.add_argument("--only", nargs="*", help="subset of check names")
    p_check.add_argument("--url")
    p_check.set_defaults(fn=_cmd_check)

    p_conv = sub.add_parser("converge", help="refinement study")
    p_conv.add_argument("config")
    p_conv.add_argument("--param", required=True, choices=["dt", "grid_spacing", "alpha"])
    p_conv.add_argument("--levels", type=int, default=3)
    p_conv.add_argument("--url")
    p_conv.set_defaults(fn=_cmd_converge)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8711)
    p_serve.set_defaults(fn=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
