"""Command-line client for the sweep service.

The CLI is a thin client: it loads a config document (or a data CSV),
posts it to the service API, and writes the response to a file or
stdout.  By default requests are dispatched to the service in-process
through an ASGI transport, so no server needs to run; ``--server URL``
targets a remote instance instead.

Exit codes: 0 on success (a non-converged fit is a data outcome, not an
error), 2 for usage or config errors, 3 when a computation exceeds its
capacity bound.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    # In-process dispatch through the ASGI app: same request/response
    # cycle as a live server, no daemon required.
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

        from .service import app  # deferred so --help stays fast

        return TestClient(app, base_url="http://apdlab.local")


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise CliError(f"config {path} must hold a JSON object")
    return config


def _records_payload(path: str) -> list[dict]:
    from .dataio import records_from_csv
    from .errors import ConfigurationError

    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read data {path}: {exc}") from exc
    try:
        records = records_from_csv(text)
    except ConfigurationError as exc:
        raise CliError(str(exc)) from exc
    payload = []
    for r in records:
        entry = {"x": r.x, "y": r.y}
        if r.y_err is not None:
            entry["y_err"] = r.y_err
        if r.n_samples is not None:
            entry["n_samples"] = r.n_samples
        payload.append(entry)
    return payload


def _post(client: httpx.Client, endpoint: str, payload: dict) -> dict:
    try:
        response = client.post(endpoint, json=payload)
    except httpx.HTTPError as exc:
        raise CliError(f"request to {endpoint} failed: {exc}") from exc
    if response.status_code == 200:
        return response.json()
    try:
        detail = response.json().get("detail")
    except ValueError:
        detail = response.text
    if isinstance(detail, dict):
        code = EXIT_CAPACITY if detail.get("code") == "capacity_error" else EXIT_CONFIG
        raise CliError(detail.get("message", "request rejected"), code)
    raise CliError(f"request rejected: {detail}", EXIT_CONFIG)


def _write_output(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_table(body: dict, args) -> None:
    if args.format == "csv":
        _write_output(body["csv"], args.out)
    else:
        from .dataio import json_text

        _write_output(json_text({"columns": body["columns"], "rows": body["rows"]}), args.out)


def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config.setdefault("sim", {})["seed"] = args.seed
    if args.shards is not None:
        config.setdefault("sim", {})["shards"] = args.shards
    with _client(args.server) as client:
        body = _post(client, "/simulate", config)
    _emit_table(body, args)
    return EXIT_OK


def _cmd_tmd(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    with _client(args.server) as client:
        body = _post(client, "/tmd", config)
    _emit_table(body, args)
    return EXIT_OK


def _cmd_fit(args) -> int:
    if args.format == "csv":
        raise CliError("fit reports are JSON; use --format json")
    payload = {"model": args.model, "records": _records_payload(args.data)}
    if args.f_rep is not None:
        payload["f_rep_hz"] = args.f_rep
    if args.n_bins is not None:
        payload["n_bins"] = args.n_bins
    if args.window is not None:
        payload["window"] = args.window
    with _client(args.server) as client:
        body = _post(client, "/fit", payload)
    from .dataio import json_text

    _write_output(json_text(body), args.out)
    return EXIT_OK


def _cmd_correction_table(args) -> int:
    if (args.config is None) == (args.data is None):
        raise CliError("provide exactly one of --config or --data")
    if args.config is not None:
        payload = _load_config(args.config)
        if args.seed is not None and "cw" in payload:
            payload["cw"]["seed"] = args.seed
    else:
        payload = {"records": _records_payload(args.data)}
        if args.window is not None:
            payload["linear_window_points"] = args.window
    with _client(args.server) as client:
        body = _post(client, "/correction-table", payload)
    _emit_table(body, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apdlab",
        description="Detector dead-time simulation, calibration fits, and "
        "time-multiplexed click-statistics tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON config document")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--server", default=None, help="remote service URL (default: in-process)")

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo sweep")
    common(p_sim)
    p_sim.add_argument("--shards", type=int, default=None,
                       help="worker threads for block generation (no effect on results)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit a model to sweep data")
    p_fit.add_argument("--data", required=True, help="CSV with x,y[,y_err] columns")
    p_fit.add_argument("--model", required=True, choices=("linear", "saturation", "mean-clicks"))
    p_fit.add_argument("--f-rep", type=float, default=None, help="repetition rate for saturation fits")
    p_fit.add_argument("--n-bins", type=int, default=None, help="bin count for mean-clicks fits")
    p_fit.add_argument("--window", type=int, default=None, help="restrict linear fits to a prefix")
    p_fit.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p_fit.add_argument("--out", default=None)
    p_fit.add_argument("--format", choices=("csv", "json"), default="json")
    p_fit.add_argument("--server", default=None)
    p_fit.set_defaults(func=_cmd_fit)

    p_tmd = sub.add_parser("tmd", help="click statistics through a splitting network")
    common(p_tmd)
    p_tmd.set_defaults(func=_cmd_tmd)

    p_corr = sub.add_parser("correction-table", help="dead-time correction factors")
    p_corr.add_argument("--config", default=None, help="cw simulation config")
    p_corr.add_argument("--data", default=None, help="CSV sweep records")
    p_corr.add_argument("--window", type=int, default=None,
                        help="linear-fit prefix length for the data route")
    p_corr.add_argument("--seed", type=int, default=None)
    p_corr.add_argument("--out", default=None)
    p_corr.add_argument("--format", choices=("csv", "json"), default="csv")
    p_corr.add_argument("--server", default=None)
    p_corr.set_defaults(func=_cmd_correction_table)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
