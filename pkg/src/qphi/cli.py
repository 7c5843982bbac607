"""Command-line client for the analysis service.

Every subcommand marshals local files into API requests and writes the
responses back to disk; the computation itself lives behind the service
surface. By default the app is driven in-process, so no server is needed;
``--server URL`` points the same commands at a remote instance. Exit codes:
0 all cycles succeeded, 1 partial failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import build_settings, load_config_file
from .errors import QphiError

USAGE_ERROR = 2
PARTIAL_FAILURE = 1

PLOT_KINDS = ("iv", "qphi", "hist", "scatter", "norm", "params")
QUANTITIES = ("phi_rst", "q_rst", "n", "v_rst", "i_rst")


class UsageError(Exception):
    pass


def make_client(server: str | None):
    """HTTP client against a remote server, or the app mounted in-process."""
    import httpx

    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from starlette.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app())


def _call(client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except Exception:
            detail = response.text
        raise UsageError(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def _gather_inputs(paths: list[str], suffix: str) -> list[Path]:
    found: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            found.extend(sorted(p.glob(f"*{suffix}")))
        elif p.exists():
            found.append(p)
        else:
            raise UsageError(f"input {raw!r} does not exist")
    if not found:
        raise UsageError(f"no {suffix} inputs found in {paths!r}")
    return found


def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out_dir: Path, args: argparse.Namespace, inputs: list[Path],
                    settings_dict: dict) -> None:
    manifest = {
        "subcommand": args.command,
        "argv": sys.argv[1:],
        "inputs": [str(p) for p in inputs],
        "config": settings_dict,
        "seed": getattr(args, "seed", None),
        "out_dir": str(out_dir),
        "tool_version": __version__,
    }
    _dump_json(out_dir / "manifest.json", manifest)


def _settings_from_args(args: argparse.Namespace) -> dict:
    """Effective flat settings: config file values overridden by CLI flags."""
    values: dict[str, str] = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for pair in getattr(args, "set", None) or []:
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        values[key.strip()] = value.strip()
    if getattr(args, "seed", None) is not None:
        values["seed"] = str(args.seed)
    if getattr(args, "dt", None) is not None:
        values["dt"] = str(args.dt)
    if getattr(args, "noise", None) is not None:
        values["noise_sigma_q"] = str(args.noise)
    if getattr(args, "bins", None) is not None:
        values["bins"] = str(args.bins)
    return values


def _extraction_payload(settings) -> dict:
    import dataclasses

    return dataclasses.asdict(settings.extraction)


def _sim_payload(settings) -> dict:
    sim = settings.sim
    return {
        "dt": sim.dt,
        "noise_sigma_q": sim.noise_sigma_q,
        "seed": sim.seed,
        "flux_steps": sim.flux_steps,
        "stop_phi_factor": sim.stop_phi_factor,
    }


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_summary(out_dir: Path, summary: dict, fmt: str) -> None:
    if fmt == "csv":
        lines = ["quantity,mean,std"]
        for name in sorted(summary):
            lines.append(f"{name},{summary[name]['mean']!r},{summary[name]['std']!r}")
        (out_dir / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        _dump_json(out_dir / "summary.json", summary)


def cmd_ingest(args, client) -> int:
    inputs = _gather_inputs(args.inputs, ".csv")
    out = _out_dir(args)
    settings = build_settings(_settings_from_args(args))
    exit_code = 0
    for path in inputs:
        payload = {"content": path.read_text(encoding="utf-8")}
        if settings.split_threshold_v is not None:
            payload["split_threshold_v"] = settings.split_threshold_v
        result = _call(client, "/ingest", payload)
        (out / f"{path.stem}_cycles.csv").write_text(result["content"], encoding="utf-8")
        if result["issues"]:
            _dump_json(out / f"{path.stem}_issues.json", result["issues"])
            exit_code = PARTIAL_FAILURE
        print(f"{path.name}: {len(result['cycles'])} cycle(s), {len(result['issues'])} issue(s)")
    _write_manifest(out, args, inputs, settings.to_dict())
    return exit_code


def _analysis_request(inputs: list[Path], settings) -> dict:
    return {
        "contents": [p.read_text(encoding="utf-8") for p in inputs],
        "extraction": _extraction_payload(settings),
        "fit_range": list(settings.fit_range),
    }


def cmd_extract(args, client) -> int:
    inputs = _gather_inputs(args.inputs, ".csv")
    out = _out_dir(args)
    settings = build_settings(_settings_from_args(args))
    result = _call(client, "/extract", _analysis_request(inputs, settings))
    for report in result["reports"]:
        _dump_json(out / f"cycle_{report['cycle_id']:04d}.json", report)
    _write_summary(out, result["summary"], args.format)
    if result["failures"]:
        _dump_json(out / "failures.json", result["failures"])
    _write_manifest(out, args, inputs, settings.to_dict())
    print(
        f"extracted {len(result['reports'])} cycle(s), "
        f"{len(result['failures'])} failure(s) -> {out}"
    )
    for failure in result["failures"]:
        print(f"  cycle {failure['cycle_id']}: {failure['error']}", file=sys.stderr)
    return PARTIAL_FAILURE if result["failures"] else 0


def cmd_fit(args, client) -> int:
    inputs = _gather_inputs(args.inputs, ".csv")
    out = _out_dir(args)
    settings = build_settings(_settings_from_args(args))
    result = _call(client, "/fit", _analysis_request(inputs, settings))
    for record in result["records"]:
        _dump_json(out / f"fit_cycle_{record['cycle_id']:04d}.json", record)
    _write_summary(out, result["summary"], args.format)
    if result["failures"]:
        _dump_json(out / "failures.json", result["failures"])
    _write_manifest(out, args, inputs, settings.to_dict())
    print(
        f"fitted {len(result['records'])} cycle(s), "
        f"{len(result['failures'])} failure(s) -> {out}"
    )
    for failure in result["failures"]:
        print(f"  cycle {failure['cycle_id']}: {failure['error']}", file=sys.stderr)
    return PARTIAL_FAILURE if result["failures"] else 0


def _load_records(paths: list[Path]) -> list[dict]:
    records = []
    for path in paths:
        data = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(data, list):
            records.extend(data)
        else:
            records.append(data)
    return records


def cmd_stats(args, client) -> int:
    inputs = _gather_inputs(args.inputs, ".json")
    inputs = [p for p in inputs if p.name not in ("manifest.json", "summary.json", "failures.json")]
    if not inputs:
        raise UsageError("no report JSONs among the inputs")
    records = _load_records(inputs)
    missing = [r for r in records if "n" not in r]
    if missing:
        raise UsageError(
            "stats needs model-parameter records including 'n'; run the fit command first"
        )
    out = _out_dir(args)
    settings = build_settings(_settings_from_args(args))
    payload_records = [
        {
            "cycle_id": r["cycle_id"],
            "phi_rst": r["phi_rst"],
            "q_rst": r["q_rst"],
            "n": r["n"],
            "v_rst": r.get("v_rst"),
            "i_rst": r.get("i_rst"),
        }
        for r in records
    ]
    payload = {"records": payload_records, "include_vi": True}
    if settings.bins is not None:
        payload["bins"] = settings.bins
    result = _call(client, "/stats", payload)
    _dump_json(out / "stats.json", result)
    if args.format == "csv":
        _write_summary(out, result["summary"], "csv")
    _write_manifest(out, args, inputs, settings.to_dict())
    print(f"stats over {len(records)} record(s) -> {out / 'stats.json'}")
    return 0


def _waveform_payload(args) -> dict:
    payload = {"kind": args.waveform, "duration": args.duration}
    if args.waveform == "ramp":
        if args.rate is None:
            raise UsageError("ramp waveform needs --rate")
        payload["rate"] = args.rate
    elif args.waveform == "sine":
        if args.amplitude is None or args.frequency is None:
            raise UsageError("sine waveform needs --amplitude and --frequency")
        payload["amplitude"] = args.amplitude
        payload["frequency"] = args.frequency
    else:
        if not args.breakpoints:
            raise UsageError("pwl waveform needs --breakpoints t:v,t:v,...")
        points = []
        for chunk in args.breakpoints.split(","):
            t_str, _, v_str = chunk.partition(":")
            points.append((float(t_str), float(v_str)))
        payload["breakpoints"] = points
    if args.duration is None:
        raise UsageError("waveform needs --duration")
    return payload


def cmd_simulate(args, client) -> int:
    out = _out_dir(args)
    settings = build_settings(_settings_from_args(args))
    payload = {
        "params": {"q_rst": args.q_rst, "phi_rst": args.phi_rst, "n": args.n},
        "waveform": _waveform_payload(args),
        "sim": _sim_payload(settings),
        "cycle_id": args.cycle_id,
    }
    result = _call(client, "/simulate", payload)
    (out / args.name).write_text(result["content"], encoding="utf-8")
    _write_manifest(out, args, [], settings.to_dict())
    print(f"simulated {result['samples']} samples -> {out / args.name}")
    return 0


def cmd_montecarlo(args, client) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    out = _out_dir(args)
    settings = build_settings(_settings_from_args(args))
    payload = {
        "means": [args.mean_phi, args.mean_q, args.mean_n],
        "count": args.count,
        "waveform": _waveform_payload(args),
        "sim": _sim_payload(settings),
    }
    if args.covariance:
        payload["covariance"] = json.loads(Path(args.covariance).read_text(encoding="utf-8"))
    else:
        payload["stds"] = [args.std_phi, args.std_q, args.std_n]
    result = _call(client, "/montecarlo", payload)
    (out / args.name).write_text(result["content"], encoding="utf-8")
    _write_manifest(out, args, [], settings.to_dict())
    print(f"simulated {result['cycles']} cycle(s) (seed {result['seed']}) -> {out / args.name}")
    return 0


def cmd_plot(args, client) -> int:
    out = _out_dir(args)
    settings = build_settings(_settings_from_args(args))
    payload: dict = {"kind": args.kind, "extraction": _extraction_payload(settings)}
    if args.kind in ("iv", "qphi", "norm"):
        inputs = _gather_inputs(args.inputs, ".csv")
        if len(inputs) != 1:
            raise UsageError(
                f"plot kind {args.kind!r} takes exactly one (possibly multi-cycle) CSV file"
            )
        payload["content"] = inputs[0].read_text(encoding="utf-8")
    elif args.kind in ("hist", "scatter", "params"):
        inputs = _gather_inputs(args.inputs, ".json")
        inputs = [p for p in inputs if p.name not in ("manifest.json", "summary.json", "failures.json")]
        records = _load_records(inputs)
        if args.kind == "hist":
            quantity = args.quantity or "q_rst"
            payload["values"] = [r[quantity] for r in records]
            payload["xlabel"] = f"{quantity} / mean"
            if args.bins:
                payload["bins"] = args.bins
        elif args.kind == "scatter":
            xq = args.x_quantity or "phi_rst"
            yq = args.y_quantity or "q_rst"
            payload["x"] = [r[xq] for r in records]
            payload["y"] = [r[yq] for r in records]
            payload["xlabel"] = xq
            payload["ylabel"] = yq
        else:
            for key in ("phi_rst", "q_rst", "n"):
                if any(key not in r for r in records):
                    raise UsageError("params plot needs fit records with phi_rst, q_rst and n")
                payload[key] = [r[key] for r in records]
    result = _call(client, "/plot", payload)
    name = args.name or f"plot_{args.kind}.svg"
    (out / name).write_text(result["svg"], encoding="utf-8")
    _write_manifest(out, args, inputs, settings.to_dict())
    print(f"wrote {out / name}")
    return 0


def cmd_serve(args, client=None) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--server", default=None, help="remote service URL (default: in-process)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key (repeatable)")


def _add_waveform(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--waveform", choices=("ramp", "sine", "pwl"), default="ramp")
    parser.add_argument("--rate", type=float, default=None, help="ramp rate in V/s")
    parser.add_argument("--amplitude", type=float, default=None, help="sine amplitude in V")
    parser.add_argument("--frequency", type=float, default=None, help="sine frequency in Hz")
    parser.add_argument("--breakpoints", default=None, help="pwl points as t:v,t:v,...")
    parser.add_argument("--duration", type=float, default=None, help="sweep duration in s")
    parser.add_argument("--dt", type=float, default=None, help="timestep in s (default: auto)")
    parser.add_argument("--noise", type=float, default=None,
                        help="relative charge noise (noise_sigma_q)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qphi",
        description="Charge-flux domain analysis of memristor reset sweeps",
    )
    parser.add_argument("--version", action="version", version=f"qphi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, validate and split raw trace files")
    p.add_argument("inputs", nargs="+", help="trace CSV files or directories")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="extract per-cycle reset points")
    p.add_argument("inputs", nargs="+", help="trace CSV files or directories")
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fit", help="extract and fit the three-parameter model per cycle")
    p.add_argument("inputs", nargs="+", help="trace CSV files or directories")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("stats", help="ensemble statistics over fit records")
    p.add_argument("inputs", nargs="+", help="fit record JSONs or directories")
    p.add_argument("--bins", type=int, default=None, help="histogram bin count")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("simulate", help="synthesize one reset sweep from model parameters")
    p.add_argument("--q-rst", type=float, required=True, dest="q_rst")
    p.add_argument("--phi-rst", type=float, required=True, dest="phi_rst")
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--cycle-id", type=int, default=0, dest="cycle_id")
    p.add_argument("--name", default="trace.csv", help="output CSV filename")
    _add_waveform(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", help="synthesize an ensemble of reset sweeps")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--mean-phi", type=float, required=True, dest="mean_phi")
    p.add_argument("--mean-q", type=float, required=True, dest="mean_q")
    p.add_argument("--mean-n", type=float, required=True, dest="mean_n")
    p.add_argument("--std-phi", type=float, default=0.0, dest="std_phi")
    p.add_argument("--std-q", type=float, default=0.0, dest="std_q")
    p.add_argument("--std-n", type=float, default=0.0, dest="std_n")
    p.add_argument("--covariance", default=None, help="JSON file with a 3x3 covariance")
    p.add_argument("--name", default="traces.csv", help="output CSV filename")
    _add_waveform(p)
    _add_common(p)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("plot", help="render deterministic SVG plots")
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p.add_argument("inputs", nargs="+", help="trace CSVs (iv/qphi/norm) or record JSONs")
    p.add_argument("--quantity", choices=QUANTITIES, default=None, help="histogram quantity")
    p.add_argument("--x-quantity", choices=QUANTITIES, default=None, dest="x_quantity")
    p.add_argument("--y-quantity", choices=QUANTITIES, default=None, dest="y_quantity")
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--name", default=None, help="output SVG filename")
    _add_common(p)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("serve", help="run the analysis service with uvicorn")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args)
        with make_client(getattr(args, "server", None)) as client:
            return args.func(args, client)
    except (UsageError, QphiError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
