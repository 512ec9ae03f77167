"""plugwatch command line: scenario runner, canned standby demo, offline energy query.

Exit codes: 0 success, 1 validation error (bad arguments or scenario/input
files), 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .channel import ChannelMode
from .scenario import ScenarioError, load_scenario
from .servercore import energy_from_readings
from .simrun import SimulationRunner, demo_standby
from .storage import load_history, parse_timestamp

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argument problems are validation errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _parse_bind(addr: str) -> tuple[str, int]:
    host, sep, port_text = addr.rpartition(":")
    if not sep or not host:
        raise ValueError(f"expected host:port, got {addr!r}")
    return host, int(port_text)


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError:
        print(f"error: scenario file not found: {args.scenario}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.mode is not None:
        scenario.mode = ChannelMode(args.mode)

    runner = SimulationRunner(scenario, out_path=args.out)
    gateway_thread = None
    if args.serve is not None:
        from .gateway import GatewayThread

        try:
            host, port = _parse_bind(args.serve)
        except ValueError as exc:
            print(f"error: --serve {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        gateway_thread = GatewayThread(runner.server, host, port)
        gateway_thread.start()
        print(f"gateway listening on http://{host}:{port}")
    try:
        stats = runner.run(speed_factor=args.speed)
    finally:
        if gateway_thread is not None:
            gateway_thread.stop()
        runner.close()
    if args.stats is not None:
        Path(args.stats).write_text(
            runner.channel.stats.to_csv(runner.channel.config.mode), encoding="utf-8")
    for line in stats.summary_lines():
        print(line)
    return EXIT_OK


def _cmd_demo_standby(args: argparse.Namespace) -> int:
    if args.k < 1:
        print("error: --k must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    report = demo_standby(k=args.k, out_path=args.out)
    for line in report.timeline_lines():
        print(line)
    if report.store_path is not None:
        print(f"store: {report.store_path}")
    return EXIT_OK


def _cmd_energy(args: argparse.Namespace) -> int:
    path = Path(args.csv)
    if not path.exists():
        print(f"error: no such file: {path}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        start = parse_timestamp(args.start)
        end = parse_timestamp(args.end)
    except ValueError:
        print("error: timestamps must look like 2024-01-01T00:00:00Z", file=sys.stderr)
        return EXIT_VALIDATION
    if start > end:
        print("error: start must be <= end", file=sys.stderr)
        return EXIT_VALIDATION
    if args.price is not None and args.price < 0:
        print("error: price must be >= 0", file=sys.stderr)
        return EXIT_VALIDATION

    rows, skipped = load_history(path)
    if skipped:
        print(f"warning: skipped {skipped} malformed row(s)", file=sys.stderr)
    result = energy_from_readings(rows, start, end, price_per_kwh=args.price)
    print(f"{result.kwh:.4f} kWh")
    if result.cost is not None:
        print(f"cost {result.cost:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plugwatch",
                     description="Simulated wireless energy monitoring network.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("--scenario", required=True, help="scenario file path")
    run.add_argument("--speed", type=float, default=0.0,
                     help="simulated seconds per wall second (0 = flat out)")
    run.add_argument("--mode", choices=[m.value for m in ChannelMode], default=None,
                     help="override the scenario's channel mode")
    run.add_argument("--serve", metavar="HOST:PORT", default=None,
                     help="serve the HTTP gateway while running")
    run.add_argument("--out", default="readings.csv", help="reading store path")
    run.add_argument("--stats", default=None, help="write link stats CSV here")
    run.set_defaults(func=_cmd_run)

    demo = sub.add_parser("demo-standby", help="reproduce the standby shutoff demo")
    demo.add_argument("--k", type=int, default=5,
                      help="consecutive below-threshold readings before shutoff")
    demo.add_argument("--out", default=None, help="optional reading store path")
    demo.set_defaults(func=_cmd_demo_standby)

    energy = sub.add_parser("energy", help="offline energy/cost over a period")
    energy.add_argument("--csv", required=True, help="reading store to query")
    energy.add_argument("--start", required=True, help="window start (ISO UTC)")
    energy.add_argument("--end", required=True, help="window end (ISO UTC)")
    energy.add_argument("--price", type=float, default=None, help="price per kWh")
    energy.set_defaults(func=_cmd_energy)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - surface as the runtime exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
