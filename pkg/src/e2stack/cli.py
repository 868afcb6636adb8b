"""``kpm-monitor`` command line.

Exit codes: 0 success, 1 failure (codec error, misaligned bins, scenario
failure), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import enum
import logging
import sys
import time

from . import e2ap, kpm
from .monitor import (
    ComparisonError,
    ConfigError,
    compare_series,
    load_config,
    read_series,
    run_scenario,
)
from .net import ScenarioError
from .per import CodecError, from_hex, to_hex
from .traces import PROFILES, TraceError, generate_trace

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# type flag -> (decode, encode)
DECODERS = {
    "event-trigger": (kpm.decode_event_trigger, kpm.encode_event_trigger),
    "action": (kpm.decode_action_definition, kpm.encode_action_definition),
    "ranfdef": (kpm.decode_ran_function_definition, kpm.encode_ran_function_definition),
    "ind-header": (kpm.decode_indication_header, kpm.encode_indication_header),
    "ind-message": (kpm.decode_indication_message, kpm.encode_indication_message),
    "e2ap-frame": (e2ap.parse, e2ap.frame),
}


def render(value, indent: int = 0) -> list[str]:
    """Indented ``name: value`` lines for dataclasses, sequences and scalars."""
    pad = "  " * indent
    if dataclasses.is_dataclass(value):
        lines = [f"{pad}{type(value).__name__}"]
        for f in dataclasses.fields(value):
            lines += _render_field(f.name, getattr(value, f.name), indent + 1)
        return lines
    return [f"{pad}{_scalar(value)}"]


def _render_field(name, value, indent):
    pad = "  " * indent
    if dataclasses.is_dataclass(value):
        return [f"{pad}{name}: {type(value).__name__}"] + [
            line for f in dataclasses.fields(value)
            for line in _render_field(f.name, getattr(value, f.name), indent + 1)]
    if isinstance(value, (list, tuple)):
        if not value:
            return [f"{pad}{name}: []"]
        if all(not dataclasses.is_dataclass(v) for v in value):
            return [f"{pad}{name}: [{', '.join(_scalar(v) for v in value)}]"]
        lines = [f"{pad}{name}:"]
        for i, v in enumerate(value):
            lines += _render_field(f"- [{i}]", v, indent + 1)
        return lines
    return [f"{pad}{name}: {_scalar(value)}"]


def _scalar(v) -> str:
    if isinstance(v, (bytes, bytearray)):
        return to_hex(v) if v else '""'
    if isinstance(v, enum.Enum):
        return v.name
    if v is None:
        return "no_value"
    if isinstance(v, str):
        return repr(v) if not v or v != v.strip() or "," in v else v
    return repr(v)


def cmd_decode(args) -> int:
    decode, encode = DECODERS[args.type]
    try:
        data = from_hex("".join(args.hex.split()))
        value = decode(data)
    except CodecError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print("\n".join(render(value)))
    if args.verify:
        again = encode(value)
        if again != data:
            print(f"verify: MISMATCH re-encoded {to_hex(again)}", file=sys.stderr)
            return EXIT_FAIL
        print(f"verify: OK {to_hex(again)}")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        report = compare_series(read_series(args.app_csv), read_series(args.kpm_csv))
    except (ComparisonError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = report.render()
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    try:
        trace = generate_trace(args.profile, args.duration, args.rate, args.payload,
                               ues=args.ues, seed=args.seed)
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out == "-":
        sys.stdout.write(trace.to_csv())
    else:
        trace.write_csv(args.out)
        print(f"wrote {len(trace)} rows to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    started = time.perf_counter()
    try:
        result = run_scenario(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, ComparisonError) as exc:
        print(f"scenario failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    elapsed = time.perf_counter() - started
    print(f"indications: {len(result.indications)}  bins: {len(result.kpm)}  "
          f"mean_rel_offset: {result.report.mean_rel_offset:+.4%}  "
          f"({elapsed:.2f} s) -> {config.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kpm-monitor", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario from a key=value config file")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("decode", help="decode an uppercase/lowercase hex payload")
    d.add_argument("--type", required=True, choices=sorted(DECODERS))
    d.add_argument("--verify", action="store_true", help="re-encode and compare bytes")
    d.add_argument("hex")
    d.set_defaults(func=cmd_decode)

    c = sub.add_parser("compare", help="per-bin offsets of kpm.csv against app.csv")
    c.add_argument("app_csv")
    c.add_argument("kpm_csv")
    c.add_argument("--out", help="also write the report here")
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("gen-trace", help="synthesize a traffic trace CSV")
    g.add_argument("--profile", default="constant", choices=PROFILES)
    g.add_argument("--duration", type=int, default=20, help="seconds")
    g.add_argument("--rate", type=float, default=10.0, help="Mbps (constant profiles)")
    g.add_argument("--payload", type=int, default=1400, help="bytes per packet")
    g.add_argument("--ues", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
