"""Command-line entry point: ``macanon {plan,tables,anonymize,simulate,attack-surface}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import islice
from typing import IO, Iterator, Optional

from . import analytics
from .anonymizer import (
    SALT_ENV_VAR,
    AnonymizationPolicy,
    KdfParams,
    PolicyError,
    ResourceError,
    Salt,
    anonymize,
    concurrency_for_budget,
    set_kdf_concurrency,
)
from .mac import DEFAULT_RANGE, CapacityError, MacParseError, MacRange, parse_mac
from .simulator import SIMULATION_KDF, TABLE3_COUNTS, TrialConfig, generate_table3, run_experiment

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_STARTUP = 3
EXIT_PARTIAL = 4

log = logging.getLogger("macanon")


class StartupError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must be strictly between 0 and 1, got {v}")
    return v


def _fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {v}")
    return v


# ---------------------------------------------------------------- plan / tables

def cmd_plan(args: argparse.Namespace, out: IO[str]) -> int:
    result = analytics.plan(args.count, args.max_rate, args.semantics)
    if args.format == "json":
        out.write(json.dumps({
            "m": args.count, "max_rate": args.max_rate, "semantics": result.semantics,
            "bits": result.bits, "n": result.n, "predicted_rate": result.predicted_rate,
        }) + "\n")
        return EXIT_OK
    out.write(f"{result.bits} bits (n = 2^{result.bits} = {result.n:,} buckets)\n")
    if result.semantics == "overall-rate":
        pred = analytics.expected_collisions(args.count, result.n)
        out.write(f"predicted collision rate {analytics.format_pct(pred.p)} "
                  f"(about {pred.expected:,.1f} of {args.count:,} MACs share a bucket)\n")
    else:
        out.write(f"approximate probability of at least one collision "
                  f"{analytics.format_pct(result.predicted_rate)}\n")
    return EXIT_OK


def cmd_tables(args: argparse.Namespace, out: IO[str]) -> int:
    which = (1, 2) if args.which == "both" else (int(args.which),)
    for i, w in enumerate(which):
        table = analytics.generate_table(w)
        if args.format == "csv":
            out.write(table.to_csv())
        else:
            if i:
                out.write("\n")
            title = ("at-least-one collision, birthday approximation" if w == 1
                     else "overall collision rate, exact")
            out.write(f"Table {w}: minimum digest bits ({title})\n")
            out.write(table.to_text())
    return EXIT_OK


def cmd_attack_surface(args: argparse.Namespace, out: IO[str]) -> int:
    if args.prefixes is not None:
        bits = analytics.coverage_bits(args.prefixes)
        out.write(f"{bits} bits: {args.prefixes:,} OUI prefixes x 2^24 NICs\n")
    else:
        bits = analytics.allocated_space_bits(args.fraction)
        out.write(f"{bits} bits: all NICs under {args.fraction:g} of the OUI space\n")
    if args.bits is not None:
        if args.bits < bits:
            out.write(f"a {args.bits}-bit digest is below this {bits}-bit search space; "
                      f"each bucket holds about 2^{bits - args.bits} candidate MACs\n")
        else:
            out.write(f"a {args.bits}-bit digest is not below this {bits}-bit search space; "
                      f"buckets may single out individual MACs\n")
    return EXIT_OK


# ------------------------------------------------------------------ anonymize

@dataclass
class ToolConfig:
    kdf: KdfParams = field(default_factory=KdfParams)
    digest_bits: int = 24
    salt: Optional[Salt] = None
    extra_entropy: bytes = b""
    input_format: str = "lines"
    mac_column: str = "mac"
    output_format: str = "jsonl"

    def policy(self) -> AnonymizationPolicy:
        return AnonymizationPolicy(self.kdf, self.salt, self.digest_bits, self.extra_entropy)


_KDF_KEYS = ("algorithm", "memory_cost", "time_cost", "parallelism", "output_length")


def resolve_config(args: argparse.Namespace, environ=os.environ) -> ToolConfig:
    """Merge defaults, environment, config file and flags (later wins)."""
    file_cfg: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise StartupError(f"cannot read config file: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise StartupError("config file must hold a JSON object")

    def pick(key, default=None):
        flag = getattr(args, key, None)
        if flag is not None:
            return flag
        return file_cfg.get(key, default)

    try:
        kdf = KdfParams(**{k: pick(k, getattr(KdfParams, k)) for k in _KDF_KEYS})
        allow_short = bool(pick("allow_short_salt", False))
        if args.salt_file or args.salt_hex:
            salt = _load_salt(args.salt_file, args.salt_hex, allow_short)
        elif file_cfg.get("salt_file") or file_cfg.get("salt_hex"):
            salt = _load_salt(file_cfg.get("salt_file"), file_cfg.get("salt_hex"), allow_short)
        elif environ.get(SALT_ENV_VAR):
            salt = Salt.from_hex(environ[SALT_ENV_VAR], allow_short=allow_short)
        else:
            raise StartupError(f"no salt: pass --salt-file/--salt-hex, set salt_file in the config "
                               f"or export {SALT_ENV_VAR}")
        extra = pick("extra_entropy", "")
        cfg = ToolConfig(
            kdf=kdf,
            digest_bits=int(pick("digest_bits", 24)),
            salt=salt,
            extra_entropy=extra.encode("utf-8") if isinstance(extra, str) else bytes(extra),
            input_format=pick("input_format", "lines"),
            mac_column=pick("mac_column", "mac"),
            output_format=pick("output_format", "jsonl"),
        )
        cfg.policy()
    except (PolicyError, TypeError, ValueError) as exc:
        raise StartupError(str(exc)) from exc
    except OSError as exc:
        raise StartupError(f"cannot read salt: {exc}") from exc
    if cfg.input_format not in ("lines", "csv"):
        raise StartupError(f"unknown input format {cfg.input_format!r}")
    if cfg.output_format not in ("jsonl", "csv"):
        raise StartupError(f"unknown output format {cfg.output_format!r}")
    return cfg


def _load_salt(path, hex_text, allow_short) -> Salt:
    if path:
        return Salt.from_file(path, allow_short=allow_short)
    return Salt.from_hex(hex_text, allow_short=allow_short)


@dataclass
class StreamStats:
    ok: int = 0
    failed: int = 0


def _records(stream: IO[str], cfg: ToolConfig) -> tuple[list[str], Iterator[tuple[int, str, dict]]]:
    """Header field names and an iterator of ``(record_no, mac_text, passthrough)``."""
    if cfg.input_format == "lines":
        def gen():
            for no, line in enumerate(stream, 1):
                text = line.strip()
                if text:
                    yield no, text, {}
        return [], gen()

    reader = csv.DictReader(stream)
    fields = reader.fieldnames or []
    if cfg.mac_column not in fields:
        raise StartupError(f"CSV input has no column {cfg.mac_column!r}")

    def gen():
        for no, row in enumerate(reader, 1):
            mac = row.pop(cfg.mac_column)
            extra = row.pop(None, None)
            if extra is not None or mac is None or None in row.values():
                yield no, None, {}
                continue
            yield no, mac, row
    return fields, gen()


def anonymize_stream(instream: IO[str], outstream: IO[str], cfg: ToolConfig,
                     errstream: IO[str] = sys.stderr, workers: int = 1, batch_size: int = 256) -> StreamStats:
    """Replace each record's MAC with its bucket, one bounded batch at a time, in input order."""
    policy = cfg.policy()
    fields, records = _records(instream, cfg)
    stats = StreamStats()

    if cfg.output_format == "csv":
        header = fields if cfg.input_format == "csv" else ["bucket", "bits"]
        writer = csv.writer(outstream, lineterminator="\n")
        writer.writerow(header)

    def emit(bucket, passthrough):
        if cfg.output_format == "jsonl":
            obj = {"bucket": bucket.hex(), "bits": bucket.bits}
            for k, v in passthrough.items():
                obj.setdefault(k, v)
            outstream.write(json.dumps(obj) + "\n")
        elif cfg.input_format == "csv":
            writer.writerow([bucket.hex() if f == cfg.mac_column else passthrough.get(f, "") for f in fields])
        else:
            writer.writerow([bucket.hex(), bucket.bits])

    def hash_one(item):
        no, text, passthrough = item
        if text is None:
            return no, None, passthrough, "wrong number of fields"
        try:
            return no, anonymize(parse_mac(text), policy), passthrough, None
        except MacParseError:
            return no, None, passthrough, "malformed MAC address"

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while True:
            batch = list(islice(records, batch_size))
            if not batch:
                break
            results = pool.map(hash_one, batch) if pool else map(hash_one, batch)
            for no, bucket, passthrough, err in results:
                if err is None:
                    emit(bucket, passthrough)
                    stats.ok += 1
                else:
                    stats.failed += 1
                    errstream.write(f"record {no}: {err}\n")
    finally:
        if pool:
            pool.shutdown()
    return stats


def cmd_anonymize(args: argparse.Namespace, out: IO[str], err: IO[str]) -> int:
    try:
        cfg = resolve_config(args)
        if args.memory_budget is not None:
            set_kdf_concurrency(concurrency_for_budget(args.memory_budget * 1024, cfg.kdf))
        instream = open(args.input, encoding="utf-8", newline="") if args.input != "-" else sys.stdin
    except (StartupError, OSError) as exc:
        err.write(f"macanon: startup error: {exc}\n")
        return EXIT_STARTUP
    try:
        stats = anonymize_stream(instream, out, cfg, err, workers=args.workers)
    except StartupError as exc:
        err.write(f"macanon: startup error: {exc}\n")
        return EXIT_STARTUP
    except ResourceError as exc:
        err.write(f"macanon: {exc}\n")
        return EXIT_STARTUP
    finally:
        if instream is not sys.stdin:
            instream.close()
    log.info("anonymized %d records, %d failed", stats.ok, stats.failed)
    return EXIT_PARTIAL if stats.failed else EXIT_OK


# ------------------------------------------------------------------- simulate

def cmd_simulate(args: argparse.Namespace, out: IO[str], err: IO[str]) -> int:
    kdf = SIMULATION_KDF
    if args.memory_cost or args.time_cost:
        kdf = KdfParams(memory_cost=args.memory_cost or kdf.memory_cost, time_cost=args.time_cost or kdf.time_cost)
    if args.table3:
        counts = TABLE3_COUNTS if args.include_100k else TABLE3_COUNTS[:-1]
        table = generate_table3(args.rounds, args.hash, counts=counts, base_seed=args.seed,
                                workers=args.workers, kdf=kdf)
        if args.format == "jsonl":
            out.write(table.to_jsonl(args.include_rounds))
        elif args.format == "csv":
            out.write(table.to_csv())
        else:
            out.write(table.to_text())
        return EXIT_OK

    try:
        mac_range = MacRange.parse(args.range) if args.range else DEFAULT_RANGE
        config = TrialConfig(m=args.count, digest_bits=args.bits, rounds=args.rounds, base_seed=args.seed,
                             hash_mode=args.hash, mac_range=mac_range, kdf=kdf)
    except CapacityError as exc:
        err.write(f"macanon: capacity error: {exc}\n")
        return EXIT_USAGE
    except ValueError as exc:
        err.write(f"macanon: {exc}\n")
        return EXIT_USAGE
    report = run_experiment(config, workers=args.workers)
    if args.format == "jsonl":
        out.write(json.dumps(report.to_dict(args.include_rounds)) + "\n")
    elif args.format == "csv":
        d = report.to_dict()
        out.write("n_bits,m,median_pct,mean_pct,duplicate_median_pct\n")
        out.write(f"{d['n_bits']},{d['m']},{d['median_pct']:.1f},{d['mean_pct']:.3f},{d['duplicate_median_pct']:.1f}\n")
    else:
        predicted = analytics.collision_rate(config.m, 1 << config.digest_bits)
        out.write(
            f"m={config.m:,} n=2^{config.digest_bits} rounds={config.rounds} hash={config.hash_mode}\n"
            f"median {analytics.format_pct(report.median_rate)}  "
            f"mean {100 * report.mean_rate:.3f}%  "
            f"duplicate median {analytics.format_pct(report.duplicate_median_rate)}  "
            f"predicted {100 * predicted:.3f}%\n"
        )
    return EXIT_OK


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="macanon", description="Keyed, truncated MAC address anonymization and collision planning.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="choose a digest width for a dataset size")
    p.add_argument("--count", type=_positive_int, required=True, help="number of unique MACs (m)")
    p.add_argument("--max-rate", type=_probability, required=True, help="tolerable collision rate or probability")
    p.add_argument("--semantics", choices=("overall-rate", "at-least-one"), default="overall-rate")
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("tables", help="print the digest-width tables")
    p.add_argument("--which", choices=("1", "2", "both"), default="both")
    p.add_argument("--format", choices=("text", "csv"), default="text")

    p = sub.add_parser("anonymize", help="replace MACs in a stream with bucket identifiers")
    p.add_argument("input", nargs="?", default="-", help="input file (default stdin)")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--salt-file", help="raw or hex salt file")
    p.add_argument("--salt-hex", help="salt as hex (prefer the file or environment)")
    p.add_argument("--allow-short-salt", action="store_true", default=None, help="accept 8-15 byte salts")
    p.add_argument("--extra-entropy", help="deployment identifier mixed into the salt")
    p.add_argument("--bits", dest="digest_bits", type=int, help="digest width in bits (default 24)")
    p.add_argument("--algorithm", choices=("argon2d", "argon2i", "argon2id"))
    p.add_argument("--memory-cost", type=_positive_int, help="KDF memory in KiB")
    p.add_argument("--time-cost", type=_positive_int, help="KDF passes")
    p.add_argument("--parallelism", type=_positive_int, help="KDF lanes")
    p.add_argument("--output-length", type=_positive_int, help="KDF output bytes")
    p.add_argument("--input-format", choices=("lines", "csv"))
    p.add_argument("--mac-column", help="CSV column holding the MAC (default mac)")
    p.add_argument("--output-format", choices=("jsonl", "csv"))
    p.add_argument("--workers", type=_positive_int, default=1, help="concurrent KDF calls")
    p.add_argument("--memory-budget", type=_positive_int, help="cap concurrent KDF calls to fit this many MiB")

    p = sub.add_parser("simulate", help="Monte Carlo collision measurement")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--count", type=_positive_int, help="unique MACs per round (m)")
    g.add_argument("--table3", action="store_true", help="run the full 2^13..2^21 grid")
    p.add_argument("--bits", type=int, help="digest width (required with --count)")
    p.add_argument("--rounds", type=_positive_int, default=100)
    p.add_argument("--hash", choices=("fast", "kdf"), default="fast")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--range", help="MAC range START..END (default 00:16:3e:00:00:00..00:16:3e:7f:ff:ff)")
    p.add_argument("--memory-cost", type=_positive_int, help="KDF memory in KiB for --hash kdf")
    p.add_argument("--time-cost", type=_positive_int, help="KDF passes for --hash kdf")
    p.add_argument("--include-100k", action="store_true", help="add the m=100,000 column to --table3")
    p.add_argument("--format", choices=("text", "csv", "jsonl"), default="text")
    p.add_argument("--include-rounds", action="store_true", help="per-round counts in jsonl output")

    p = sub.add_parser("attack-surface", help="bits needed to enumerate likely MACs")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--prefixes", type=_positive_int, help="number of OUI prefixes in play")
    g.add_argument("--fraction", type=_fraction, help="allocated share of the OUI space")
    p.add_argument("--bits", type=_positive_int, help="planned digest width to compare against")
    return parser


def main(argv: Optional[list[str]] = None, stdout: IO[str] = None, stderr: IO[str] = None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = logging.StreamHandler(err)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return _dispatch(args, out, err)
    finally:
        log.removeHandler(handler)


def _dispatch(args: argparse.Namespace, out: IO[str], err: IO[str]) -> int:
    if args.command == "simulate" and args.count is not None and args.bits is None:
        err.write("macanon simulate: error: --bits is required with --count\n")
        return EXIT_USAGE
    if args.command == "plan" and args.semantics == "overall-rate" and args.count < 2:
        err.write("macanon plan: error: --count must be >= 2 for a collision rate\n")
        return EXIT_USAGE
    if args.command == "plan":
        return cmd_plan(args, out)
    if args.command == "tables":
        return cmd_tables(args, out)
    if args.command == "attack-surface":
        return cmd_attack_surface(args, out)
    if args.command == "anonymize":
        return cmd_anonymize(args, out, err)
    return cmd_simulate(args, out, err)


if __name__ == "__main__":
    sys.exit(main())
