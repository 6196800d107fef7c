"""Command-line front end.

    proofloc run --config scenario.toml [--seed N] [--events] [--out PATH]
    proofloc attacks [--seeds N] [--out PATH]
    proofloc vectors [--out PATH]

Standard output carries JSON lines only; human-readable tables and
diagnostics go to standard error. Exit codes: 0 ok, 1 safety violation,
2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from dataclasses import replace
from typing import Iterator, Optional, Sequence, TextIO

from .sim import ConfigError, Simulation, load_config
from .sim.report import SCHEMA_VERSION
from .sim.scenarios import FAMILIES, SAFETY_FAMILIES, attack_config
from .vectors import golden_vectors

EXIT_OK = 0
EXIT_UNSAFE = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors already; keep it that way for `error`
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(out: TextIO, record: dict) -> None:
    out.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


@contextmanager
def _output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed).validate()
        if args.events:
            cfg = replace(cfg, record_events=True)
    except ConfigError as exc:
        print(f"config error in field '{exc.field}': {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = Simulation(cfg).run()
    try:
        with _output(args.out) as out:
            for ev in report.events or ():
                _emit(out, {"schema_version": SCHEMA_VERSION, **ev})
            out.write(report.to_json() + "\n")
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def _family_ok(family: str, report) -> bool:
    if family in SAFETY_FAMILIES:
        return report.fake_proofs_confirmed == 0
    if family == "Collusion(d)":
        return (
            report.adversary_stats.get("genuine_accepted", 0) > 0
            and report.attack_verdicts.get("CollusionSuspect", 0) > 0
        )
    return True


def cmd_attacks(args: argparse.Namespace) -> int:
    if args.seeds < 1:
        print("--seeds must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    overrides = {} if not args.disable_range_check else {"check_range": False}
    failures: list[tuple[str, int]] = []
    rows = []
    try:
        with _output(args.out) as out:
            for family in FAMILIES:
                fake = runs = bad = 0
                verdicts: dict[str, int] = {}
                for seed in range(args.seeds):
                    report = Simulation(attack_config(family, seed, **overrides)).run()
                    runs += 1
                    fake += report.fake_proofs_confirmed
                    for k, v in report.attack_verdicts.items():
                        verdicts[k] = verdicts.get(k, 0) + v
                    if not _family_ok(family, report):
                        bad += 1
                        failures.append((family, seed))
                rows.append((family, runs, fake, bad))
                _emit(out, {
                    "record": "attack_summary", "schema_version": SCHEMA_VERSION,
                    "family": family, "runs": runs, "fake_proofs_confirmed": fake,
                    "failed_runs": bad, "verdicts": dict(sorted(verdicts.items())),
                })
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{'family':<20}{'runs':>6}{'fake':>6}{'failed':>8}", file=sys.stderr)
    for family, runs, fake, bad in rows:
        print(f"{family:<20}{runs:>6}{fake:>6}{bad:>8}", file=sys.stderr)
    for family, seed in failures:
        print(f"SAFETY VIOLATION: {family} seed={seed}", file=sys.stderr)
    return EXIT_UNSAFE if failures else EXIT_OK


def cmd_vectors(args: argparse.Namespace) -> int:
    try:
        with _output(args.out) as out:
            for name, value in golden_vectors().items():
                _emit(out, {"record": "vector", "schema_version": SCHEMA_VERSION,
                            "name": name, "hex": value, "length": len(value) // 2})
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proofloc", description="Proof-of-location ledger simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run one scenario from a TOML config")
    p_run.add_argument("--config", required=True, metavar="PATH")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--events", action="store_true", help="stream event records before the report")
    p_run.add_argument("--out", metavar="PATH", help="write JSON lines here instead of stdout")
    p_run.set_defaults(func=cmd_run)

    p_att = sub.add_parser("attacks", help="run the attack regression sweep")
    p_att.add_argument("--seeds", type=int, default=10, help="seeds per family (default 10)")
    p_att.add_argument("--out", metavar="PATH")
    # mutation hook for tests: the sweep must notice when range checks vanish
    p_att.add_argument("--disable-range-check", action="store_true", help=argparse.SUPPRESS)
    p_att.set_defaults(func=cmd_attacks)

    p_vec = sub.add_parser("vectors", help="print golden encoding vectors")
    p_vec.add_argument("--out", metavar="PATH")
    p_vec.set_defaults(func=cmd_vectors)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
