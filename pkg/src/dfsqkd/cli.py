"""Command-line entry point: ``dfsqkd <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .adversary import (
    AttackScheme,
    InterceptResendStrategy,
    reduction_equivalence_check,
)
from .config import SWEEPABLE, load_config, set_parameter
from .quantum import ValidationError
from .session import (
    CSV_COLUMNS,
    SessionConfig,
    SessionTranscript,
    aggregate,
    aggregate_row,
    run_baseline_bb84,
    run_session,
    with_seed,
)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_ABORT = 0, 1, 2, 3

SWEEP_COLUMNS = ("parameter", "value") + CSV_COLUMNS + ("sessions", "aborts", "error_rate_se", "key_rate_se")
REDUCTION_COLUMNS = ("attack", "protocol", "ancilla_qubits", "equivalent", "max_deviation")
LAB_ATTACKS = ("intercept-z", "intercept-x", "intercept-random", "fig2-blocking")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def emit_csv(rows: Iterable[dict], columns: Sequence[str] = CSV_COLUMNS, metadata: dict | None = None) -> str:
    """Header plus one line per row; metadata goes first as ``# key=value`` lines."""
    buf = io.StringIO()
    if metadata:
        for key, value in metadata.items():
            buf.write(f"# {key}={json.dumps(value, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, float) and obj != obj:
        return None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def emit_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=1) + "\n"


def _metadata(subcommand: str, config: SessionConfig, sessions: int, **extra) -> dict:
    return {
        "tool": "dfsqkd",
        "version": __version__,
        "subcommand": subcommand,
        "config": config.as_dict(),
        "sessions": sessions,
        "seed_schedule": [config.seed + i for i in range(sessions)],
        **extra,
    }


def _run_one(args: tuple[SessionConfig, bool]) -> SessionTranscript:
    config, baseline = args
    return run_baseline_bb84(config) if baseline else run_session(config)


def run_campaign(config: SessionConfig, sessions: int, baseline: bool, workers: int = 1) -> list[SessionTranscript]:
    """Sessions on seeds seed, seed+1, ...; results in seed order whatever ``workers`` is."""
    jobs = [(with_seed(config, config.seed + i), baseline) for i in range(sessions)]
    if workers > 1 and sessions > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def sweep(
    config: SessionConfig, parameter: str, values: Sequence, sessions: int = 1,
    baseline: bool = False, workers: int = 1,
) -> list[dict]:
    """One aggregated row per value, every value using the same seed schedule."""
    if parameter not in SWEEPABLE:
        raise ValidationError(f"unknown sweep parameter {parameter!r}; choose from {sorted(SWEEPABLE)}")
    rows = []
    for value in values:
        cfg = set_parameter(config, parameter, value)
        summary = aggregate(run_campaign(cfg, sessions, baseline, workers))
        rows.append({"parameter": parameter, "value": SWEEPABLE[parameter](value), **aggregate_row(summary)})
    return rows


def reduction_rows(count: int, seed: int, protocols: Sequence[int] = (1, 2)) -> list[dict]:
    """Identity, the intercept-resend presets and ``count`` seeded random unitary attacks."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(99,)))
    attacks: list = [AttackScheme.identity()] + [InterceptResendStrategy(b) for b in ("Z", "X", "random")]
    attacks += [AttackScheme.random(rng, i % 3, f"random-{i}") for i in range(count)]
    rows = []
    for attack in attacks:
        for protocol in protocols:
            report = reduction_equivalence_check(attack, protocol)
            rows.append({
                "attack": attack.name,
                "protocol": protocol,
                "ancilla_qubits": getattr(attack, "ancilla_qubits", 0),
                "equivalent": report.equivalent,
                "max_deviation": report.max_deviation,
            })
    return rows


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults are used when omitted)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--sessions", type=int, default=1, help="number of seeds to run (0 gives an empty campaign)")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--fail-on-abort", action="store_true", help="exit 3 if any session aborts")

    parser = _Parser(prog="dfsqkd", description="Decoherence-free-subspace QKD simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the configured coded protocol")
    sub.add_parser("baseline", parents=[common], help="run plain BB84 over the configured channel")
    lab = sub.add_parser("attack-lab", parents=[common], help="run a named attack preset")
    lab.add_argument("--attack", choices=LAB_ATTACKS, required=True)
    red = sub.add_parser("reduction-check", parents=[common], help="check the encode/attack/decode reduction")
    red.add_argument("--attacks", type=int, default=10, help="number of random unitary attacks")
    sw = sub.add_parser("sweep", parents=[common], help="sweep one numeric config field")
    sw.add_argument("--param", required=True, choices=sorted(SWEEPABLE))
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--baseline", action="store_true", help="sweep plain BB84 instead")
    return parser


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="") as fh:
        fh.write(text)


def _session_output(subcommand: str, config: SessionConfig, transcripts, fmt: str) -> str:
    meta = _metadata(subcommand, config, len(transcripts))
    if fmt == "json":
        return emit_json({"metadata": meta, "sessions": [t.as_dict() for t in transcripts]})
    return emit_csv((t.row() for t in transcripts), CSV_COLUMNS, meta)


def _dispatch(args) -> tuple[str, bool]:
    if args.sessions < 0 or args.workers < 1:
        raise ValidationError("--sessions must be >= 0 and --workers >= 1")
    if args.sessions == 0 and args.command == "sweep":
        raise ValidationError("sweep needs --sessions >= 1")
    config = load_config(args.config, args.seed)
    cmd = args.command
    if cmd in ("run", "baseline", "attack-lab"):
        baseline = cmd == "baseline"
        if cmd == "attack-lab":
            config = replace(config, attack=args.attack)
            baseline = args.attack == "fig2-blocking"
        transcripts = run_campaign(config, args.sessions, baseline, args.workers)
        return _session_output(cmd, config, transcripts, args.format), any(t.aborted for t in transcripts)
    if cmd == "reduction-check":
        if args.attacks < 0:
            raise ValidationError("--attacks must be >= 0")
        rows = reduction_rows(args.attacks, config.seed)
        meta = _metadata(cmd, config, 0, random_attacks=args.attacks)
        if args.format == "json":
            return emit_json({"metadata": meta, "rows": rows}), False
        return emit_csv(rows, REDUCTION_COLUMNS, meta), False
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    try:
        values = [SWEEPABLE[args.param](float(v)) for v in values]
    except ValueError:
        raise ValidationError(f"--values must be numbers, got {args.values!r}") from None
    rows = sweep(config, args.param, values, args.sessions, args.baseline, args.workers)
    meta = _metadata(cmd, config, args.sessions, parameter=args.param, values=values, baseline=args.baseline)
    if args.format == "json":
        return emit_json({"metadata": meta, "rows": rows}), any(r["aborts"] for r in rows)
    return emit_csv(rows, SWEEP_COLUMNS, meta), any(r["aborts"] for r in rows)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    try:
        text, aborted = _dispatch(args)
        _write(text, args.out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: cannot write {exc.filename or args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if aborted and args.fail_on_abort:
        return EXIT_ABORT
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
