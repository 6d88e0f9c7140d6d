"""
QRG Sniffing Simulator - CLI
============================
Subcommands:
  curves    mutual information vs error rate, CSV on stdout or --out
  attack    issue, sniff, crack, counterfeit
  table1    minimal sniffed pairs per hash function over seeded trials
  defense   recovery success with the pair budget capped
  events    Monte Carlo elimination-event frequencies vs closed form
  serve     run the bank verification service
  transact  pay with every card through an honest or compromised terminal
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from app.config import RunConfig
from app.harness import simulate


logger = logging.getLogger(__name__)


# Flag name -> RunConfig field. Flags default to None so config file and
# built-in defaults show through.
CONFIG_FLAGS = {
    "seed": int,
    "log_level": str,
    "fidelity": float,
    "success_prob": float,
    "strategy": str,
    "sniff_fraction": float,
    "hash": str,
    "salt": str,
    "salt_digits": int,
    "keystream_len": int,
    "pairs_per_token": int,
    "serials": int,
    "error_threshold": float,
    "loss_threshold": float,
    "database_url": str,
    "z": float,
    "prune_every": int,
    "keep": float,
    "max_pairs": int,
    "workers": int,
    "trials": int,
    "out": Path,
    "listen": str,
    "connect": str,
}

SWITCHES = ["post_select", "mark_spent", "count_four", "generalized"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="flat key=value config file")
    for name, kind in CONFIG_FLAGS.items():
        common.add_argument(f"--{name.replace('_', '-')}", type=kind, default=None, dest=name)
    for name in SWITCHES:
        common.add_argument(
            f"--{name.replace('_', '-')}", action=argparse.BooleanOptionalAction, default=None, dest=name
        )

    parser = argparse.ArgumentParser(prog="qrg", description="QRG quantum-token sniffing simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    curves = sub.add_parser("curves", parents=[common], help="information vs error-rate curve")
    curves.add_argument("--conditional", action="store_true", help="condition on both qubits cloned")
    curves.add_argument("--points", type=int, default=51)

    sub.add_parser("attack", parents=[common], help="end-to-end sniffing attack")
    sub.add_parser("table1", parents=[common], help="minimal pairs per hash function")

    defense = sub.add_parser("defense", parents=[common], help="success rate under a pair budget")
    defense.add_argument("--budget", type=int, default=1000)

    events = sub.add_parser("events", parents=[common], help="elimination-event statistics")
    events.add_argument("--pairs", type=int, default=1_000_000)

    sub.add_parser("serve", parents=[common], help="run the bank service")

    transact = sub.add_parser("transact", parents=[common], help="drive terminal sessions")
    transact.add_argument("--honest", action="store_true")

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {name: getattr(args, name) for name in [*CONFIG_FLAGS, *SWITCHES]}
    return RunConfig.load(args.config, **overrides)


# ── Commands ──────────────────────────────────────────────────────────────────

def cmd_curves(config: RunConfig, args: argparse.Namespace) -> int:
    if config.out is None:
        rows = simulate.run_curves(config, sys.stdout, args.conditional, args.points)
    else:
        config.out.parent.mkdir(parents=True, exist_ok=True)
        with open(config.out, "w", newline="", encoding="utf-8") as fh:
            rows = simulate.run_curves(config, fh, args.conditional, args.points)
        print(f"📜 {rows} curve points written to {config.out}")
    return 0


def cmd_attack(config: RunConfig, args: argparse.Namespace) -> int:
    report = asyncio.run(simulate.run_attack(config))
    r = report.result
    print(f"📜 {report.transactions} transactions, {report.accepted} accepted by the bank")
    print(f"📜 {report.sniffed_pairs} pairs sniffed, {report.constraints} six-eliminated constraints")
    if r.found:
        marker = "✅" if report.correct else "❌"
        print(
            f"{marker} Recovered {r.hash.value} salt {r.salt} after {r.pairs_consumed} pairs "
            f"({r.serials_consumed} serials, z={r.z_score:.2f})"
        )
        if report.counterfeit_verdict is not None:
            v = report.counterfeit_verdict
            print(f"{'✅' if v.accepted else '❌'} Counterfeit verified: error rate {v.error_rate:.3f}")
    else:
        print(f"❌ No salt separated after {r.pairs_consumed} pairs (leader {r.hash.value}/{r.salt})")
    return 0 if report.correct else 1


def cmd_table1(config: RunConfig, args: argparse.Namespace) -> int:
    rows = simulate.run_table1(config)
    print("hash,mean_pairs,std_error,successes,trials")
    for row in rows:
        print(f"{row.hash.value},{row.mean_pairs:.1f},{row.std_error:.1f},{row.successes},{row.trials}")
    if config.out is not None:
        config.out.parent.mkdir(parents=True, exist_ok=True)
        config.out.write_text(json.dumps([r.to_json() for r in rows], indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_defense(config: RunConfig, args: argparse.Namespace) -> int:
    report = simulate.run_defense(config, budget=args.budget)
    marker = "✅" if report.success_rate < 0.5 else "❌"
    print(
        f"{marker} Salt recovered in {report.successes}/{report.trials} trials "
        f"with at most {report.budget} sniffed pairs"
    )
    return 0


def cmd_events(config: RunConfig, args: argparse.Namespace) -> int:
    stats = simulate.run_events(config, n_pairs=args.pairs)
    for key, value in stats.items():
        print(f"{key:>24}: {value:.6f}" if isinstance(value, float) else f"{key:>24}: {value}")
    return 0


def cmd_serve(config: RunConfig, args: argparse.Namespace) -> int:
    try:
        asyncio.run(simulate.run_serve(config))
    except KeyboardInterrupt:
        print("📜 Bank stopped")
    return 0


def cmd_transact(config: RunConfig, args: argparse.Namespace) -> int:
    report = asyncio.run(simulate.run_transact(config, honest=args.honest))
    kind = "honest" if args.honest else f"compromised ({config.strategy.value})"
    print(f"📜 {report.accepted}/{report.total} {kind} transactions accepted ({report.acceptance:.3f})")
    if report.sniffed_pairs:
        print(f"📜 {report.sniffed_pairs} pairs sniffed")
    return 0


COMMANDS = {
    "curves": cmd_curves,
    "attack": cmd_attack,
    "table1": cmd_table1,
    "defense": cmd_defense,
    "events": cmd_events,
    "serve": cmd_serve,
    "transact": cmd_transact,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except (ValidationError, ValueError) as e:
        print(f"❌ Invalid configuration: {e}", file=sys.stderr)
        return 2

    logging.basicConfig(
        level=config.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logger.debug("config: %s", config.model_dump(mode="json"))

    try:
        return COMMANDS[args.command](config, args)
    except (ValueError, OSError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
