"""
Experiment Harness
==================
End-to-end runs: curves, the sniffing attack against a live ledger, the
minimal-pairs table, the pair-budget defense check and Monte Carlo event
statistics. Everything is reproducible from RunConfig.seed.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, TextIO

import numpy as np
from scipy import stats

from app.bank.server import BankServer
from app.bank.verifier import Bank, Challenge, Verdict, make_challenge, verify
from app.config import RunConfig, parse_address
from app.core.clonesim import (
    CloneParams,
    StrategyId,
    error_rate,
    event_probabilities,
    simulate_events,
    stealth_acceptance,
)
from app.core.infotheory import trade_off_curve, write_curve_csv
from app.cracker.constraints import batch_log, extract_constraints, write_constraints_csv
from app.cracker.search import (
    RecoveryResult,
    candidate_specs,
    counterfeit,
    generalized_recover,
    recover,
    score_candidates,
)
from app.db.database import init_db, make_engine, make_session_factory
from app.db.ledger import Ledger
from app.mint.encoding import EncodingSpec, HashId, Token, mint_token, write_token
from app.terminal.client import TerminalClient
from app.terminal.respond import CompromisedTerminal, SniffRecord, attack_respond, honest_respond, write_sniff_log


logger = logging.getLogger(__name__)


# ── Random streams ────────────────────────────────────────────────────────────

STREAMS = {
    "bank": 0,
    "cloning": 1,
    "terminal": 2,
    "sniff": 3,
    "trials": 4,
}


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for a named component, derived from the root seed."""
    if name not in STREAMS:
        raise ValueError(f"Unknown random stream {name!r}")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name], *extra)))


def streams(seed: int) -> dict[str, np.random.Generator]:
    return {name: stream(seed, name) for name in STREAMS}


# ── Sniffing without a ledger ─────────────────────────────────────────────────

def simulate_sniff_log(
    spec: EncodingSpec,
    cp: CloneParams,
    strategy: StrategyId,
    serials: list[str],
    bank_rng: np.random.Generator,
    clone_rng: np.random.Generator,
    post_select: bool = True,
) -> list[SniffRecord]:
    """Compromised transactions for every serial, straight from the mint."""
    log: list[SniffRecord] = []
    for serial in serials:
        token = mint_token(spec, serial)
        challenge = Challenge(serial, make_challenge(spec.pairs_per_token, bank_rng))
        _, records = attack_respond(strategy, cp, token, challenge, clone_rng)
        log.extend(r for r in records if r.fully_cloned or not post_select)
    return log


# ── Curves ────────────────────────────────────────────────────────────────────

def fidelity_grid(points: int = 51) -> list[float]:
    if points < 2:
        raise ValueError(f"Need at least two grid points, got {points}")
    step = 0.5 / (points - 1)
    return [round(0.5 + i * step, 12) for i in range(points)]


def run_curves(config: RunConfig, out: TextIO, conditional: bool = False, points: int = 51) -> int:
    curve = trade_off_curve(config.strategy, config.success_prob, fidelity_grid(points), conditional=conditional)
    return write_curve_csv(curve, config.strategy, config.success_prob, out)


# ── Attack ────────────────────────────────────────────────────────────────────

@dataclass
class AttackReport:
    result: RecoveryResult
    transactions: int
    accepted: int
    sniffed_pairs: int
    constraints: int
    correct: bool
    counterfeit_identical: Optional[bool] = None
    counterfeit_verdict: Optional[Verdict] = None

    def to_json(self) -> dict:
        out = {
            "result": self.result.to_json(),
            "transactions": self.transactions,
            "accepted": self.accepted,
            "sniffed_pairs": self.sniffed_pairs,
            "constraints": self.constraints,
            "correct": self.correct,
            "counterfeit_identical": self.counterfeit_identical,
        }
        if self.counterfeit_verdict is not None:
            out["counterfeit_verdict"] = self.counterfeit_verdict.to_json()
        return out


def _search(config: RunConfig, batches, spec: EncodingSpec) -> RecoveryResult:
    settings = config.recovery_settings()
    if config.generalized:
        return generalized_recover(
            batches, config.salt_space(), settings,
            keystream_len=spec.keystream_len, pairs_per_token=spec.pairs_per_token,
        )
    return recover(
        batches, [spec.hash], config.salt_space(), settings,
        keystream_len=spec.keystream_len, pairs_per_token=spec.pairs_per_token,
    )


async def run_attack(config: RunConfig) -> AttackReport:
    """
    Issue serials, pass every card through the compromised terminal,
    crack the salt from the sniff log and close the loop with a counterfeit.
    """
    if config.strategy is StrategyId.III:
        raise ValueError("Strategy iii does not clone; there is nothing to crack")

    spec = config.encoding_spec()
    engine = make_engine(config.database_url)
    await init_db(engine)
    try:
        ledger = Ledger(make_session_factory(engine))
        bank = Bank(
            spec, ledger, config.thresholds(),
            rng=stream(config.seed, "bank"), mark_spent=config.mark_spent,
        )
        terminal = CompromisedTerminal(
            config.strategy, config.clone_params(),
            rng=stream(config.seed, "cloning"), sniff_fraction=config.sniff_fraction,
        )

        accepted = 0
        serials = config.serial_numbers()
        for serial in serials:
            token = await bank.issue(serial)
            challenge = await bank.challenge(serial)
            verdict = await bank.verify(challenge, terminal.respond(token, challenge))
            accepted += verdict.accepted

        log = [r for r in terminal.log if r.fully_cloned or not config.post_select]
        batches = batch_log(log, count_four=config.count_four)
        constraints = extract_constraints(log)
        result = _search(config, batches, spec)
        correct = result.found and result.hash == spec.hash and result.salt == spec.salt

        report = AttackReport(
            result=result,
            transactions=len(serials),
            accepted=accepted,
            sniffed_pairs=len(log),
            constraints=len(constraints),
            correct=correct,
        )

        if result.found:
            serial = serials[0]
            fake = counterfeit(result, serial)
            report.counterfeit_identical = fake == mint_token(spec, serial)
            rng = stream(config.seed, "terminal")
            challenge = Challenge(serial, make_challenge(spec.pairs_per_token, rng))
            report.counterfeit_verdict = verify(
                spec, serial, challenge, honest_respond(fake, challenge, rng), config.thresholds()
            )

        if config.out is not None:
            await _write_attack_artifacts(config, ledger, log, constraints, report, spec)
        return report
    finally:
        await engine.dispose()


async def _write_attack_artifacts(config, ledger, log, constraints, report, spec) -> None:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sniff_log(log, out / "sniff.jsonl")
    write_constraints_csv(constraints, out / "constraints.csv")
    await ledger.export_jsonl(out / "ledger.jsonl")

    hashes = list(HashId) if config.generalized else [spec.hash]
    landscape = score_candidates(
        candidate_specs(hashes, config.salt_space(), spec.keystream_len, spec.pairs_per_token),
        constraints,
        workers=config.workers,
    )
    with open(out / "agreements.csv", "w", encoding="utf-8") as fh:
        fh.write("hash,salt,agreements,evaluated,rate\n")
        for s in landscape:
            fh.write(f"{s.hash.value},{s.salt},{s.agreements},{s.evaluated},{s.rate!r}\n")

    (out / "result.json").write_text(json.dumps(report.result.to_json(), indent=2) + "\n", encoding="utf-8")
    logger.info("attack artifacts written to %s", out)


# ── Minimal pairs table ───────────────────────────────────────────────────────

@dataclass
class TrialOutcome:
    hash: HashId
    salt: str
    found: bool
    correct: bool
    pairs_consumed: int


@dataclass
class Table1Row:
    hash: HashId
    mean_pairs: float
    std_error: float
    successes: int
    trials: int
    pairs: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        out["hash"] = self.hash.value
        return out


def run_trial(config: RunConfig, hash_id: HashId, trial: int, max_pairs: Optional[int] = None) -> TrialOutcome:
    """One seeded sniff-and-crack run with a random secret salt."""
    hash_index = list(HashId).index(hash_id)
    salts = config.salt_space()
    pick = stream(config.seed, "trials", hash_index, trial)
    salt = salts[int(pick.integers(len(salts)))]
    spec = config.encoding_spec().with_hash(hash_id).with_salt(salt)

    log = simulate_sniff_log(
        spec,
        config.clone_params(),
        config.strategy,
        config.serial_numbers(),
        stream(config.seed, "bank", hash_index, trial),
        stream(config.seed, "cloning", hash_index, trial),
        post_select=config.post_select,
    )
    batches = batch_log(log, count_four=config.count_four)
    if max_pairs is not None:
        config = config.model_copy(update={"max_pairs": max_pairs})
    result = _search(config, batches, spec)
    correct = result.found and result.hash == hash_id and result.salt == salt
    return TrialOutcome(hash_id, salt, result.found, correct, result.pairs_consumed)


def run_table1(config: RunConfig, hashes: Optional[list[HashId]] = None) -> list[Table1Row]:
    """
    Pairs needed for a correct recovery, per hash function, over seeded
    trials. The search consumes one serial at a time, so the pair count
    at which it stops is the minimal budget for that trial.
    """
    if config.trials < 2:
        raise ValueError(f"Need at least two trials, got {config.trials}")
    rows = []
    for hash_id in hashes or list(HashId):
        outcomes = [run_trial(config, hash_id, t) for t in range(config.trials)]
        pairs = [o.pairs_consumed for o in outcomes if o.correct]
        mean = float(np.mean(pairs)) if pairs else float("nan")
        se = float(stats.sem(pairs)) if len(pairs) >= 2 else float("nan")
        rows.append(Table1Row(hash_id, mean, se, len(pairs), config.trials, pairs))
        logger.info("%s: %d/%d recovered, %.0f ± %.0f pairs", hash_id.value, len(pairs), config.trials, mean, se)
    return rows


@dataclass
class DefenseReport:
    budget: int
    successes: int
    trials: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


def run_defense(config: RunConfig, budget: int = 1000) -> DefenseReport:
    """Recovery success when the bank rotates its salt after `budget` sniffed pairs."""
    outcomes = [run_trial(config, config.hash, t, max_pairs=budget) for t in range(config.trials)]
    return DefenseReport(budget, sum(o.correct for o in outcomes), config.trials)


# ── Event statistics ──────────────────────────────────────────────────────────

def run_events(config: RunConfig, n_pairs: int = 1_000_000) -> dict:
    cp = config.clone_params()
    counts = simulate_events(cp, n_pairs, stream(config.seed, "cloning"))
    probs = event_probabilities(cp)
    freq = counts.frequencies()
    return {
        "F": cp.fidelity,
        "P": cp.success,
        "pairs": n_pairs,
        "p_correct": probs.p_correct,
        "freq_correct": freq["correct"],
        "p_error": probs.p_error,
        "freq_error": freq["erroneous"],
        "p_total": probs.p_total,
        "freq_total": freq["total"],
        "epsilon_i": error_rate(StrategyId.I, cp),
        "epsilon_ii": error_rate(StrategyId.II, cp),
        "stealth_acceptance_ii": stealth_acceptance(
            StrategyId.II, cp, config.pairs_per_token, config.error_threshold
        ),
    }


# ── Service ───────────────────────────────────────────────────────────────────

async def start_bank(config: RunConfig, host: str, port: int):
    """Build ledger + bank, issue the configured serials and start listening."""
    engine = make_engine(config.database_url)
    await init_db(engine)
    ledger = Ledger(make_session_factory(engine))
    bank = Bank(
        config.encoding_spec(), ledger, config.thresholds(),
        rng=stream(config.seed, "bank"), mark_spent=config.mark_spent,
    )
    for serial in config.serial_numbers():
        if not await ledger.contains(serial):
            token = await bank.issue(serial)
            if config.out is not None:
                Path(config.out).mkdir(parents=True, exist_ok=True)
                write_token(token, Path(config.out) / f"token_{serial}.json")
    server = BankServer(bank)
    bound = await server.start(host, port)
    return server, engine, bound


async def run_serve(config: RunConfig) -> None:
    host, port = parse_address(config.listen)
    server, engine, bound = await start_bank(config, host, port)
    print(f"✅ Bank serving {config.serials} serials on {bound[0]}:{bound[1]}")
    try:
        await server.serve_forever()
    finally:
        await server.close()
        await engine.dispose()


@dataclass
class TransactReport:
    total: int
    accepted: int
    verdicts: list[Verdict]
    sniffed_pairs: int = 0

    @property
    def acceptance(self) -> float:
        return self.accepted / self.total if self.total else 0.0


async def run_transact(config: RunConfig, honest: bool = False, tokens: Optional[list[Token]] = None) -> TransactReport:
    """
    Pay with every card once through an honest or compromised terminal.
    Cards are the bank's own tokens (the simulated customer holds them).
    """
    host, port = parse_address(config.connect)
    spec = config.encoding_spec()
    tokens = tokens if tokens is not None else [mint_token(spec, s) for s in config.serial_numbers()]

    terminal = None
    if honest:
        rng = stream(config.seed, "terminal")

        def responder(token, challenge):
            return honest_respond(token, challenge, rng)
    else:
        terminal = CompromisedTerminal(
            config.strategy, config.clone_params(),
            rng=stream(config.seed, "sniff"), sniff_fraction=config.sniff_fraction,
        )
        responder = terminal.respond

    verdicts = []
    async with TerminalClient(host, port) as client:
        for token in tokens:
            verdicts.append(await client.transact(token, responder))

    report = TransactReport(len(verdicts), sum(v.accepted for v in verdicts), verdicts)
    if terminal is not None:
        report.sniffed_pairs = len(terminal.log)
        if config.out is not None:
            Path(config.out).mkdir(parents=True, exist_ok=True)
            write_sniff_log(terminal.log, Path(config.out) / "sniff.jsonl")
    return report
