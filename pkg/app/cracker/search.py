"""
Salt Recovery
=============
Agreement counting over (hash, salt) candidates, with periodic pruning
and a z-score stopping rule.

A candidate agrees with a constraint when its predicted pair at the
constrained (serial, pair index) is one of the pairs the constraint
allows. The true candidate agrees at rate F^2 on six-eliminated
constraints; a wrong one at 2/8 = 0.25.
"""

import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from app.cracker.constraints import Inference, SerialBatch, batches_from_constraints
from app.mint.encoding import EncodingSpec, HashId, Token, mint_token, pair_indices, predict_pair


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateScore:
    hash: HashId
    salt: str
    agreements: int
    evaluated: int

    @property
    def rate(self) -> float:
        return self.agreements / self.evaluated if self.evaluated else 0.0


@dataclass(frozen=True)
class RecoverySettings:
    z_multiple: float = 5.0
    prune_every: int = 10
    keep_fraction: float = 0.5
    max_pairs: Optional[int] = None
    count_four_candidates: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.z_multiple <= 0:
            raise ValueError(f"z_multiple must be positive, got {self.z_multiple}")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError(f"keep_fraction must be in (0, 1], got {self.keep_fraction}")
        if self.prune_every < 1:
            raise ValueError(f"prune_every must be at least 1, got {self.prune_every}")
        if self.max_pairs is not None and self.max_pairs < 0:
            raise ValueError(f"max_pairs must be non-negative, got {self.max_pairs}")


@dataclass(frozen=True)
class RecoveryResult:
    found: bool
    hash: HashId
    salt: str
    score: CandidateScore
    pairs_consumed: int
    serials_consumed: int = 0
    survivors: int = 0
    z_score: float = 0.0
    background_z: float = 0.0
    keystream_len: int = 40
    pairs_per_token: int = 40

    def to_spec(self) -> EncodingSpec:
        return EncodingSpec(self.hash, self.salt, self.keystream_len, self.pairs_per_token)

    def to_json(self) -> dict:
        return {
            "found": self.found,
            "hash": self.hash.value,
            "salt": self.salt,
            "agreements": self.score.agreements,
            "evaluated": self.score.evaluated,
            "pairs_consumed": self.pairs_consumed,
            "z_score": self.z_score,
            "background_z": self.background_z,
        }


# ── Prediction ────────────────────────────────────────────────────────────────

def _predict_chunk(args: tuple[list[EncodingSpec], str]) -> np.ndarray:
    specs, serial = args
    return np.stack([pair_indices(spec, serial) for spec in specs])


class CandidatePredictor:
    """
    Predicted pair indices of every candidate for one serial.
    With workers > 1 the keystreams are computed in a process pool; chunks
    come back in candidate order, so tallies match the serial path exactly.
    """

    def __init__(self, specs: Sequence[EncodingSpec], workers: int = 1):
        self.specs = list(specs)
        self.workers = max(1, int(workers))
        self._pool = Pool(self.workers) if self.workers > 1 else None

    def predict(self, rows: np.ndarray, serial: str) -> np.ndarray:
        chosen = [self.specs[i] for i in rows]
        if self._pool is None or len(chosen) < 2 * self.workers:
            return _predict_chunk((chosen, serial))
        size = math.ceil(len(chosen) / self.workers)
        chunks = [(chosen[i:i + size], serial) for i in range(0, len(chosen), size)]
        return np.concatenate(self._pool.map(_predict_chunk, chunks))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def __enter__(self) -> "CandidatePredictor":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _hits(predicted: np.ndarray, inferences: Sequence[Inference]) -> np.ndarray:
    """Agreements per candidate row for one serial's inferences."""
    cols = np.fromiter((i.pair_index for i in inferences), dtype=np.intp, count=len(inferences))
    masks = np.fromiter((i.mask for i in inferences), dtype=np.uint16, count=len(inferences))
    picked = predicted[:, cols].astype(np.uint16)
    return ((masks[None, :] >> picked) & 1).sum(axis=1, dtype=np.int64)


def _null_moments(inferences: Sequence[Inference]) -> tuple[float, float]:
    """Mean and variance of the agreements scored by a candidate unrelated to the sniffed data."""
    p = np.fromiter((bin(i.mask).count("1") / 8 for i in inferences), dtype=np.float64, count=len(inferences))
    return float(p.sum()), float((p * (1.0 - p)).sum())


# ── Scoring ───────────────────────────────────────────────────────────────────

def agreements(candidate: EncodingSpec, constraints: Iterable[Inference]) -> CandidateScore:
    hits = evaluated = 0
    for c in constraints:
        predicted = predict_pair(candidate, c.serial, c.pair_index)
        hits += (c.mask >> predicted.index) & 1
        evaluated += 1
    return CandidateScore(candidate.hash, candidate.salt, hits, evaluated)


def candidate_specs(
    hashes: Sequence[HashId], salt_space: Sequence[str], keystream_len: int = 40, pairs_per_token: int = 40
) -> list[EncodingSpec]:
    return [
        EncodingSpec(h, s, keystream_len=keystream_len, pairs_per_token=pairs_per_token)
        for h in hashes
        for s in salt_space
    ]


def score_candidates(
    specs: Sequence[EncodingSpec], constraints: Iterable[Inference], workers: int = 1
) -> list[CandidateScore]:
    """Full agreement landscape, no pruning."""
    batches = batches_from_constraints(constraints)
    tally = np.zeros(len(specs), dtype=np.int64)
    evaluated = 0
    rows = np.arange(len(specs))
    with CandidatePredictor(specs, workers) as predictor:
        for batch in batches:
            tally += _hits(predictor.predict(rows, batch.serial), batch.inferences)
            evaluated += len(batch.inferences)
    return [CandidateScore(s.hash, s.salt, int(t), evaluated) for s, t in zip(specs, tally)]


# ── Search ────────────────────────────────────────────────────────────────────

def _separation(scores: np.ndarray, alive: np.ndarray) -> tuple[int, float, bool]:
    """(leader row, z-score of the leader against the rest, whether z is defined)."""
    live = scores[alive]
    pos = int(np.argmax(live))
    leader = int(alive[pos])
    others = np.delete(live, pos)
    if others.size < 2:
        return leader, 0.0, False
    std = float(others.std())
    if std <= 0:
        return leader, 0.0, False
    return leader, (float(live[pos]) - float(others.mean())) / std, True


def _background_z(leader_score: int, null_mean: float, null_var: float) -> float:
    if null_var <= 0:
        return 0.0
    return (float(leader_score) - null_mean) / math.sqrt(null_var)


def _prune(scores: np.ndarray, alive: np.ndarray, keep_fraction: float) -> np.ndarray:
    keep = max(1, math.ceil(keep_fraction * alive.size))
    order = np.argsort(-scores[alive], kind="stable")
    return np.sort(alive[order[:keep]])


def recover(
    batches: Iterable[Union[SerialBatch, Inference]],
    hashes: Sequence[HashId],
    salt_space: Sequence[str],
    settings: RecoverySettings = RecoverySettings(),
    keystream_len: int = 40,
    pairs_per_token: int = 40,
) -> RecoveryResult:
    """
    Consume serial batches until one candidate separates from the rest.

    Every prune_every serials the lowest-scoring (1 - keep_fraction) of
    the survivors are dropped. The search stops when the leader exceeds
    the mean of the other survivors by z_multiple standard deviations and
    also clears the agreement count expected of an unrelated candidate by
    z_multiple binomial standard deviations. Pruning keeps only the top
    tail of the wrong candidates, so the survivors alone understate the
    background spread.
    Running out of data, or pruning down to a single survivor, returns
    the leader with found=False.
    """
    if not salt_space:
        raise ValueError("Salt space is empty")
    if not hashes:
        raise ValueError("No hash functions to search")

    batches = list(batches)
    if batches and not isinstance(batches[0], SerialBatch):
        batches = batches_from_constraints(batches)

    specs = candidate_specs(hashes, salt_space, keystream_len, pairs_per_token)
    scores = np.zeros(len(specs), dtype=np.int64)
    alive = np.arange(len(specs))
    evaluated = pairs = serials = 0
    null_mean = null_var = 0.0
    leader, z, defined = 0, 0.0, False
    background_z = 0.0

    def result(found: bool) -> RecoveryResult:
        spec = specs[leader]
        return RecoveryResult(
            found=found,
            hash=spec.hash,
            salt=spec.salt,
            score=CandidateScore(spec.hash, spec.salt, int(scores[leader]), evaluated),
            pairs_consumed=pairs,
            serials_consumed=serials,
            survivors=int(alive.size),
            z_score=z,
            background_z=background_z,
            keystream_len=keystream_len,
            pairs_per_token=pairs_per_token,
        )

    with CandidatePredictor(specs, settings.workers) as predictor:
        for batch in batches:
            if settings.max_pairs is not None:
                remaining = settings.max_pairs - pairs
                if remaining <= 0:
                    break
                if len(batch.sniffed) > remaining:
                    batch = batch.truncated(remaining)

            pairs += len(batch.sniffed)
            serials += 1
            if batch.inferences:
                predicted = predictor.predict(alive, batch.serial)
                scores[alive] += _hits(predicted, batch.inferences)
                evaluated += len(batch.inferences)
                mean, var = _null_moments(batch.inferences)
                null_mean += mean
                null_var += var

            leader, z, defined = _separation(scores, alive)
            background_z = _background_z(scores[leader], null_mean, null_var)
            if defined and z > settings.z_multiple and background_z > settings.z_multiple:
                logger.info(
                    "salt %s/%s separated at z=%.2f (background z=%.2f) after %d pairs (%d serials, %d survivors)",
                    specs[leader].hash.value, specs[leader].salt, z, background_z, pairs, serials, alive.size,
                )
                return result(True)

            if serials % settings.prune_every == 0:
                alive = _prune(scores, alive, settings.keep_fraction)
                logger.debug("pruned to %d candidates after %d serials", alive.size, serials)
                if alive.size <= 1:
                    break

    leader, z, _ = _separation(scores, alive)
    background_z = _background_z(scores[leader], null_mean, null_var)
    logger.info("no separation after %d pairs; leader %s/%s", pairs, specs[leader].hash.value, specs[leader].salt)
    return result(False)


def generalized_recover(
    batches: Iterable[Union[SerialBatch, Inference]],
    salt_space: Sequence[str],
    settings: RecoverySettings = RecoverySettings(),
    hashes: Sequence[HashId] = tuple(HashId),
    keystream_len: int = 40,
    pairs_per_token: int = 40,
) -> RecoveryResult:
    """Search when the hash function is only known to be one of `hashes`."""
    return recover(batches, list(hashes), salt_space, settings, keystream_len, pairs_per_token)


def counterfeit(recovered: Union[RecoveryResult, EncodingSpec], serial: str) -> Token:
    if isinstance(recovered, RecoveryResult):
        if not recovered.found:
            raise ValueError("Cannot counterfeit from a search that did not separate a salt")
        recovered = recovered.to_spec()
    return mint_token(recovered, serial)


def decimal_salts(digits: int) -> list[str]:
    """All zero-padded decimal salts of the given length."""
    if digits < 1:
        raise ValueError(f"Salt length must be positive, got {digits}")
    return [str(i).zfill(digits) for i in range(10 ** digits)]
