import numpy as np
import pytest

from app.core.clonesim import LOST, CloneParams, QubitCloneOutcome, StrategyId
from app.core.qstate import PAIR_SET, Basis, QubitState
from app.cracker.constraints import (
    Constraint,
    SerialBatch,
    batch_log,
    batches_from_constraints,
    extract_constraints,
    extract_hints,
    read_constraints_csv,
    write_constraints_csv,
)
from app.cracker.search import (
    RecoverySettings,
    agreements,
    candidate_specs,
    counterfeit,
    decimal_salts,
    generalized_recover,
    recover,
    score_candidates,
)
from app.harness.simulate import simulate_sniff_log
from app.mint.encoding import EncodingSpec, HashId, mint_token
from app.terminal.respond import SniffRecord


TRUE_SPEC = EncodingSpec(HashId.HMAC_SHA256, "42")
SALTS = decimal_salts(2)


def sniff(spec=TRUE_SPEC, F=0.803, serials=30, seed=0, strategy=StrategyId.II):
    return simulate_sniff_log(
        spec,
        CloneParams(F),
        strategy,
        [f"{i:03d}" for i in range(serials)],
        np.random.default_rng(seed),
        np.random.default_rng(seed + 1000),
    )


class TestConstraints:

    def test_mask_covers_two_pairs(self):
        c = Constraint("000", 0, 1, QubitState.ZERO)
        allowed = [k for k in range(8) if c.mask >> k & 1]
        assert [str(PAIR_SET[k]) for k in allowed] == ["|0+>", "|0->"]

    def test_perfect_cloner_constraints_are_all_true(self):
        log = sniff(F=1.0, serials=5)
        constraints = extract_constraints(log)
        assert constraints
        score = agreements(TRUE_SPEC, constraints)
        assert score.agreements == score.evaluated == len(constraints)

    def test_hints_contain_the_true_pair(self):
        log = sniff(F=1.0, serials=5)
        hints = extract_hints(log)
        assert hints
        for h in hints:
            assert mint_token(TRUE_SPEC, h.serial).pairs[h.pair_index] in h.candidates
            assert bin(h.mask).count("1") == 4

    def test_lost_qubits_give_nothing(self):
        record = SniffRecord("000", 0, Basis.Z, LOST, QubitCloneOutcome((1, 0)))
        assert extract_constraints([record]) == []

    def test_plain_measurements_rejected(self):
        with pytest.raises(ValueError):
            extract_constraints(sniff(serials=1, strategy=StrategyId.III))

    def test_csv(self, tmp_path):
        constraints = extract_constraints(sniff(serials=3))
        path = tmp_path / "constraints.csv"
        assert write_constraints_csv(constraints, path) == len(constraints)
        assert path.read_text().splitlines()[0] == "serial,pair,position,state"
        assert read_constraints_csv(path) == constraints


class TestBatches:

    def test_grouped_by_serial_in_order(self):
        batches = batch_log(sniff(serials=4))
        assert [b.serial for b in batches] == ["000", "001", "002", "003"]
        assert all(len(b.sniffed) == 40 for b in batches)

    def test_four_candidate_events_only_on_request(self):
        log = sniff(F=1.0, serials=2)
        plain = sum(len(b.inferences) for b in batch_log(log))
        weighted = sum(len(b.inferences) for b in batch_log(log, count_four=True))
        assert weighted == plain + len(extract_hints(log))

    def test_truncated(self):
        batch = batch_log(sniff(serials=1))[0]
        cut = batch.truncated(10)
        assert cut.sniffed == batch.sniffed[:10]
        assert all(i.pair_index < 10 for i in cut.inferences)

    def test_from_constraints(self):
        constraints = extract_constraints(sniff(serials=3))
        batches = batches_from_constraints(constraints)
        assert sum(len(b.inferences) for b in batches) == len(constraints)
        assert isinstance(batches[0], SerialBatch)


class TestRecover:

    def test_finds_the_salt(self):
        result = recover(batch_log(sniff()), [HashId.HMAC_SHA256], SALTS)
        assert result.found
        assert (result.hash, result.salt) == (HashId.HMAC_SHA256, "42")
        assert result.pairs_consumed % 40 == 0
        assert result.z_score > 5

    def test_plain_constraints_are_accepted(self):
        constraints = extract_constraints(sniff())
        result = recover(constraints, [HashId.HMAC_SHA256], SALTS)
        assert result.found and result.salt == "42"

    def test_true_salt_ranks_first_in_landscape(self):
        constraints = extract_constraints(sniff(serials=5))
        landscape = score_candidates(candidate_specs([HashId.HMAC_SHA256], SALTS), constraints)
        best = max(landscape, key=lambda s: s.agreements)
        assert best.salt == "42"
        assert best.rate > 0.5
        others = [s.rate for s in landscape if s.salt != "42"]
        assert np.mean(others) == pytest.approx(0.25, abs=0.05)

    def test_unknown_hash(self):
        result = generalized_recover(batch_log(sniff()), SALTS)
        assert result.found
        assert (result.hash, result.salt) == (HashId.HMAC_SHA256, "42")

    def test_salt_outside_the_space(self):
        absent = EncodingSpec(HashId.HMAC_SHA256, "777")
        results = [
            recover(batch_log(sniff(spec=absent, serials=101, seed=seed)), [HashId.HMAC_SHA256], SALTS)
            for seed in range(10)
        ]
        assert sum(not r.found for r in results) >= 9
        assert all(r.pairs_consumed == 101 * 40 or r.survivors <= 1 for r in results if not r.found)

    def test_pruned_survivors_do_not_fake_a_separation(self):
        # A handful of pruned wrong candidates have a tiny spread; the
        # leader must still clear the unpruned background.
        absent = EncodingSpec(HashId.HMAC_SHA256, "777")
        settings = RecoverySettings(prune_every=2, keep_fraction=0.4)
        results = [
            recover(batch_log(sniff(spec=absent, serials=101, seed=seed)), [HashId.HMAC_SHA256], SALTS, settings)
            for seed in range(10)
        ]
        assert sum(not r.found for r in results) >= 9
        assert all(r.background_z > settings.z_multiple for r in results if r.found)

    def test_single_constraint_scores(self):
        constraint = Constraint("000", 0, 1, QubitState.ZERO)
        landscape = score_candidates(candidate_specs([HashId.HMAC_SHA256], SALTS), [constraint])
        assert all(type(s.agreements) is int and s.agreements in (0, 1) for s in landscape)
        assert all(s.evaluated == 1 for s in landscape)
        assert sum(s.agreements for s in landscape) > 0

        result = recover([constraint], [HashId.HMAC_SHA256], SALTS)
        assert not result.found
        assert result.score.evaluated == 1

    def test_separation_at_two_thousand_constraints(self):
        separated = 0
        for seed in range(20):
            constraints = extract_constraints(sniff(serials=101, seed=seed))
            assert len(constraints) >= 1800
            landscape = score_candidates(candidate_specs([HashId.HMAC_SHA256], SALTS), constraints)
            true = next(s.agreements for s in landscape if s.salt == "42")
            others = np.array([s.agreements for s in landscape if s.salt != "42"])
            separated += (true - others.mean()) / others.std() > 5
        assert separated >= 19

    def test_true_salt_survives_every_prune(self):
        settings = RecoverySettings(z_multiple=1e9)
        kept = 0
        for seed in range(20):
            result = recover(batch_log(sniff(serials=80, seed=seed)), [HashId.HMAC_SHA256], SALTS, settings)
            assert result.survivors == 1
            kept += result.salt == "42"
        assert kept >= 19

    def test_pair_budget(self):
        result = recover(batch_log(sniff()), [HashId.HMAC_SHA256], SALTS, RecoverySettings(max_pairs=10))
        assert not result.found
        assert result.pairs_consumed == 10

    def test_budget_can_cut_a_serial(self):
        result = recover(batch_log(sniff()), [HashId.HMAC_SHA256], SALTS, RecoverySettings(max_pairs=60))
        assert result.pairs_consumed <= 60

    def test_parallel_matches_serial(self):
        batches = batch_log(sniff(serials=6))
        one = recover(batches, [HashId.HMAC_SHA256], SALTS, RecoverySettings(workers=1))
        two = recover(batches, [HashId.HMAC_SHA256], SALTS, RecoverySettings(workers=2))
        assert one == two

    def test_pruning_to_one_survivor_is_not_a_find(self):
        settings = RecoverySettings(z_multiple=1e9, prune_every=1, keep_fraction=0.1)
        result = recover(batch_log(sniff()), [HashId.HMAC_SHA256], SALTS, settings)
        assert not result.found
        assert result.survivors == 1

    def test_empty_inputs(self):
        with pytest.raises(ValueError):
            recover([], [HashId.HMAC_SHA256], [])
        with pytest.raises(ValueError):
            recover([], [], SALTS)
        assert not recover([], [HashId.HMAC_SHA256], SALTS).found

    @pytest.mark.parametrize("kwargs", [{"z_multiple": 0}, {"keep_fraction": 0}, {"prune_every": 0}])
    def test_bad_settings(self, kwargs):
        with pytest.raises(ValueError):
            RecoverySettings(**kwargs)


class TestCounterfeit:

    def test_counterfeit_equals_bank_token(self):
        result = recover(batch_log(sniff()), [HashId.HMAC_SHA256], SALTS)
        for serial in ("000", "555", "fresh-serial"):
            assert counterfeit(result, serial) == mint_token(TRUE_SPEC, serial)

    def test_no_counterfeit_without_a_find(self):
        result = recover(batch_log(sniff()), [HashId.HMAC_SHA256], SALTS, RecoverySettings(max_pairs=10))
        with pytest.raises(ValueError):
            counterfeit(result, "000")

    def test_salt_space(self):
        assert decimal_salts(3)[:2] == ["000", "001"]
        assert len(decimal_salts(3)) == 1000
        with pytest.raises(ValueError):
            decimal_salts(0)
