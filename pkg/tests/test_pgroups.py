"""Tests for the abelian p-group ledgers and their scripted runs.

The frozen values here were derived by hand before the module was
written: Ulm sequences of small direct sums, re-presentation residues
after conversions, and the horizon groups of each construction under
fixed scripts.  The brute-force table oracle cross-checks the summand
counting throughout.
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limitstage.finitestructs import FiniteStructure, InvariantError, ScriptError
from limitstage.oracles import OracleScript, gen_script
from limitstage.pgroups import (
    INF,
    LimitwiseMonotonicFun,
    PairScript,
    SummandLedger,
    UlmVector,
    close_down,
    cyclic_sum_table,
    exponent_partitions,
    height,
    make_pair_script,
    pair_realization_step,
    pair_script_from_obj,
    realize_pairs,
    run_group_reduction,
    ulm_bruteforce,
    ulm_of_ledger,
    validate_pair_script,
    window_match,
)
from limitstage.serial import canonical_dumps


def ledger_of(p, exponents):
    led = SummandLedger(p)
    for e in exponents:
        led.add_summand(e, 0)
    return led


def identity_landing(width):
    return LimitwiseMonotonicFun.of([[n] for n in range(width)])


class TestUlmVector:
    """The invariant sequence container."""

    def test_trailing_zeros_are_stripped(self):
        assert UlmVector.of([2, 0, 1, 0, 0]).entries == (2, 0, 1)
        assert UlmVector.of([0, 0]).entries == ()

    def test_reads_zero_beyond_the_length(self):
        u = UlmVector.of([1, 0, 3])
        assert u.length == 3
        assert u.at(1) == 0 and u.at(2) == 3 and u.at(7) == 0

    def test_infinite_entries_survive(self):
        u = UlmVector.of([2, INF])
        assert u.at(1) == INF and u.length == 2

    def test_rejects_negative_and_junk_entries(self):
        with pytest.raises(ScriptError):
            UlmVector.of([-1])
        with pytest.raises(ScriptError):
            UlmVector.of(["many"])


class TestLedger:
    """Summand bookkeeping, element arithmetic, and conversion surgery."""

    def test_summand_counts_read_as_ulm(self):
        led = ledger_of(3, (1, 1, 3))
        assert ulm_of_ledger(led).to_obj() == [2, 0, 1]
        assert led.counts() == {1: 2, 3: 1}

    def test_conversion_moves_one_count_up(self):
        led = ledger_of(3, (1, 1, 3))
        led.convert_summand(led.ids_at(1)[0], 3, 1)
        assert ulm_of_ledger(led).to_obj() == [1, 0, 2]

    def test_small_conversion_represents_generator_as_p_times_new(self):
        led = SummandLedger(2)
        sid = led.add_summand(1, 0)
        led.convert_summand(sid, 2, 1)
        assert led.value(f"g{sid}") == {sid: 2}

    def test_double_conversion_composes_to_p_squared(self):
        led = SummandLedger(2)
        sid = led.add_summand(1, 0)
        led.log_next_atom(0)
        led.convert_summand(sid, 2, 1)
        led.convert_summand(sid, 3, 2)
        assert led.value(f"g{sid}") == {sid: 4}
        assert [h[1] for h in led.summands[0].history] == [1, 2, 3]

    def test_logged_doubling_fact_survives_conversion(self):
        led = SummandLedger(2)
        sid = led.add_summand(2, 0)
        triple = led.log_next_atom(0)
        assert triple == (f"g{sid}", f"g{sid}", "e0")
        led.convert_summand(sid, 4, 1)
        led.verify_atoms()
        assert led.value("e0") == {sid: 8}

    def test_shrinking_and_unknown_conversions_are_refused(self):
        led = ledger_of(2, (3,))
        with pytest.raises(ScriptError):
            led.convert_summand(led.summands[0].sid, 2, 1)
        with pytest.raises(ScriptError):
            led.convert_summand(99, 9, 1)

    def test_chain_wraps_back_onto_the_zero_name(self):
        led = SummandLedger(2)
        led.add_summand(1, 0)
        first = led.log_next_atom(0)
        assert first[2] == "0"
        second = led.log_next_atom(1)
        assert second == ("0", "g0", "g0")

    def test_orders_and_heights(self):
        led = SummandLedger(2)
        a = led.add_summand(2, 0)
        b = led.add_summand(3, 0)
        assert led.order_of(f"g{a}") == 4
        assert led.order_of({b: 4}) == 2
        assert led.order_of("0") == 1
        assert height(f"g{a}", led) == 0
        assert height({b: 2}, led) == 1
        assert height({a: 2, b: 4}, led) == 1
        assert height("0", led) is None

    def test_poisoned_log_is_caught(self):
        led = SummandLedger(2)
        led.add_summand(1, 0)
        led.atoms.append(("g0", "g0", "g0"))
        with pytest.raises(InvariantError):
            led.verify_atoms()

    def test_serialization_round_trip(self):
        led = SummandLedger(3)
        led.add_summand(2, 0)
        sid = led.add_summand(1, 1)
        led.convert_summand(sid, 4, 2)
        obj = led.to_obj()
        assert obj["summands"][1]["history"] == [[1, 1], [2, 4]]
        back = SummandLedger.from_obj(obj)
        assert back.to_obj() == obj
        assert ulm_of_ledger(back) == ulm_of_ledger(led)

    def test_from_obj_rejects_broken_histories(self):
        base = {"p": 2, "summands": [{"id": 0, "exponent": 2, "history": [[0, 2], [1, 2]]}]}
        with pytest.raises(ScriptError):
            SummandLedger.from_obj(base)
        ends_wrong = {"p": 2, "summands": [{"id": 0, "exponent": 3, "history": [[0, 2]]}]}
        with pytest.raises(ScriptError):
            SummandLedger.from_obj(ends_wrong)

    def test_composite_modulus_is_rejected(self):
        with pytest.raises(ScriptError):
            SummandLedger(6)


class TestBruteforceOracle:
    """Ulm invariants recomputed from opaque addition tables."""

    def test_frozen_small_tables(self):
        assert ulm_bruteforce(cyclic_sum_table(2, (2,))).to_obj() == [0, 1]
        assert ulm_bruteforce(cyclic_sum_table(2, (1, 1))).to_obj() == [2]
        assert ulm_bruteforce(cyclic_sum_table(2, (1, 3))).to_obj() == [1, 0, 1]
        assert ulm_bruteforce(cyclic_sum_table(2, ())).to_obj() == []

    def test_agrees_with_ledger_counting_for_p2(self):
        for part in exponent_partitions(6):
            assert ulm_bruteforce(cyclic_sum_table(2, part)) == ulm_of_ledger(
                ledger_of(2, part)
            ), part

    def test_agrees_with_ledger_counting_for_p3(self):
        for part in exponent_partitions(5):
            assert ulm_bruteforce(cyclic_sum_table(3, part)) == ulm_of_ledger(
                ledger_of(3, part)
            ), part

    def test_reads_structure_presentations(self):
        table = cyclic_sum_table(2, (1, 2))
        triples = [(a, b, c) for (a, b), c in table.items()]
        struct = FiniteStructure.make((("add", 3),), 8, {"add": triples})
        assert ulm_bruteforce(struct).to_obj() == [1, 1]

    def test_rejects_malformed_tables(self):
        with pytest.raises(ScriptError):
            ulm_bruteforce({(0, 0): 0, (0, 1): 1})
        composite = {(a, b): (a + b) % 6 for a in range(6) for b in range(6)}
        with pytest.raises(ScriptError):
            ulm_bruteforce(composite)
        with pytest.raises(ScriptError):
            ulm_bruteforce([("not", "a", "table")])

    def test_table_size_is_capped(self):
        with pytest.raises(ScriptError):
            cyclic_sum_table(2, (20,))

    @given(st.data())
    @settings(max_examples=25, deadline=None)
    def test_agreement_survives_a_conversion(self, data):
        part = data.draw(
            st.lists(st.integers(min_value=1, max_value=3), min_size=1, max_size=3)
        )
        led = ledger_of(2, part)
        sid = data.draw(st.sampled_from([s.sid for s in led.summands]))
        bump = data.draw(st.integers(min_value=1, max_value=2))
        led.convert_summand(sid, led.exponent_of(sid) + bump, 1)
        shape = tuple(sorted((s.exponent for s in led.summands), reverse=True))
        assert ulm_of_ledger(led) == ulm_bruteforce(cyclic_sum_table(2, shape))


class TestPartitions:
    def test_partition_listing_is_exact(self):
        parts = exponent_partitions(6)
        assert len(parts) == 30
        assert parts[0] == ()
        assert len(set(parts)) == 30
        for part in parts:
            assert sum(part) <= 6
            assert all(a >= b for a, b in zip(part, part[1:]))


class TestLimitwiseMonotonic:
    """Row tables standing in for limitwise monotonic approximations."""

    def test_rows_clamp_to_their_last_entry(self):
        f = LimitwiseMonotonicFun.of([[0, 1, 2], [5]])
        assert f.value(0, 0) == 0
        assert f.value(0, 99) == 2
        assert f.limit(0) == 2 and f.limit(1) == 5

    def test_monotonicity_is_enforced(self):
        with pytest.raises(ScriptError):
            LimitwiseMonotonicFun.of([[3, 1]])

    def test_missing_and_empty_rows_are_errors(self):
        f = LimitwiseMonotonicFun.of([[1]])
        with pytest.raises(ScriptError):
            f.value(5, 0)
        with pytest.raises(ScriptError):
            LimitwiseMonotonicFun.of([[]])


class TestPairScripts:
    """Claim tables with retraction and settlement."""

    def test_settle_and_limit_are_computed(self):
        script = make_pair_script([[(0, 1)], [(0, 1), (1, 1)], [(1, 1)], [(1, 1)]])
        assert script.declared_limit == ((1, 1),)
        assert script.settle_stage == 2
        assert script.believed(1) == {(0, 1), (1, 1)}

    def test_round_trip(self):
        script = make_pair_script([[(2, 2)], []])
        assert pair_script_from_obj(script.to_obj()) == script

    def test_validation_rejects_malformed_claims(self):
        bad = PairScript(1, ((0, 0),), 0, (((0, 0),),))
        assert validate_pair_script(bad)
        untidy = PairScript(1, ((0, 1),), 0, (((1, 1), (0, 1)),))
        assert validate_pair_script(untidy)
        loose_tail = PairScript(2, ((0, 1),), 0, (((0, 1),), ()))
        assert any("tail" in v for v in validate_pair_script(loose_tail))

    def test_downward_closure(self):
        assert close_down([(1, 3)]) == {(1, 1), (1, 2), (1, 3)}
        assert close_down([]) == frozenset()


class TestPairRealizer:
    """Witness creation, parking, adoption, and the landing climb."""

    def test_settled_claim_realizes_one_summand(self):
        script = make_pair_script([[(0, 1)]] * 5)
        led = realize_pairs(script, LimitwiseMonotonicFun.of([[0]]), 2)
        assert ulm_of_ledger(led).to_obj() == [1]
        assert len(led.summands) == 1

    def test_retracted_claim_strands_witness_on_the_landing(self):
        script = make_pair_script([[(0, 1)]] * 3 + [[]] * 3)
        landing = LimitwiseMonotonicFun.of([[0, 1, 2, 2]])
        led = realize_pairs(script, landing, 2)
        assert [s.exponent for s in led.summands] == [3]
        assert ulm_of_ledger(led).to_obj() == [0, 0, 1]
        parked = led.scratch["realizer"]["parked"]
        assert [entry["home"] for entry in parked] == [0]

    def test_emptied_claims_leave_parked_only_on_landing_limits(self):
        script = make_pair_script([[(0, 1), (1, 1)]] * 2 + [[]] * 4)
        landing = LimitwiseMonotonicFun.of([[0, 2, 3, 3], [1, 2, 4, 4]])
        led = realize_pairs(script, landing, 3)
        parked = led.scratch["realizer"]["parked"]
        assert len(parked) == 2
        for entry in parked:
            assert led.exponent_of(entry["sid"]) == landing.limit(entry["home"]) + 1

    def test_rebelieved_claim_adopts_the_parked_witness(self):
        script = make_pair_script([[(0, 1)], [], [], [(0, 1)], [(0, 1)]])
        led = realize_pairs(script, LimitwiseMonotonicFun.of([[0]]), 2)
        assert len(led.summands) == 1
        assert ulm_of_ledger(led).to_obj() == [1]

    def test_arrival_at_a_counted_level_climbs_past(self):
        script = make_pair_script([[(0, 1), (1, 1)]] + [[(1, 1)]] * 4)
        landing = LimitwiseMonotonicFun.of([[1], [2], [2]])
        led = realize_pairs(script, landing, 2)
        assert sorted(s.exponent for s in led.summands) == [2, 3]
        ok, bad = window_match({(1, 1)}, ulm_of_ledger(led))
        assert ok and not bad

    def test_claims_entail_their_downward_closure(self):
        script = make_pair_script([[(1, 3)]] * 3)
        led = realize_pairs(script, identity_landing(4), 2)
        assert ulm_of_ledger(led).at(1) == 3

    def test_window_match_flags_an_inflated_level(self):
        ok, bad = window_match({(0, 1), (1, 2)}, UlmVector.of([2, 2]))
        assert not ok
        assert bad == [[0, 2]]

    @given(st.data())
    @settings(max_examples=40, deadline=None)
    def test_settled_claims_always_hold_at_the_horizon(self, data):
        rows = data.draw(
            st.lists(
                st.lists(
                    st.tuples(
                        st.integers(min_value=0, max_value=3),
                        st.integers(min_value=1, max_value=2),
                    ),
                    max_size=3,
                ),
                min_size=1,
                max_size=6,
            )
        )
        rows = rows + [rows[-1], rows[-1]]
        script = make_pair_script(rows)
        led = realize_pairs(script, identity_landing(12), 2)
        final = ulm_of_ledger(led)
        for n, k in close_down(script.declared_limit):
            assert final.at(n) == INF or final.at(n) >= k
        for summand in led.summands:
            exps = [h[1] for h in summand.history]
            assert all(b > a for a, b in zip(exps, exps[1:]))


def pi1_script(horizon, limit, exit_stage=0):
    if limit == 1:
        return gen_script({"kind": "pi1", "horizon": horizon, "limit": 1})
    return gen_script({"kind": "pi1", "horizon": horizon, "limit": 0, "exit": exit_stage})


class TestCyclicRun:
    """One cyclic group against its square."""

    def test_limit_true_builds_the_single_copy(self):
        log = run_group_reduction("cyclic_pi1", {"p": 2, "length": 2}, pi1_script(8, 1))
        final = log["final"]
        assert final["outcome"] == "single"
        assert final["ulm"] == [0, 1]
        assert final["matches_case"] and final["settled"]
        assert final["summands"] == [2]
        assert log["construction"] == "pgroups.cyclic_pi1"

    def test_exit_doubles_the_group(self):
        log = run_group_reduction("cyclic_pi1", {"p": 2, "length": 2}, pi1_script(8, 0, 3))
        final = log["final"]
        assert final["outcome"] == "double"
        assert final["ulm"] == [0, 2]
        assert final["matches_case"]
        assert final["order_exponent"] == 4
        doubling = [st["s"] for st in log["stages"] if st["created"]]
        assert doubling == [0, 3]

    def test_immediate_exit_doubles_at_stage_zero(self):
        log = run_group_reduction("cyclic_pi1", {"p": 3, "length": 1}, pi1_script(4, 0, 0))
        assert log["stages"][0]["created"] == [[0, 1], [1, 1]]
        assert log["final"]["ulm"] == [2]

    def test_mode_rejects_foreign_scripts_and_bad_params(self):
        with pytest.raises(ScriptError):
            run_group_reduction("cyclic_pi1", {"p": 2, "length": 2},
                                gen_script({"kind": "pi2", "horizon": 3, "limit": 0}))
        with pytest.raises(ScriptError):
            run_group_reduction("cyclic_pi1", {"p": 2, "length": 0}, pi1_script(3, 1))
        with pytest.raises(ScriptError):
            run_group_reduction("unknown", {}, pi1_script(3, 1))


def dce_script(horizon, limit, entry1=None, entry2=None):
    spec = {"kind": "dsigma2", "horizon": horizon, "limit": limit, "ce": True}
    if entry1 is not None:
        spec["entry1"] = entry1
    if entry2 is not None:
        spec["entry2"] = entry2
    return gen_script(spec)


class TestFiniteDceRun:
    """Nested triple of finite groups under a difference script."""

    PARAMS = {"p": 2, "minus": [2], "mid": [2, 1], "plus": [2, 1, 1]}

    def test_three_settled_outcomes(self):
        cases = [
            (dce_script(8, (0, 0)), "minus", [0, 1]),
            (dce_script(8, (1, 0), entry1=2), "mid", [1, 1]),
            (dce_script(8, (1, 1), entry1=2, entry2=5), "plus", [2, 1]),
        ]
        for script, outcome, ulm in cases:
            final = run_group_reduction("finite_dce", self.PARAMS, script)["final"]
            assert final["outcome"] == outcome
            assert final["ulm"] == ulm
            assert final["matches_case"] and final["settled"]

    def test_settled_outcome_agrees_with_the_table_oracle(self):
        log = run_group_reduction("finite_dce", self.PARAMS, dce_script(8, (1, 0), entry1=1))
        shape = tuple(sorted(log["final"]["summands"], reverse=True))
        assert ulm_bruteforce(cyclic_sum_table(2, shape)).to_obj() == log["final"]["ulm"]

    def test_non_ce_components_are_rejected(self):
        wandering = gen_script(
            {"kind": "dsigma2", "horizon": 6, "limit": (0, 0), "flips1": (1,)}
        )
        with pytest.raises(ScriptError):
            run_group_reduction("finite_dce", self.PARAMS, wandering)

    def test_chain_hypotheses_are_checked(self):
        script = dce_script(4, (0, 0))
        bad_nest = {"p": 2, "minus": [2, 2], "mid": [2, 1], "plus": [2, 1, 1]}
        with pytest.raises(ScriptError):
            run_group_reduction("finite_dce", bad_nest, script)
        not_proper = {"p": 2, "minus": [2], "mid": [2], "plus": [2, 1]}
        with pytest.raises(ScriptError):
            run_group_reduction("finite_dce", not_proper, script)
        longer = {"p": 2, "minus": [2], "mid": [2, 3], "plus": [2, 3, 1]}
        with pytest.raises(ScriptError):
            run_group_reduction("finite_dce", longer, script)


class TestTailRun:
    """Unbounded growth at one level on believing stages."""

    def test_believing_stages_grow_the_count(self):
        script = gen_script({"kind": "pi2", "horizon": 10, "limit": 1, "period": 2})
        log = run_group_reduction("tail_pi2", {"p": 3, "level": 1, "base": [4, 5]}, script)
        final = log["final"]
        assert final["outcome"] == "unbounded"
        assert final["count"] == len(final["believing_stages"])
        assert final["limit_ulm"] == [0, INF, 0, 1, 1]

    def test_finitely_many_ones_freeze_the_count(self):
        script = gen_script({"kind": "pi2", "horizon": 10, "limit": 0, "ones": (1, 4)})
        final = run_group_reduction("tail_pi2", {"p": 3, "level": 1}, script)["final"]
        assert final["outcome"] == "frozen"
        assert final["count"] == 2
        assert final["limit_ulm"] == [0, 2]

    def test_base_must_sit_above_the_counted_level(self):
        script = gen_script({"kind": "pi2", "horizon": 4, "limit": 1})
        with pytest.raises(ScriptError):
            run_group_reduction("tail_pi2", {"p": 2, "level": 1, "base": [2]}, script)

    @given(st.data())
    @settings(max_examples=30, deadline=None)
    def test_count_increases_exactly_on_believing_stages(self, data):
        horizon = data.draw(st.integers(min_value=1, max_value=20))
        limit = data.draw(st.integers(min_value=0, max_value=1))
        if limit:
            period = data.draw(st.integers(min_value=1, max_value=4))
            script = gen_script(
                {"kind": "pi2", "horizon": horizon, "limit": 1, "period": period}
            )
        else:
            ones = data.draw(
                st.lists(st.integers(min_value=0, max_value=horizon - 1), max_size=4)
            )
            script = gen_script({"kind": "pi2", "horizon": horizon, "limit": 0, "ones": ones})
        log = run_group_reduction("tail_pi2", {"p": 2, "level": 0, "base": [3]}, script)
        trace = log["final"]["count_trace"]
        assert all(b >= a for a, b in zip(trace, trace[1:]))
        for s in range(horizon):
            step = trace[s] - (trace[s - 1] if s else 0)
            assert step == (1 if script.table[s] == 1 else 0)


class TestMarkedRun:
    """Count matching at the marked level under a three-case script."""

    PARAMS = {
        "p": 2,
        "marked_level": 0,
        "tail_level": 2,
        "count_mid": 2,
        "count_plus": 3,
    }

    def test_settling_outside_converts_the_surplus(self):
        script = gen_script(
            {"kind": "dsigma2", "horizon": 8, "limit": (0, 0), "flips1": (0, 1)}
        )
        log = run_group_reduction("marked_dsigma2", self.PARAMS, script)
        final = log["final"]
        assert final["outcome"] == "cleared"
        assert final["marked_count"] == 0 and final["matches_case"]
        converted = [c for stage in log["stages"] for c in stage["converted"]]
        assert converted == [[0, 1, 3], [1, 1, 3]]
        assert final["limit_ulm"] == [0, 0, INF]

    def test_middle_and_outer_counts_settle(self):
        mid = gen_script({"kind": "dsigma2", "horizon": 8, "limit": (1, 0), "ce": True, "entry1": 1})
        final = run_group_reduction("marked_dsigma2", self.PARAMS, mid)["final"]
        assert final["outcome"] == "count_mid" and final["marked_count"] == 2
        outer = gen_script(
            {"kind": "dsigma2", "horizon": 8, "limit": (1, 1), "ce": True, "entry1": 1, "entry2": 4}
        )
        final = run_group_reduction("marked_dsigma2", self.PARAMS, outer)["final"]
        assert final["outcome"] == "count_plus" and final["marked_count"] == 3
        assert final["matches_case"]

    def test_overshoot_reverts_to_the_prior_cohort(self):
        script = gen_script(
            {"kind": "dsigma2", "horizon": 6, "limit": (1, 0), "flips2": (3,)}
        )
        assert [pair for pair in script.table[2:5]] == [(1, 0), (1, 1), (1, 0)]
        log = run_group_reduction("marked_dsigma2", self.PARAMS, script)
        grown = log["stages"][3]["created"]
        assert [sid for sid, e in grown if e == 1]
        shrunk = log["stages"][4]["converted"]
        newcomer = [sid for sid, e in log["stages"][3]["created"] if e == 1][0]
        assert [sid for sid, old, new in shrunk] == [newcomer]

    def test_every_stage_matches_its_case_target(self):
        script = gen_script(
            {"kind": "dsigma2", "horizon": 10, "limit": (1, 0), "flips1": (2,), "flips2": (5, 7)}
        )
        log = run_group_reduction("marked_dsigma2", self.PARAMS, script)
        targets = (0, 2, 3)
        for stage in log["stages"]:
            u = UlmVector.of(stage["ulm"])
            assert u.at(0) == targets[stage["drive"]]

    def test_tail_count_grows_every_stage(self):
        script = gen_script({"kind": "dsigma2", "horizon": 7, "limit": (1, 1), "ce": True, "entry1": 1, "entry2": 3})
        log = run_group_reduction("marked_dsigma2", self.PARAMS, script)
        assert log["final"]["tail_trace"] == list(range(1, 8))

    def test_parameter_hypotheses_are_checked(self):
        script = gen_script({"kind": "dsigma2", "horizon": 3, "limit": (0, 0)})
        bad = dict(self.PARAMS)
        bad["marked_level"], bad["tail_level"] = 2, 1
        with pytest.raises(ScriptError):
            run_group_reduction("marked_dsigma2", bad, script)
        equal_counts = dict(self.PARAMS, count_plus=2)
        with pytest.raises(ScriptError):
            run_group_reduction("marked_dsigma2", equal_counts, script)
        clashing_base = dict(self.PARAMS, base=[1])
        with pytest.raises(ScriptError):
            run_group_reduction("marked_dsigma2", clashing_base, script)

    @given(st.data())
    @settings(max_examples=30, deadline=None)
    def test_fuzzed_scripts_land_on_their_case(self, data):
        horizon = data.draw(st.integers(min_value=2, max_value=16))
        limit = data.draw(st.sampled_from([(0, 0), (1, 0), (1, 1)]))
        stages = st.lists(
            st.integers(min_value=0, max_value=horizon - 2), max_size=3
        )
        script = gen_script(
            {
                "kind": "dsigma2",
                "horizon": horizon,
                "limit": limit,
                "flips1": data.draw(stages),
                "flips2": data.draw(stages),
            }
        )
        log = run_group_reduction("marked_dsigma2", self.PARAMS, script)
        final = log["final"]
        assert final["settled"] and final["matches_case"]
        trace = final["tail_trace"]
        assert all(b > a for a, b in zip(trace, trace[1:]))


class TestTwoInfiniteRun:
    """Movable-front counting at the marked level."""

    PARAMS = {"p": 2, "marked_level": 0, "tail_level": 3, "base": [5]}

    def test_two_gaps_settle_on_count_two(self):
        script = gen_script({"kind": "ce_enum", "horizon": 24, "complement": (1, 3)})
        log = run_group_reduction("two_infinite_pi3", self.PARAMS, script)
        final = log["final"]
        assert final["gaps"] == [1, 3]
        assert final["marked_count"] == 2
        assert final["matches_case"] and final["settled"]
        assert final["limit_ulm"] == [2, 0, 0, INF, 1]

    def test_marked_count_tracks_the_front_at_every_stage(self):
        script = gen_script({"kind": "ce_enum", "horizon": 20, "complement": (0, 2)})
        log = run_group_reduction("two_infinite_pi3", self.PARAMS, script)
        for stage in log["stages"]:
            assert UlmVector.of(stage["ulm"]).at(0) == len(stage["drive"])

    def test_tail_count_grows_every_stage(self):
        script = gen_script({"kind": "ce_enum", "horizon": 12, "complement": (2,)})
        log = run_group_reduction("two_infinite_pi3", self.PARAMS, script)
        trace = log["final"]["tail_trace"]
        assert all(b > a for a, b in zip(trace, trace[1:]))

    def test_empty_complement_reads_zero(self):
        script = gen_script({"kind": "ce_enum", "horizon": 16, "complement": ()})
        final = run_group_reduction("two_infinite_pi3", self.PARAMS, script)["final"]
        assert final["gaps"] == []
        assert final["marked_count"] == 0

    @given(st.data())
    @settings(max_examples=20, deadline=None)
    def test_fuzzed_gap_sets_are_counted(self, data):
        gaps = data.draw(
            st.lists(st.integers(min_value=0, max_value=5), max_size=3, unique=True)
        )
        script = gen_script({"kind": "ce_enum", "horizon": 40, "complement": gaps})
        final = run_group_reduction("two_infinite_pi3", self.PARAMS, script)["final"]
        assert final["marked_count"] == len(gaps)
        assert final["matches_case"] and final["settled"]


class TestLengthOmegaRun:
    """The ladder-fed realizer at length omega."""

    def wide_landing(self):
        return [[n] for n in range(40)]

    def test_exit_leaves_only_the_ladder(self):
        script = pi1_script(6, 0, 2)
        log = run_group_reduction(
            "length_omega_pi3",
            {"p": 2, "landing_rows": self.wide_landing(), "claim_rows": [[(0, 2)]] * 6},
            script,
        )
        final = log["final"]
        assert final["outcome"] == "ladder_only"
        assert final["ladder"] == [1, 3, 5, 7, 9]
        assert final["believed"] == [[1, 1], [3, 1], [5, 1], [7, 1], [9, 1]]
        assert final["claims_hold"] and final["window_ok"]
        assert UlmVector.of(final["ulm"]).at(0) == 0

    def test_holding_membership_tracks_the_claims(self):
        script = pi1_script(6, 1)
        log = run_group_reduction(
            "length_omega_pi3",
            {"p": 2, "landing_rows": self.wide_landing(), "claim_rows": [[(0, 2)]] * 6},
            script,
        )
        final = log["final"]
        assert final["outcome"] == "tracks_claims"
        assert [0, 2] in final["believed"]
        assert UlmVector.of(final["ulm"]).at(0) == 2
        assert final["claims_hold"] and final["window_ok"] and final["settled"]

    def test_moving_rung_retracts_and_reparks(self):
        landing = [[n] for n in range(20)]
        landing[1] = [1, 1, 3]
        script = pi1_script(4, 1)
        log = run_group_reduction(
            "length_omega_pi3",
            {"p": 2, "landing_rows": landing, "claim_rows": [[]] * 4},
            script,
        )
        final = log["final"]
        assert final["ladder"][0] == 3
        assert final["claims_hold"]
        top_rung = max(final["ladder"])
        assert any(e > top_rung + 1 for e in final["summands"])

    def test_claim_rows_must_be_cumulative_and_cover_the_horizon(self):
        script = pi1_script(3, 1)
        with pytest.raises(ScriptError):
            run_group_reduction(
                "length_omega_pi3",
                {"p": 2, "landing_rows": self.wide_landing(), "claim_rows": [[(0, 1)], [], []]},
                script,
            )
        with pytest.raises(ScriptError):
            run_group_reduction(
                "length_omega_pi3",
                {"p": 2, "landing_rows": self.wide_landing(), "claim_rows": [[]]},
                script,
            )

    def test_narrow_landing_rows_fail_loudly(self):
        script = pi1_script(4, 1)
        with pytest.raises(ScriptError):
            run_group_reduction(
                "length_omega_pi3",
                {"p": 2, "landing_rows": [[0], [1], [2]], "claim_rows": [[]] * 4},
                script,
            )


class TestRunDeterminism:
    """Identical inputs must produce byte-identical logs."""

    def test_two_executions_serialize_identically(self):
        def once(seed_mode):
            if seed_mode == "movable":
                script = gen_script({"kind": "ce_enum", "horizon": 24, "complement": (1, 3)})
                return run_group_reduction(
                    "two_infinite_pi3",
                    {"p": 2, "marked_level": 0, "tail_level": 3, "base": [5]},
                    script,
                )
            script = gen_script(
                {"kind": "dsigma2", "horizon": 8, "limit": (1, 0), "flips2": (3,)}
            )
            return run_group_reduction(
                "marked_dsigma2",
                {"p": 2, "marked_level": 0, "tail_level": 2, "count_mid": 2, "count_plus": 3},
                script,
            )

        for mode in ("movable", "marked"):
            assert canonical_dumps(once(mode)) == canonical_dumps(once(mode))

    def test_envelope_shape(self):
        log = run_group_reduction("cyclic_pi1", {"p": 2, "length": 1}, pi1_script(3, 1))
        assert log["format"] == "limitstage.run.v1"
        assert set(log) == {"format", "construction", "params", "script", "stages", "final"}
        for stage in log["stages"]:
            assert set(stage) == {"s", "drive", "created", "converted", "new_atoms", "ulm"}
