"""Exact real algebra, closure enumeration, and the field reductions."""

import json
from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given, settings, strategies as st

from limitstage.finitestructs import InvariantError, ScriptError
from limitstage.oracles import gen_script
from limitstage.realfields import (
    BaseField,
    ClosureTarget,
    DEPTH_DEFAULT,
    FIELD_MODES,
    FieldDomain,
    QField,
    RealAlg,
    RefinementError,
    TransBase,
    add_elems,
    alg_add,
    alg_compare,
    alg_inv,
    alg_mul,
    alg_neg,
    alg_sub,
    base_elem,
    census_filled,
    compare_elems,
    condition_pairs,
    count_roots,
    elem_from_fraction,
    enum_chain,
    equal_elems,
    euler_base,
    idiv,
    imul,
    interval_sign,
    inv_elem,
    isolate_intervals,
    isolate_roots,
    make_base,
    make_elem,
    mp_const,
    mp_eval_point,
    mp_mul,
    mp_subst,
    mp_var,
    mul_elems,
    neg_elem,
    p_squarefree,
    p_trim,
    qf_eval,
    refinement_depth,
    rf_make,
    run_field_reduction,
    sign,
    sub_elems,
    sturm_chain,
    substitute_recover,
)
from limitstage.serial import canonical_dumps, frac_parse

F = Fraction

SQRT2 = RealAlg.make((-2, 0, 1), (1, 2))
SQRT3 = RealAlg.make((-3, 0, 1), (0, 3))
CBRT2 = RealAlg.make((-2, 0, 0, 1), (1, 2))


def euler_field():
    return BaseField(euler_base())


class TestIntervals:
    def test_arithmetic(self):
        assert imul((F(1), F(2)), (F(-3), F(-1))) == (F(-6), F(-1))
        assert idiv((F(1), F(2)), (F(2), F(4))) == (F(1, 4), F(1))

    def test_division_by_straddling_interval_raises(self):
        with pytest.raises(InvariantError):
            idiv((F(1), F(2)), (F(-1), F(1)))

    def test_sign_of_boxes(self):
        assert interval_sign((F(1), F(2))) == 1
        assert interval_sign((F(-2), F(-1))) == -1
        assert interval_sign((F(-1), F(1))) == 0


class TestPolynomialMaps:
    """The sparse multivariate layer under the coefficient adapters."""

    def test_product_evaluates_correctly(self):
        x = mp_var(0, 2)
        y = mp_var(1, 2)
        p = mp_mul(x, y)
        assert mp_eval_point(p, (F(3), F(5))) == 15

    def test_substitution_drops_the_slot(self):
        x = mp_var(0, 2)
        y = mp_var(1, 2)
        p = mp_mul(x, y)
        q = mp_subst(p, 0, F(2))
        assert mp_eval_point(q, (F(7),)) == 14

    def test_constant_zero_is_the_empty_dict(self):
        assert mp_const(0, 3) == {}


class TestRationalFunctions:
    def test_common_factor_cancels(self):
        # (x^2 - 1) / (x - 1) reduces to x + 1
        x = mp_var(0, 1)
        num = mp_mul(x, x)
        num = {k: v for k, v in num.items()}
        num[()] = F(-1)
        den = dict(x)
        den[()] = F(-1)
        r = rf_make(num, den, 1)
        assert mp_eval_point(r[0], (F(5),)) / mp_eval_point(r[1], (F(5),)) == 6

    def test_zero_numerator_is_canonical(self):
        num = mp_const(0, 1)
        den = mp_var(0, 1)
        r = rf_make(num, den, 1)
        assert r[0] == {}

    def test_zero_denominator_raises(self):
        with pytest.raises(InvariantError):
            rf_make(mp_const(1, 1), mp_const(0, 1), 1)


class TestBaseStreams:
    def test_boxes_nest_strictly(self):
        base = make_base(2)
        for i in range(2):
            prev = base.interval(i, 0)
            for rank in range(1, 5):
                box = base.interval(i, rank)
                assert prev[0] < box[0] and box[1] < prev[1]
                prev = box

    def test_distinct_elements_separate(self):
        base = make_base(3)
        boxes = base.boxes(F(1, 2**20))
        for i in range(3):
            for j in range(i + 1, 3):
                a, b = boxes[i], boxes[j]
                assert a[1] < b[0] or b[1] < a[0]

    def test_euler_brackets_the_constant(self):
        base = euler_base()
        box = base.refine(0, F(1, 10**6))
        assert box[0] < F(2718282, 10**6) < box[1]

    def test_non_nesting_stream_is_rejected(self):
        tb = TransBase([lambda rank: (F(0), F(1))])
        with pytest.raises(InvariantError):
            tb.interval(0, 1)

    def test_empty_interval_is_rejected(self):
        tb = TransBase([lambda rank: (F(1), F(1))])
        with pytest.raises(InvariantError):
            tb.interval(0, 0)


class TestFieldElements:
    def test_square_root_of_two_is_positive(self):
        assert sign(SQRT2) == 1

    def test_difference_with_itself_is_zero(self):
        x = SQRT2.elem()
        assert sign(sub_elems(x, x)) == 0

    def test_transcendental_exceeds_its_truncation(self):
        field = euler_field()
        e = base_elem(field, 0)
        r = elem_from_fraction(field, F(2718, 1000))
        assert sign(sub_elems(e, r)) == 1

    def test_product_of_roots_is_exact(self):
        x = SQRT2.elem()
        two = elem_from_fraction(RealAlg.field(), 2)
        assert equal_elems(mul_elems(x, x), two)

    def test_negation_mirrors_the_interval(self):
        x = SQRT2.elem()
        n = neg_elem(x)
        assert sign(n) == -1
        assert equal_elems(neg_elem(n), x)

    def test_inverse_multiplies_to_one(self):
        x = SQRT2.elem()
        one = elem_from_fraction(RealAlg.field(), 1)
        assert equal_elems(mul_elems(x, inv_elem(x)), one)

    def test_inverse_of_zero_raises(self):
        zero = elem_from_fraction(RealAlg.field(), 0)
        with pytest.raises(InvariantError):
            inv_elem(zero)

    def test_compare_orders_by_value(self):
        assert compare_elems(SQRT2.elem(), SQRT3.elem()) == -1
        assert compare_elems(SQRT3.elem(), SQRT2.elem()) == 1
        assert compare_elems(SQRT2.elem(), SQRT2.elem()) == 0

    def test_make_elem_rejects_empty_interval(self):
        with pytest.raises(InvariantError):
            make_elem(RealAlg.field(), [F(-2), F(0), F(1)], F(2), F(1), None)

    def test_make_elem_rejects_root_at_endpoint(self):
        with pytest.raises(InvariantError):
            make_elem(RealAlg.field(), [F(-1), F(0), F(1)], F(1), F(2), None)

    def test_make_elem_rejects_two_roots_inside(self):
        with pytest.raises(InvariantError):
            make_elem(RealAlg.field(), [F(-2), F(0), F(1)], F(-2), F(2), None)

    def test_serialized_shape(self):
        obj = SQRT2.elem().to_obj()
        assert set(obj) == {"coeffs", "interval", "psi"}
        assert obj["psi"][0] == "alg"


class TestSignDepthCap:
    def test_indistinguishable_difference_exhausts_the_depth(self):
        """A rational closer than the working tolerance stays undecided."""
        field = euler_field()
        e = base_elem(field, 0)
        tail = sum(F(1, factorial(j)) for j in range(41))
        d = sub_elems(e, elem_from_fraction(field, tail))
        with pytest.raises(RefinementError) as err:
            sign(d)
        assert err.value.depth == DEPTH_DEFAULT
        assert "2^-64" in str(err.value)

    def test_equality_at_the_cap_also_raises(self):
        field = euler_field()
        e = base_elem(field, 0)
        tail = sum(F(1, factorial(j)) for j in range(41))
        with pytest.raises(RefinementError):
            equal_elems(e, elem_from_fraction(field, tail))

    def test_depth_is_configurable(self, monkeypatch):
        monkeypatch.setenv("LIMITSTAGE_DEPTH", "128")
        assert refinement_depth() == 128

    def test_tiny_or_bad_settings_fall_back(self, monkeypatch):
        monkeypatch.setenv("LIMITSTAGE_DEPTH", "4")
        assert refinement_depth() == DEPTH_DEFAULT
        monkeypatch.setenv("LIMITSTAGE_DEPTH", "plenty")
        assert refinement_depth() == DEPTH_DEFAULT


class TestRealAlgebra:
    def test_known_value_roundtrip(self):
        obj = SQRT2.to_obj()
        back = RealAlg.from_obj(obj)
        assert alg_compare(back, SQRT2) == 0

    def test_constant_polynomial_is_rejected(self):
        with pytest.raises(InvariantError):
            RealAlg.make((5,), (0, 1))

    def test_sum_of_conjugates(self):
        minus = alg_neg(SQRT2)
        assert alg_compare(alg_add(SQRT2, minus), RealAlg.from_fraction(0)) == 0

    def test_surd_arithmetic(self):
        six = RealAlg.from_fraction(6)
        prod = alg_mul(SQRT2, SQRT3)
        assert alg_compare(alg_mul(prod, prod), six) == 0

    def test_compare_is_antisymmetric(self):
        assert alg_compare(SQRT2, SQRT3) == -alg_compare(SQRT3, SQRT2)

    @settings(max_examples=15, deadline=None)
    @given(st.data())
    def test_field_axioms_hold_exactly(self, data):
        """Associativity, commutativity, distributivity, inverses."""
        pool = [
            SQRT2,
            SQRT3,
            RealAlg.from_fraction(F(1, 2)),
            RealAlg.from_fraction(-2),
            RealAlg.from_fraction(0),
        ]
        x = data.draw(st.sampled_from(pool))
        y = data.draw(st.sampled_from(pool))
        z = data.draw(st.sampled_from(pool))
        zero = RealAlg.from_fraction(0)
        one = RealAlg.from_fraction(1)
        assert alg_compare(alg_add(x, y), alg_add(y, x)) == 0
        assert alg_compare(alg_mul(x, y), alg_mul(y, x)) == 0
        assert alg_compare(alg_add(alg_add(x, y), z), alg_add(x, alg_add(y, z))) == 0
        assert alg_compare(alg_mul(alg_mul(x, y), z), alg_mul(x, alg_mul(y, z))) == 0
        lhs = alg_mul(x, alg_add(y, z))
        rhs = alg_add(alg_mul(x, y), alg_mul(x, z))
        assert alg_compare(lhs, rhs) == 0
        assert alg_compare(alg_sub(x, x), zero) == 0
        if alg_compare(x, zero) != 0:
            assert alg_compare(alg_mul(x, alg_inv(x)), one) == 0


class TestRootIsolation:
    def test_quadratic_has_both_square_roots(self):
        roots = isolate_roots((-2, 0, 1))
        assert len(roots) == 2
        assert alg_compare(roots[0], alg_neg(SQRT2)) == 0
        assert alg_compare(roots[1], SQRT2) == 0

    def test_cubic_with_three_rational_roots(self):
        roots = isolate_roots((0, -1, 0, 1))
        assert len(roots) == 3
        for got, want in zip(roots, (-1, 0, 1)):
            assert alg_compare(got, RealAlg.from_fraction(want)) == 0

    def test_rootless_polynomial(self):
        assert isolate_roots((1, 0, 1)) == []

    def test_linear_over_a_transcendental_base(self):
        field = euler_field()
        coeffs = [field.neg(field.var(0)), field.one()]
        roots = isolate_roots(coeffs, field)
        assert len(roots) == 1
        assert equal_elems(roots[0], base_elem(field, 0))
        assert roots[0].psi[0] == "root"

    def test_roots_come_back_ascending(self):
        roots = isolate_roots((2, -1, -2, 1))  # (x-2)(x-1)(x+1)
        vals = [-1, 1, 2]
        for got, want in zip(roots, vals):
            assert alg_compare(got, RealAlg.from_fraction(want)) == 0

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(-3, 3), min_size=2, max_size=5))
    def test_sturm_count_matches_grid_scanning(self, coeffs):
        """Isolation agrees with a brute sign walk at 1/64 spacing."""
        field = RealAlg.field()
        sq = p_squarefree(field, p_trim(field, [F(c) for c in coeffs]))
        if len(sq) <= 1:
            return
        windows = isolate_intervals(field, sq)
        deg = len(sq) - 1
        bound = 1 + max(abs(c) for c in sq[:-1]) / abs(sq[-1]) if deg else F(1)
        step = F(1, 64)
        count = 0
        last = 0
        k = F(int(-(bound + 1) * 64) - 1, 64)
        while k <= bound + 1:
            v = sum(c * k**i for i, c in enumerate(sq))
            s = (v > 0) - (v < 0)
            if s == 0:
                count += 1
                last = 0
            else:
                if last and s != last:
                    count += 1
                last = s
            k += step
        assert len(windows) == count

    def test_count_roots_over_a_window(self):
        field = RealAlg.field()
        chain = sturm_chain(field, [F(-2), F(0), F(1)])
        assert count_roots(field, chain, F(0), F(2)) == 1
        assert count_roots(field, chain, F(-2), F(2)) == 2


class TestQfEval:
    def test_product_of_surds(self):
        atoms = [["mul", 0, 0, 1, 1]]
        assert qf_eval(atoms, {0: SQRT2, 1: RealAlg.from_fraction(2)})

    def test_order_atoms_both_ways(self):
        threehalf = RealAlg.from_fraction(F(3, 2))
        assert qf_eval([["lt", 0, 1, 1]], {0: SQRT2, 1: threehalf})
        assert not qf_eval([["lt", 1, 0, 1]], {0: SQRT2, 1: threehalf})
        assert qf_eval([["lt", 1, 0, 0]], {0: SQRT2, 1: threehalf})

    def test_transcendental_cancellation(self):
        field = euler_field()
        e = base_elem(field, 0)
        vals = {0: e, 1: neg_elem(e), 2: elem_from_fraction(field, 0)}
        assert qf_eval([["add", 0, 1, 2, 1]], vals)

    def test_unassigned_constant_raises(self):
        with pytest.raises(ScriptError):
            qf_eval([["lt", 0, 5, 1]], {0: SQRT2})

    def test_unknown_atom_shape_raises(self):
        with pytest.raises(ScriptError):
            qf_eval([["xor", 0, 1, 1]], {0: SQRT2, 1: SQRT3})


class TestSubstituteRecover:
    def test_trivial_when_nothing_is_extra(self):
        field = euler_field()
        p_t = {0: elem_from_fraction(field, 3)}
        out = substitute_recover(field, 0, p_t, dict(p_t), [])
        assert out["e_prime"] is None
        assert out["rounds"] == 0
        assert out["embedding"] == p_t

    def test_positivity_survives_the_substitution(self):
        field = euler_field()
        zero = elem_from_fraction(field, 0)
        p_t = {1: zero}
        p_s = {1: zero, 0: base_elem(field, 0)}
        sentences = [["lt", 1, 0, 1]]
        out = substitute_recover(field, 0, p_t, p_s, sentences)
        e_prime = frac_parse(out["e_prime"])
        assert e_prime > 0
        assert qf_eval(sentences, out["embedding"])

    def test_square_root_witness_is_rederived(self):
        field = euler_field()
        e = base_elem(field, 0)
        sq = isolate_roots([field.neg(field.var(0)), field.zero(), field.one()], field)
        root = sq[1]
        zero = elem_from_fraction(field, 0)
        p_t = {2: zero}
        p_s = {2: zero, 0: e, 1: root}
        sentences = [["mul", 1, 1, 0, 1], ["lt", 2, 1, 1]]
        out = substitute_recover(field, 0, p_t, p_s, sentences)
        recovered = out["embedding"][1]
        assert recovered.degree() == 2
        assert qf_eval(sentences, out["embedding"])

    def test_unsatisfiable_demand_exhausts_the_depth(self):
        field = euler_field()
        zero = elem_from_fraction(field, 0)
        p_t = {1: zero}
        p_s = {1: zero, 0: base_elem(field, 0)}
        with pytest.raises(RefinementError):
            substitute_recover(field, 0, p_t, p_s, [["lt", 0, 1, 1]])


class TestClosureEnumeration:
    def test_rational_closure_opens_with_unit_heights(self):
        field = BaseField(make_base(2))
        ground = ClosureTarget(field, 0)
        first = ground.enum_prefix(7)
        wants = [-1, 0, 1, -2, F(-1, 2), F(1, 2), 2]
        for got, want in zip(first, wants):
            assert equal_elems(got, elem_from_fraction(field, want))

    def test_base_elements_open_their_closures(self):
        field = BaseField(make_base(2))
        one_t = ClosureTarget(field, 1)
        assert equal_elems(one_t.enum_prefix(1)[0], base_elem(field, 0))
        two_t = ClosureTarget(field, 2)
        pre = two_t.enum_prefix(2)
        assert equal_elems(pre[0], base_elem(field, 0))
        assert equal_elems(pre[1], base_elem(field, 1))

    def test_membership_tracks_the_support(self):
        field = BaseField(make_base(2))
        target = ClosureTarget(field, 1)
        assert target.contains(base_elem(field, 0))
        assert not target.contains(base_elem(field, 1))
        assert target.contains(elem_from_fraction(field, F(7, 3)))

    def test_equal_values_share_one_object_across_targets(self):
        """Identity-based machine bookkeeping needs pooled members."""
        field = BaseField(make_base(2))
        t1 = ClosureTarget(field, 1)
        t2 = ClosureTarget(field, 2)
        zero = elem_from_fraction(field, 0)
        a = next(x for x in t1.enum_prefix(6) if equal_elems(x, zero))
        b = next(x for x in t2.enum_prefix(6) if equal_elems(x, zero))
        assert a is b

    def test_oversized_closure_is_rejected(self):
        field = BaseField(make_base(1))
        with pytest.raises(InvariantError):
            ClosureTarget(field, 2)


class TestEnumChain:
    def test_rows_climb_then_settle(self):
        field = BaseField(make_base(2))
        pres = [
            elem_from_fraction(field, 1),
            elem_from_fraction(field, F(-1, 2)),
            base_elem(field, 0),
            elem_from_fraction(field, 3),
            add_elems(base_elem(field, 0), base_elem(field, 1)),
        ]
        out = enum_chain(pres, 5, 3)
        assert out["picks"] == [2, 4]
        assert out["settled"] == [True, True, False]
        assert out["f"][0] == [1, 2, 2, 2, 2]
        assert out["f"][1] == [1, 2, 3, 4, 4]
        assert out["f"][2] == [1, 2, 3, 4, 5]

    def test_rows_are_nondecreasing(self):
        field = BaseField(make_base(2))
        pres = [
            base_elem(field, 0),
            elem_from_fraction(field, 2),
            base_elem(field, 1),
        ]
        out = enum_chain(pres, 6, 2)
        for row in out["f"]:
            assert all(a <= b for a, b in zip(row, row[1:]))


class TestCensus:
    def test_census_counts_filled_base_cuts(self):
        field = BaseField(make_base(2))
        images = [base_elem(field, 0), elem_from_fraction(field, 5)]
        assert census_filled(images, field, 2) == [0]

    def test_census_grows_along_the_chain(self):
        field = BaseField(make_base(2))
        seen = []
        for j in range(3):
            prefix = ClosureTarget(field, j).enum_prefix(8)
            seen.append(census_filled(prefix, field, 2))
        assert seen[0] == []
        assert seen[1] == [0]
        assert seen[2] == [0, 1]
        for small, big in zip(seen, seen[1:]):
            assert set(small) <= set(big)


class TestFieldDomain:
    def test_atom_stream_opens_with_the_diagonal(self):
        dom = FieldDomain(BaseField(make_base(1)))
        assert dom.atom_blocks(0) == [("add", 0, 0, 0), ("mul", 0, 0, 0)]
        adds = [a for a in dom.atom_blocks(1) if a[0] == "add"]
        assert adds[0] == ("add", 0, 0, 1)
        assert adds[1] == ("add", 0, 1, 0)

    def test_rebind_rederives_a_pinned_constant(self):
        field = BaseField(make_base(1))
        dom = FieldDomain(field)
        target = ClosureTarget(field, 1)
        prefix = target.enum_prefix(dom.rebind_window)
        one = next(x for x in prefix if equal_elems(x, elem_from_fraction(field, 1)))
        minus = next(x for x in prefix if equal_elems(x, elem_from_fraction(field, -1)))
        zero = next(x for x in prefix if equal_elems(x, elem_from_fraction(field, 0)))
        known = {0: one, 1: minus}
        decided = {("add", 0, 1, 2): 1}
        got = dom.rebind(target, known, [2], decided)
        assert got is not None and got[0] is zero

    def test_rebind_parks_what_nothing_pins(self):
        field = BaseField(make_base(1))
        dom = FieldDomain(field)
        target = ClosureTarget(field, 1)
        prefix = target.enum_prefix(4)
        known = {0: prefix[0]}
        assert dom.rebind(target, known, [1], {("add", 0, 0, 1): 0}) is None
        assert dom.rebind(target, known, [5], {}) is None

    def test_rebind_rejects_a_contradicted_restore(self):
        field = BaseField(make_base(1))
        dom = FieldDomain(field)
        target = ClosureTarget(field, 1)
        prefix = target.enum_prefix(4)
        known = {0: prefix[0], 1: prefix[1]}
        truth = dom.atom_truth_under(("add", 0, 1, 0), known)
        decided = {("add", 0, 1, 0): 1 - truth}
        assert dom.rebind(target, known, [], decided) is None


class TestConditionPairs:
    def test_floor_condition_filters_pairs(self):
        assert condition_pairs((2, 3, 1, 2, 2)) == [(0, 1), (2, 3), (2, 4), (3, 4)]

    def test_empty_and_constant(self):
        assert condition_pairs(()) == []
        assert condition_pairs((1, 1)) == [(0, 1)]


class TestFieldRuns:
    def test_modes_are_published(self):
        assert FIELD_MODES == ("alg_pi2", "findeg_dsigma2", "infdeg_pi3")

    def test_algebraic_limit_leaves_no_cut_filled(self):
        script = gen_script({"kind": "pi2", "horizon": 10, "limit": 1, "period": 3})
        out = run_field_reduction("alg_pi2", {}, script)
        fin = out["final"]
        assert fin["census"] == 0
        assert fin["target"] == "closure0"
        assert fin["matches_declared"]

    def test_divergent_guess_keeps_the_transcendental(self):
        script = gen_script({"kind": "pi2", "horizon": 10, "limit": 0, "ones": [2, 4]})
        out = run_field_reduction("alg_pi2", {}, script)
        fin = out["final"]
        assert fin["census"] == 1
        assert fin["filled"] == [0]
        assert fin["read_stage"] == 9
        assert fin["matches_declared"]

    def test_difference_membership_sets_degree_k(self):
        script = gen_script({
            "kind": "dsigma2", "horizon": 10, "limit": (1, 0), "flips2": [3],
        })
        out = run_field_reduction("findeg_dsigma2", {"k": 1}, script)
        fin = out["final"]
        assert fin["census"] == 1
        assert fin["matches_declared"]

    def test_double_membership_overshoots_by_one(self):
        script = gen_script({
            "kind": "dsigma2", "horizon": 10, "limit": (1, 1),
            "ce": True, "entry1": 1, "entry2": 4,
        })
        out = run_field_reduction("findeg_dsigma2", {"k": 1}, script)
        assert out["final"]["census"] == 2
        assert out["final"]["matches_declared"]

    def test_nonmembership_stays_below(self):
        script = gen_script({
            "kind": "dsigma2", "horizon": 10, "limit": (0, 0), "flips1": [2],
        })
        out = run_field_reduction("findeg_dsigma2", {"k": 1}, script)
        assert out["final"]["census"] == 0
        assert out["final"]["matches_declared"]

    def test_higher_declared_degree(self):
        script = gen_script({
            "kind": "dsigma2", "horizon": 10, "limit": (1, 0), "flips1": [2],
        })
        out = run_field_reduction("findeg_dsigma2", {"k": 2}, script)
        assert out["final"]["census"] == 2
        assert out["final"]["matches_declared"]

    def test_interleaved_retreats_keep_the_diagram_consistent(self):
        """Alternating case changes once resurrected a stale image set."""
        script = gen_script({
            "kind": "dsigma2", "horizon": 14, "limit": (1, 0),
            "flips1": [10, 11], "flips2": [2, 4],
        })
        out = run_field_reduction("findeg_dsigma2", {"k": 1}, script)
        fin = out["final"]
        assert fin["census"] == 1
        assert fin["maintained_ok"]
        assert fin["matches_declared"]

    def test_liminf_run_reaches_the_declared_value(self):
        script = gen_script({
            "kind": "liminf_fun", "horizon": 12, "limit": 2,
            "period": 3, "wave": 2, "pre": [(1, 1)],
        })
        out = run_field_reduction("infdeg_pi3", {}, script)
        fin = out["final"]
        assert fin["census"] == 2
        assert fin["filled"] == [0, 1]
        assert fin["matches_declared"]

    def test_envelopes_are_byte_identical(self):
        script = gen_script({"kind": "pi2", "horizon": 8, "limit": 0, "ones": [1]})
        a = run_field_reduction("alg_pi2", {}, script)
        b = run_field_reduction("alg_pi2", {}, script)
        assert canonical_dumps(a) == canonical_dumps(b)

    def test_envelope_roundtrips_through_json(self):
        script = gen_script({"kind": "pi2", "horizon": 6, "limit": 1, "period": 2})
        out = run_field_reduction("alg_pi2", {}, script)
        back = json.loads(canonical_dumps(out))
        assert back["format"] == "limitstage.run.v1"
        assert back["construction"] == "realfields.alg_pi2"
        assert len(back["stages"]) == 6

    def test_unknown_mode_raises(self):
        script = gen_script({"kind": "pi2", "horizon": 4, "limit": 1, "period": 2})
        with pytest.raises(ScriptError):
            run_field_reduction("galois", {}, script)

    def test_wrong_script_kind_raises(self):
        script = gen_script({"kind": "pi2", "horizon": 4, "limit": 1, "period": 2})
        with pytest.raises(ScriptError):
            run_field_reduction("findeg_dsigma2", {"k": 1}, script)

    def test_unexpected_parameters_raise(self):
        script = gen_script({"kind": "pi2", "horizon": 4, "limit": 1, "period": 2})
        with pytest.raises(ScriptError):
            run_field_reduction("alg_pi2", {"k": 1}, script)

    def test_degree_below_one_raises(self):
        script = gen_script({"kind": "dsigma2", "horizon": 4, "limit": (1, 0)})
        with pytest.raises(ScriptError):
            run_field_reduction("findeg_dsigma2", {"k": 0}, script)

    def test_empty_horizon_raises(self):
        script = gen_script({"kind": "pi2", "horizon": 0, "limit": 0})
        with pytest.raises(ScriptError):
            run_field_reduction("alg_pi2", {}, script)
