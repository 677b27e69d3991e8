"""Infinitary sentences in negation normal form, with classification and evaluation.

The module provides four things:

* a small AST for infinitary formulas: atoms and negated atoms, finite
  connectives, countable connectives backed by total generators,
  and tuple quantifiers;
* ``classify``, a one-pass syntactic fold that places a formula in the
  complexity lattice (Sigma / Pi levels, with the difference classes
  that a conjunction of a Sigma part and a Pi part earns);
* ``build_scott``, a catalog of characterizing sentences for the
  structure families the rest of the package constructs (finite
  structures, rational vector spaces, Archimedean ordered fields,
  primary-cyclic group sums, dense orders with an increasing constant
  chain);
* two evaluators: ``eval_finite`` decides a sentence exactly on a
  ``FiniteStructure``, and ``eval_bounded`` gives a sound three-valued
  verdict against an enumerated structure oracle.

Everything here is immutable and evaluation is pure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .finitestructs import FiniteStructure, ScriptError


class EvalError(RuntimeError):
    """An evaluation was asked to do something it cannot certify."""


KINDS = (
    "atomic",
    "negated-atomic",
    "finite-and",
    "finite-or",
    "countable-and",
    "countable-or",
    "exists-tuple",
    "forall-tuple",
)

_SUBSCRIPTS = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")


def _sub(n: int) -> str:
    return str(n).translate(_SUBSCRIPTS)


@dataclass(frozen=True)
class Atom:
    """One atomic statement.

    ``pred`` is a small tag; only ``"rel"`` (a named relation applied to
    universe elements) and ``"eq"`` (equality of universe elements) are
    understood by the exact finite evaluator.  Every other predicate is
    carried opaquely for classification, rendering, and oracle-backed
    evaluation.  ``args`` may mix quantified-variable names, integer
    universe constants, and structured payloads; ``text`` is the display
    form, and ``neg_text`` (optional) the display form of the negation.
    """

    pred: str
    args: tuple
    text: str
    neg_text: Optional[str] = None


@dataclass(frozen=True)
class Family:
    """A countable conjunct or disjunct family.

    ``at`` must be total: ``at(i)`` returns the i-th member formula for
    every i >= 0.  ``size`` marks an explicitly finite family.  For
    infinite families, ``constant_from`` promises that ``at(i)`` is the
    same formula for every ``i >= constant_from``, and ``settle`` maps a
    finite-structure size to an index beyond which member truth values
    no longer change on structures of that size; ``monotone`` records
    the declared direction justifying that bound.
    """

    describe: str
    at: Callable[[int], "Formula"]
    size: Optional[int] = None
    monotone: Optional[str] = None
    settle: Optional[Callable[[int], int]] = None
    constant_from: Optional[int] = None

    def sample(self, count: int = 3) -> list:
        hi = count
        if self.size is not None:
            hi = min(hi, self.size)
        elif self.constant_from is not None:
            hi = min(hi, self.constant_from + 1)
        return [self.at(i) for i in range(hi)]


@dataclass(frozen=True)
class Formula:
    """A formula in negation normal form; build through the constructors."""

    kind: str
    atom: Optional[Atom] = None
    parts: tuple = ()
    family: Optional[Family] = None
    bound: tuple = ()
    body: Optional["Formula"] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown formula kind {self.kind!r}")


def atom_f(atom: Atom) -> Formula:
    return Formula("atomic", atom=atom)


def natom_f(atom: Atom) -> Formula:
    return Formula("negated-atomic", atom=atom)


def f_and(*parts: Formula) -> Formula:
    if not parts:
        raise ValueError("a finite conjunction needs at least one part")
    return Formula("finite-and", parts=tuple(parts))


def f_or(*parts: Formula) -> Formula:
    if not parts:
        raise ValueError("a finite disjunction needs at least one part")
    return Formula("finite-or", parts=tuple(parts))


def c_and(family: Family) -> Formula:
    return Formula("countable-and", family=family)


def c_or(family: Family) -> Formula:
    return Formula("countable-or", family=family)


def exists_f(names, body: Formula) -> Formula:
    return Formula("exists-tuple", bound=tuple(names), body=body)


def forall_f(names, body: Formula) -> Formula:
    return Formula("forall-tuple", bound=tuple(names), body=body)


def listed_family(members, describe: str) -> Family:
    """An infinite family whose members repeat the last listed one forever.

    The repetition keeps the family total at every index while changing
    nothing logically, so a finitely described countable connective
    still classifies at the countable grain.
    """

    members = tuple(members)
    if not members:
        raise ValueError("a listed family needs at least one member")
    return Family(
        describe=describe,
        at=lambda i: members[min(i, len(members) - 1)],
        size=None,
        constant_from=len(members) - 1,
    )


def indexed_family(at, describe: str, monotone=None, settle=None) -> Family:
    """A genuinely infinite family given by a total index function."""

    return Family(describe=describe, at=at, size=None, monotone=monotone, settle=settle)


def finite_family(members, describe: str) -> Family:
    members = tuple(members)
    if not members:
        raise ValueError("a finite family needs at least one member")
    return Family(describe=describe, at=lambda i: members[i], size=len(members))


_DUAL = {
    "atomic": "negated-atomic",
    "negated-atomic": "atomic",
    "finite-and": "finite-or",
    "finite-or": "finite-and",
    "countable-and": "countable-or",
    "countable-or": "countable-and",
    "exists-tuple": "forall-tuple",
    "forall-tuple": "exists-tuple",
}

_MONOTONE_DUAL = {"antitone": "monotone", "monotone": "antitone", None: None}


def neg(phi: Formula) -> Formula:
    """The negation normal form of the negation."""

    kind = _DUAL[phi.kind]
    if phi.kind in ("atomic", "negated-atomic"):
        return Formula(kind, atom=phi.atom)
    if phi.kind in ("finite-and", "finite-or"):
        return Formula(kind, parts=tuple(neg(p) for p in phi.parts))
    if phi.kind in ("countable-and", "countable-or"):
        fam = phi.family
        dual = Family(
            describe=fam.describe,
            at=lambda i: neg(fam.at(i)),
            size=fam.size,
            monotone=_MONOTONE_DUAL.get(fam.monotone, fam.monotone),
            settle=fam.settle,
            constant_from=fam.constant_from,
        )
        return Formula(kind, family=dual)
    return Formula(kind, bound=phi.bound, body=neg(phi.body))


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ComplexityClass:
    """A point in the syntactic complexity lattice.

    ``tag`` is "Sigma", "Pi", or "dSigma"; ``level`` is at least 1.
    ``finitary`` marks formulas with no infinite connective anywhere;
    ``quantifier_free`` marks finitary formulas with no quantifier and
    no infinite connective, which sit below level 1 entirely and are
    reported here at the promoted level.
    """

    tag: str
    level: int
    finitary: bool
    quantifier_free: bool = False

    def render(self) -> str:
        if self.quantifier_free:
            return "finitary quantifier-free"
        prefix = "finitary" if self.finitary else "computable"
        if self.tag == "dSigma":
            return f"{prefix} d-Σ{_sub(self.level)}"
        symbol = "Σ" if self.tag == "Sigma" else "Π"
        return f"{prefix} {symbol}{_sub(self.level)}"


def ranks(phi: Formula) -> tuple:
    """(least Sigma level, least Pi level, finitary) for ``phi``.

    Level 0 stands for finitary quantifier-free, which is both Sigma
    and Pi at every positive level.  The two levels never differ by
    more than one.
    """

    k = phi.kind
    if k in ("atomic", "negated-atomic"):
        return 0, 0, True
    if k in ("finite-and", "finite-or"):
        subs = [ranks(p) for p in phi.parts]
        s = max(r[0] for r in subs)
        p = max(r[1] for r in subs)
        fin = all(r[2] for r in subs)
        return s, p, fin
    if k in ("countable-and", "countable-or"):
        fam = phi.family
        subs = [ranks(m) for m in fam.sample(3)]
        s = max(r[0] for r in subs)
        p = max(r[1] for r in subs)
        fin = fam.size is not None and all(r[2] for r in subs)
        if fam.size is not None:
            return s, p, fin
        if k == "countable-and":
            level = max(1, p)
            return level + 1, level, False
        level = max(1, s)
        return level, level + 1, False
    s_b, p_b, fin = ranks(phi.body)
    if k == "exists-tuple":
        s = max(1, min(s_b if s_b else 1, p_b + 1))
        return s, s + 1, fin
    p = max(1, min(p_b if p_b else 1, s_b + 1))
    return p + 1, p, fin


def _flat_parts(phi: Formula):
    if phi.kind == "finite-and":
        for p in phi.parts:
            yield from _flat_parts(p)
    else:
        yield phi


def difference_rank(phi: Formula) -> int:
    """Least n such that the formula splits into a Sigma_n part and a
    Pi_n part across its top-level conjunction."""

    best = 1
    for part in _flat_parts(phi):
        s, p, _ = ranks(part)
        best = max(best, min(s, p))
    return best


def classify(phi: Formula) -> ComplexityClass:
    """The least class the formula's shape witnesses.

    A level-n Sigma or Pi always beats the level-n difference class,
    which in turn beats level n+1; Sigma is preferred on an exact tie.
    """

    s, p, fin = ranks(phi)
    if s == 0:
        return ComplexityClass("Sigma", 1, True, quantifier_free=True)
    d = difference_rank(phi)
    candidates = [
        (2 * s, 0, "Sigma", s),
        (2 * p, 1, "Pi", p),
        (2 * d + 1, 2, "dSigma", d),
    ]
    _, _, tag, level = min(candidates)
    return ComplexityClass(tag, level, fin)


# ---------------------------------------------------------------------------
# rendering and serialization


def render(phi: Formula, limit: int = 3) -> str:
    """A compact text form; infinite families show their first members."""

    k = phi.kind
    if k == "atomic":
        return phi.atom.text
    if k == "negated-atomic":
        return phi.atom.neg_text or f"¬({phi.atom.text})"
    if k in ("finite-and", "finite-or"):
        sep = " ∧ " if k == "finite-and" else " ∨ "
        shown = [render(p, limit) for p in phi.parts[:limit]]
        if len(phi.parts) > limit:
            shown.append("…")
        return "(" + sep.join(shown) + ")"
    if k in ("countable-and", "countable-or"):
        fam = phi.family
        mark = "⋀⋀" if k == "countable-and" else "⋁⋁"
        sep = " ∧ " if k == "countable-and" else " ∨ "
        inner = sep.join(render(m, limit) for m in fam.sample(limit))
        if fam.size is None or fam.size > limit:
            inner += sep + "…"
        return f"{mark}[{fam.describe}]({inner})"
    mark = "∃" if k == "exists-tuple" else "∀"
    return f"{mark}{','.join(phi.bound)} {render(phi.body, limit)}"


def _arg_obj(a):
    if isinstance(a, tuple):
        return [_arg_obj(x) for x in a]
    return a


def formula_to_obj(phi: Formula, limit: int = 3) -> dict:
    """A JSON term tree; infinite families are sampled, not unrolled."""

    k = phi.kind
    out = {"kind": k}
    if k in ("atomic", "negated-atomic"):
        out["atom"] = {"pred": phi.atom.pred, "args": _arg_obj(phi.atom.args), "text": phi.atom.text}
        return out
    if k in ("finite-and", "finite-or"):
        out["parts"] = [formula_to_obj(p, limit) for p in phi.parts]
        return out
    if k in ("countable-and", "countable-or"):
        fam = phi.family
        out["family"] = {
            "describe": fam.describe,
            "size": fam.size,
            "monotone": fam.monotone,
            "truncated": fam.size is None or fam.size > limit,
            "sample": [formula_to_obj(m, limit) for m in fam.sample(limit)],
        }
        return out
    out["vars"] = list(phi.bound)
    out["body"] = formula_to_obj(phi.body, limit)
    return out


# ---------------------------------------------------------------------------
# exact evaluation on finite structures


def _free_in(phi: Formula, names: set) -> set:
    k = phi.kind
    if k in ("atomic", "negated-atomic"):
        return {a for a in phi.atom.args if isinstance(a, str) and a in names}
    if k in ("finite-and", "finite-or"):
        out = set()
        for p in phi.parts:
            out |= _free_in(p, names)
        return out
    if k in ("countable-and", "countable-or"):
        out = set()
        for m in phi.family.sample(3):
            out |= _free_in(m, names)
        return out
    inner = names - set(phi.bound)
    return _free_in(phi.body, inner)


def _resolve(arg, env: dict):
    if isinstance(arg, str) and arg in env:
        return env[arg]
    return arg


def _atom_truth(atom: Atom, a: FiniteStructure, env: dict) -> bool:
    if atom.pred == "rel":
        name = atom.args[0]
        args = tuple(_resolve(x, env) for x in atom.args[1:])
        if not all(isinstance(x, int) and 0 <= x < a.size for x in args):
            raise EvalError(f"relation argument outside the universe in {atom.text}")
        return a.holds(name, args)
    if atom.pred == "eq":
        lhs, rhs = (_resolve(x, env) for x in atom.args)
        if not all(isinstance(x, int) and 0 <= x < a.size for x in (lhs, rhs)):
            raise EvalError(f"equality argument outside the universe in {atom.text}")
        return lhs == rhs
    raise EvalError(f"the finite evaluator has no interpretation for {atom.pred!r}")


def _family_indices(fam: Family, size: int) -> range:
    if fam.size is not None:
        return range(fam.size)
    if fam.constant_from is not None:
        return range(fam.constant_from + 1)
    if fam.settle is not None:
        return range(fam.settle(size) + 1)
    raise EvalError(
        f"countable family '{fam.describe}' needs a declared stopping bound for finite evaluation"
    )


def _search(names: tuple, body: Formula, a: FiniteStructure, env: dict) -> bool:
    """Whether some assignment of ``names`` into the universe satisfies
    ``body``; conjuncts are checked as soon as their variables are set."""

    parts = list(_flat_parts(body))
    upfront = []
    buckets = [[] for _ in names]
    order = {n: i for i, n in enumerate(names)}
    for part in parts:
        used = _free_in(part, set(names))
        if not used:
            upfront.append(part)
        else:
            buckets[max(order[u] for u in used)].append(part)
    if not all(eval_finite(p, a, env) for p in upfront):
        return False

    def descend(i: int, env: dict) -> bool:
        if i == len(names):
            return True
        for e in range(a.size):
            child = {**env, names[i]: e}
            if all(eval_finite(p, a, child) for p in buckets[i]):
                if descend(i + 1, child):
                    return True
        return False

    return descend(0, env)


def eval_finite(phi: Formula, a: FiniteStructure, env: dict | None = None) -> bool:
    """Exact truth of the sentence on a finite structure.

    Quantifiers range over the whole universe.  Countable connectives
    need a finite size, a constant tail, or a declared settling bound.
    """

    env = {} if env is None else env
    k = phi.kind
    if k == "atomic":
        return _atom_truth(phi.atom, a, env)
    if k == "negated-atomic":
        return not _atom_truth(phi.atom, a, env)
    if k == "finite-and":
        return all(eval_finite(p, a, env) for p in phi.parts)
    if k == "finite-or":
        return any(eval_finite(p, a, env) for p in phi.parts)
    if k == "countable-and":
        return all(eval_finite(phi.family.at(i), a, env) for i in _family_indices(phi.family, a.size))
    if k == "countable-or":
        return any(eval_finite(phi.family.at(i), a, env) for i in _family_indices(phi.family, a.size))
    if k == "exists-tuple":
        return _search(phi.bound, phi.body, a, env)
    return not _search(phi.bound, neg(phi.body), a, env)


# ---------------------------------------------------------------------------
# bounded three-valued evaluation


class FiniteOracle:
    """Answers atomic queries from a finite structure; the enumeration
    is exhausted as soon as the bound covers the universe."""

    def __init__(self, a: FiniteStructure):
        self.struct = a

    def elements(self, bound: int) -> list:
        return list(range(min(bound, self.struct.size)))

    def exhaustive_at(self, bound: int) -> bool:
        return bound >= self.struct.size

    def decide(self, pred: str, args: tuple) -> bool:
        if pred == "rel":
            return self.struct.holds(args[0], tuple(args[1:]))
        if pred == "eq":
            return args[0] == args[1]
        raise EvalError(f"oracle has no interpretation for {pred!r}")


def _kleene(values, complete: bool, for_all: bool):
    saw_unknown = False
    for v in values:
        if v is None:
            saw_unknown = True
        elif v is not for_all:
            return not for_all
    if saw_unknown or not complete:
        return None
    return for_all


def eval_bounded(phi: Formula, oracle, bound: int, env: dict | None = None):
    """Sound three-valued truth: True and False carry a finite
    certificate, None means the bound did not decide it."""

    env = {} if env is None else env
    k = phi.kind
    if k == "atomic":
        return oracle.decide(phi.atom.pred, tuple(_resolve(x, env) for x in phi.atom.args))
    if k == "negated-atomic":
        return not oracle.decide(phi.atom.pred, tuple(_resolve(x, env) for x in phi.atom.args))
    if k in ("finite-and", "finite-or"):
        vals = (eval_bounded(p, oracle, bound, env) for p in phi.parts)
        return _kleene(vals, True, for_all=k == "finite-and")
    if k in ("countable-and", "countable-or"):
        fam = phi.family
        if fam.size is not None:
            indices, complete = range(fam.size), True
        elif fam.constant_from is not None:
            indices, complete = range(fam.constant_from + 1), True
        else:
            indices, complete = range(bound), False
        vals = (eval_bounded(fam.at(i), oracle, bound, env) for i in indices)
        return _kleene(vals, complete, for_all=k == "countable-and")
    want = k == "forall-tuple"
    elems = oracle.elements(bound)
    complete = oracle.exhaustive_at(bound)
    vals = (
        eval_bounded(phi.body, oracle, bound, {**env, **dict(zip(phi.bound, tup))})
        for tup in itertools.product(elems, repeat=len(phi.bound))
    )
    return _kleene(vals, complete, for_all=want)


# ---------------------------------------------------------------------------
# shared atom makers


def _eq(a, b, at, bt) -> Atom:
    return Atom("eq", (a, b), f"{at} = {bt}", f"{at} ≠ {bt}")


def _veq(x, y) -> Atom:
    return _eq(x, y, x, y)


def _rel(name, *args) -> Atom:
    return Atom("rel", (name, *args), f"{name}({','.join(str(a) for a in args)})")


def _pow_text(p: int, e: int, v: str) -> str:
    if e == 0:
        return v
    if e == 1:
        return f"{p}·{v}"
    return f"{p}^{e}·{v}"


def _scaled_eq(p: int, e: int, y, x) -> Atom:
    """p^e times the first element equals the second."""

    xt = x if isinstance(x, str) else str(x)
    return Atom(
        "pscale",
        (p, e, y, x),
        f"{_pow_text(p, e, y)} = {xt}",
        f"{_pow_text(p, e, y)} ≠ {xt}",
    )


def _scaled_zero(p: int, e: int, x) -> Atom:
    return Atom("pscale0", (p, e, x), f"{_pow_text(p, e, x)} = 0", f"{_pow_text(p, e, x)} ≠ 0")


def _combo_text(coeffs, names) -> str:
    pieces = []
    for c, n in zip(coeffs, names):
        if c == 0:
            continue
        pieces.append(n if c == 1 else f"{c}·{n}")
    return " + ".join(pieces) if pieces else "0"


def _combo_scaled(p: int, e: int, z, coeffs, names) -> Atom:
    """p^e times one element equals an integer combination of others."""

    rhs = _combo_text(coeffs, names)
    return Atom(
        "pcombo",
        (p, e, z, tuple(coeffs), tuple(names)),
        f"{_pow_text(p, e, z)} = {rhs}",
        f"{_pow_text(p, e, z)} ≠ {rhs}",
    )


def _combo_pair_eq(coeffs_a, coeffs_b, names) -> Atom:
    lhs = _combo_text(coeffs_a, names)
    rhs = _combo_text(coeffs_b, names)
    return Atom(
        "combo_eq",
        (tuple(coeffs_a), tuple(coeffs_b), tuple(names)),
        f"{lhs} = {rhs}",
        f"{lhs} ≠ {rhs}",
    )


# ---------------------------------------------------------------------------
# builders: finite structures


def _distinct_all(names) -> list:
    return [natom_f(_veq(a, b)) for a, b in itertools.combinations(names, 2)]


def scott_finite(struct) -> Formula:
    """The characterizing sentence of a finite relational structure.

    The empty structure gets the universal no-element sentence.  A
    structure of size n gets the conjunction of an existential sentence
    exhibiting an induced copy and the universal sentence refusing an
    (n+1)-th element.
    """

    a = struct if isinstance(struct, FiniteStructure) else FiniteStructure.from_obj(struct)
    if a.size == 0:
        x = "x"
        return forall_f((x,), natom_f(_veq(x, x)))
    names = tuple(f"x{i + 1}" for i in range(a.size))
    facts = list(_distinct_all(names))
    for name, arity in a.signature:
        for tup in itertools.product(range(a.size), repeat=arity):
            atom = _rel(name, *(names[i] for i in tup))
            facts.append(atom_f(atom) if a.holds(name, tup) else natom_f(atom))
    copy_part = exists_f(names, f_and(*facts))
    extra = tuple(f"y{i + 1}" for i in range(a.size + 1))
    cap_part = forall_f(extra, f_or(*[atom_f(_veq(p, q)) for p, q in itertools.combinations(extra, 2)]))
    return f_and(copy_part, cap_part)


def prime_field_sentence(q: int) -> Formula:
    """States that 1 added to itself q times returns to 0, over the
    ternary addition relation with universe constants 0 and 1."""

    if q < 2 or any(q % d == 0 for d in range(2, q)):
        raise ScriptError(f"{q} is not a prime")
    if q == 2:
        return atom_f(_rel("add", 1, 1, 0))
    sums = [f"s{i}" for i in range(2, q)]
    facts = [atom_f(_rel("add", 1, 1, sums[0]))]
    for i in range(1, q - 2):
        facts.append(atom_f(_rel("add", sums[i - 1], 1, sums[i])))
    facts.append(atom_f(_rel("add", sums[-1], 1, 0)))
    return exists_f(sums, f_and(*facts))


# ---------------------------------------------------------------------------
# builders: rational vector spaces


def _lincomb_atom(coeffs, names) -> Atom:
    pieces = []
    for c, n in zip(coeffs, names):
        if c == 0:
            continue
        pieces.append(n if c == 1 else f"{c}·{n}")
    text = " + ".join(pieces) if pieces else "0"
    return Atom("lincomb", (tuple(str(c) for c in coeffs), tuple(names)), f"{text} = 0", f"{text} ≠ 0")


def _zero_atom(x: str) -> Atom:
    return Atom("iszero", (x,), f"{x} = 0", f"{x} ≠ 0")


def vs_axioms() -> Formula:
    """The class description for the ambient vector-space language:
    addition is total and commutative, scaling by every rational is
    total, and a zero element exists."""

    total_add = forall_f(("u", "v"), exists_f(("w",), atom_f(_rel("add", "u", "v", "w"))))
    comm = forall_f(
        ("u", "v", "w"),
        f_or(natom_f(_rel("add", "u", "v", "w")), atom_f(_rel("add", "v", "u", "w"))),
    )
    def scale_total(i: int) -> Formula:
        return forall_f(("u",), exists_f(("w",), atom_f(_rel(f"scale[{i}]", "u", "w"))))

    scaling = c_and(indexed_family(scale_total, "rational scalars"))
    zero = exists_f(("z",), atom_f(_zero_atom("z")))
    return f_and(total_add, comm, scaling, zero)


def _independent_at_least(k: int) -> Formula:
    """Some k vectors admit no vanishing nontrivial combination."""

    names = tuple(f"v{i + 1}" for i in range(k))
    fam = _combo_family(names, positive=False)
    return exists_f(names, c_and(fam))


def _dependent_always(k: int) -> Formula:
    """Every k vectors admit a vanishing nontrivial combination."""

    names = tuple(f"v{i + 1}" for i in range(k))
    fam = _combo_family(names, positive=True)
    return forall_f(names, c_or(fam))


def _combo_family(names, positive: bool) -> Family:
    """Nontrivial integer combinations of the named vectors, by height."""

    width = len(names)
    cache = []

    def at(i: int) -> Formula:
        h = 1
        while len(cache) <= i:
            block = [
                c
                for c in itertools.product(range(-h, h + 1), repeat=width)
                if any(c) and max(abs(x) for x in c) == h
            ]
            cache.extend(block)
            h += 1
        atom = _lincomb_atom(cache[i], names)
        return atom_f(atom) if positive else natom_f(atom)

    return Family(describe="nontrivial integer combinations", at=at, size=None)


def vs_dim_sentence(k) -> Formula:
    """Characterizes the rational vector space of the given dimension;
    ``k`` is a nonnegative integer or the string "infinite"."""

    if k == "infinite":
        fam = indexed_family(lambda i: _independent_at_least(i + 1), "each finite size")
        return f_and(vs_axioms(), c_and(fam))
    if not isinstance(k, int) or k < 0:
        raise ScriptError("dimension must be a nonnegative integer or 'infinite'")
    if k == 0:
        return forall_f(("x",), atom_f(_zero_atom("x")))
    if k == 1:
        some = exists_f(("x",), natom_f(_zero_atom("x")))
        dep = _dependent_always(2)
        return f_and(vs_axioms(), some, dep)
    return f_and(vs_axioms(), _independent_at_least(k), neg(_independent_at_least(k + 1)))


# ---------------------------------------------------------------------------
# builders: Archimedean ordered fields


def _lt_atom(a, b) -> Atom:
    at = a if isinstance(a, str) else str(a)
    bt = b if isinstance(b, str) else str(b)
    return Atom("lt", (a, b), f"{at} < {bt}", f"{bt} ≤ {at}")


def ordered_field_axioms() -> Formula:
    """The class description: ordered-field operations are total, the
    order is linear, and every element sits below some integer."""

    total = forall_f(("u", "v"), exists_f(("w",), atom_f(_rel("add", "u", "v", "w"))))
    total_mul = forall_f(("u", "v"), exists_f(("w",), atom_f(_rel("mul", "u", "v", "w"))))
    linear = forall_f(
        ("u", "v"),
        f_or(atom_f(_lt_atom("u", "v")), atom_f(_lt_atom("v", "u")), atom_f(_veq("u", "v"))),
    )
    bounded = forall_f(
        ("u",),
        c_or(indexed_family(lambda n: atom_f(_lt_atom("u", n)), "integer bounds")),
    )
    return f_and(total, total_mul, linear, bounded)


def _cut_key(pair) -> tuple:
    lo, hi = (Fraction(str(x)) for x in pair)
    return max(lo.denominator, hi.denominator), lo, hi


def cut_formula(var: str, pairs, label: str) -> Formula:
    """The element sits strictly inside every listed rational interval;
    intervals are taken in increasing denominator order."""

    ordered = sorted(pairs, key=_cut_key)
    members = [
        f_and(atom_f(_lt_atom(str(lo), var)), atom_f(_lt_atom(var, str(hi))))
        for lo, hi in ordered
    ]
    return c_and(listed_family(members, f"rational intervals around {label}"))


def arch_cut_sentences(cuts) -> Formula:
    """The full cut description: the class axioms, every listed cut is
    filled, and every element fills some listed cut."""

    if not cuts:
        raise ScriptError("the cut description needs at least one cut")
    filled = [exists_f(("x",), cut_formula("x", pairs, f"e{i + 1}")) for i, pairs in enumerate(cuts)]
    each = c_and(listed_family(filled, "listed cuts"))
    covers = [cut_formula("y", pairs, f"e{i + 1}") for i, pairs in enumerate(cuts)]
    onto = forall_f(("y",), c_or(listed_family(covers, "listed cuts")))
    return f_and(ordered_field_axioms(), each, onto)


def _int_poly_family(var: str, positive: bool) -> Family:
    """Nonconstant integer polynomials p with the member atom p(var)=0,
    enumerated by max(degree, coefficient size)."""

    cache = []

    def _poly_text(coeffs) -> str:
        pieces = []
        for e in range(len(coeffs) - 1, -1, -1):
            c = coeffs[e]
            if c == 0:
                continue
            if e == 0:
                pieces.append(str(c))
            else:
                xpow = var if e == 1 else f"{var}^{e}"
                pieces.append(xpow if c == 1 else f"{c}·{xpow}")
        return " + ".join(pieces) if pieces else "0"

    def at(i: int) -> Formula:
        w = 1
        while len(cache) <= i:
            block = []
            for deg in range(1, w + 1):
                for coeffs in itertools.product(range(-w, w + 1), repeat=deg + 1):
                    if coeffs[-1] == 0:
                        continue
                    weight = max(deg, max(abs(c) for c in coeffs))
                    if weight == w:
                        block.append(coeffs)
            cache.extend(block)
            w += 1
        coeffs = cache[i]
        text = f"{_poly_text(coeffs)} = 0"
        atom = Atom("polyzero", (tuple(coeffs), var), text, f"{_poly_text(coeffs)} ≠ 0")
        return atom_f(atom) if positive else natom_f(atom)

    return Family(describe="nonconstant integer polynomials", at=at, size=None)


def rcf_algebraic_sentence() -> Formula:
    """Characterizes the field whose every element is a polynomial root."""

    rootful = forall_f(("x",), c_or(_int_poly_family("x", positive=True)))
    return f_and(ordered_field_axioms(), rootful)


def _ratfun_family(gens, y: str, positive: bool) -> Family:
    """Member atoms equate y (cleared of denominators) with a rational
    function of the generators, enumerated by coefficient size."""

    width = len(gens)
    cache = []

    def monomials(w: int) -> list:
        return [
            e
            for e in itertools.product(range(w + 1), repeat=width)
            if sum(e) <= w
        ]

    def at(i: int) -> Formula:
        w = 1
        while len(cache) <= i:
            mons = monomials(w)
            vecs = list(itertools.product(range(-w, w + 1), repeat=len(mons)))
            block = []
            for num in vecs:
                for den in vecs:
                    if not any(den):
                        continue
                    weight = max([abs(c) for c in num + den] + [1])
                    if weight == w and (num, den, tuple(mons)) not in cache:
                        block.append((num, den, tuple(mons)))
            cache.extend(block)
            w += 1
        num, den, mons = cache[i]

        def side(vec) -> str:
            pieces = []
            for c, e in zip(vec, mons):
                if c == 0:
                    continue
                mono = "·".join(
                    g if k == 1 else f"{g}^{k}" for g, k in zip(gens, e) if k
                )
                if not mono:
                    pieces.append(str(c))
                elif c == 1:
                    pieces.append(mono)
                else:
                    pieces.append(f"{c}·{mono}")
            return " + ".join(pieces) if pieces else "0"

        text = f"{y}·({side(den)}) = {side(num)}"
        atom = Atom("ratfun", (num, den, mons, tuple(gens), y), text, f"{y}·({side(den)}) ≠ {side(num)}")
        return atom_f(atom) if positive else natom_f(atom)

    return Family(describe="rational functions of the generators", at=at, size=None)


def rcf_finite_degree_sentence(k: int, cuts) -> Formula:
    """Characterizes the closure of k independent generators: their
    cuts are filled, and no further element escapes every rational
    function of the fillers."""

    if not isinstance(k, int) or k < 1:
        raise ScriptError("the generator count must be a positive integer")
    if len(cuts) != k:
        raise ScriptError(f"expected {k} cut descriptions, got {len(cuts)}")
    gens = tuple(f"x{i + 1}" for i in range(k))
    in_cuts = f_and(*[cut_formula(g, pairs, f"e{i + 1}") for i, (g, pairs) in enumerate(zip(gens, cuts))]) if k > 1 else cut_formula(gens[0], cuts[0], "e1")
    filled = exists_f(gens, in_cuts)
    witness = exists_f(
        gens + ("y",),
        f_and(in_cuts, c_and(_ratfun_family(gens, "y", positive=False))),
    )
    return f_and(ordered_field_axioms(), filled, neg(witness))


# ---------------------------------------------------------------------------
# builders: primary-cyclic group sums


def _pg_divisible(p: int, e: int, x: str, aux: str) -> Formula:
    return exists_f((aux,), atom_f(_scaled_eq(p, e, aux, x)))


def _in_deep_part(p: int, x: str) -> Formula:
    """The element is divisible by every power of p."""

    return c_and(
        indexed_family(lambda m: _pg_divisible(p, m + 1, x, f"d_{x}"), f"all powers dividing {x}")
    )


def _not_in_deep_part(p: int, x: str) -> Formula:
    return neg(_in_deep_part(p, x))


def pgroup_axioms(p: int) -> Formula:
    """The class description: addition is total and commutative and
    every element dies under some power of p."""

    total = forall_f(("u", "v"), exists_f(("w",), atom_f(_rel("add", "u", "v", "w"))))
    comm = forall_f(
        ("u", "v", "w"),
        f_or(natom_f(_rel("add", "u", "v", "w")), atom_f(_rel("add", "v", "u", "w"))),
    )
    torsion = forall_f(
        ("u",),
        c_or(indexed_family(lambda n: atom_f(_scaled_zero(p, n + 1, "u")), "killing powers")),
    )
    return f_and(total, comm, torsion)


def finite_exponent_axioms(p: int, bound: int) -> Formula:
    """Finitary class description for groups killed by p^bound."""

    total = forall_f(("u", "v"), exists_f(("w",), atom_f(_rel("add", "u", "v", "w"))))
    comm = forall_f(
        ("u", "v", "w"),
        f_or(natom_f(_rel("add", "u", "v", "w")), atom_f(_rel("add", "v", "u", "w"))),
    )
    killed = forall_f(("u",), atom_f(_scaled_zero(p, bound, "u")))
    return f_and(total, comm, killed)


def pgroup_divisible_formula(p: int, m) -> Formula:
    """The depth test on a free element: divisibility by p^m, or by
    every power when m is "omega"."""

    _check_prime(p)
    if m == "omega":
        return _in_deep_part(p, "x")
    if not isinstance(m, int) or m < 1:
        raise ScriptError("the depth must be a positive integer or 'omega'")
    return _pg_divisible(p, m, "x", "y")


def _check_prime(p: int) -> None:
    if not isinstance(p, int) or p < 2 or any(p % d == 0 for d in range(2, p)):
        raise ScriptError(f"{p} is not a prime")


def _count_cap(p: int, n: int) -> Formula:
    """No more than p^n distinct elements."""

    count = p**n
    if count > 16:
        raise ScriptError(f"a cap of {count} elements is too large to spell out")
    names = tuple(f"y{i + 1}" for i in range(count + 1))
    return forall_f(names, f_or(*[atom_f(_veq(a, b)) for a, b in itertools.combinations(names, 2)]))


def pgroup_bounded_count_sentence(p: int, n: int) -> Formula:
    _check_prime(p)
    if not isinstance(n, int) or n < 1:
        raise ScriptError("the exponent must be a positive integer")
    return _count_cap(p, n)


def _summand_group(p: int, summands) -> FiniteStructure:
    """The direct sum of cyclic groups of orders p^k as a structure
    with a ternary addition relation; elements are tuple-coded in
    lexicographic order."""

    mods = [p**k for k in summands]
    elems = list(itertools.product(*[range(m) for m in mods]))
    index = {e: i for i, e in enumerate(elems)}
    triples = set()
    for a in elems:
        for b in elems:
            c = tuple((x + y) % m for x, y, m in zip(a, b, mods))
            triples.add((index[a], index[b], index[c]))
    return FiniteStructure.make((("add", 3),), len(elems), {"add": triples})


def pgroup_finite_exact_sentence(p: int, summands) -> Formula:
    """The two-sided description of a finite sum of cyclic p-groups."""

    _check_prime(p)
    if not summands or any(not isinstance(k, int) or k < 1 for k in summands):
        raise ScriptError("summands must be a nonempty list of positive integers")
    group = _summand_group(p, summands)
    if group.size > 16:
        raise ScriptError(f"a group of {group.size} elements is too large to spell out")
    return scott_finite(group)


def _u_at_least(p: int, m: int, c: int, deep: bool) -> Formula:
    """At least c independent order-p elements at depth m (depth counted
    past the deep part when ``deep`` is set)."""

    xs = tuple(f"x{i + 1}" for i in range(c))
    ys = tuple(f"y{i + 1}" for i in range(c))
    facts = []
    for x, y in zip(xs, ys):
        facts.append(atom_f(_scaled_zero(p, 1, x)))
        facts.append(natom_f(_zero_atom(x)))
        facts.append(atom_f(_scaled_eq(p, m, y, x)) if m else atom_f(_veq(y, x)))
        if deep:
            facts.append(_in_deep_part(p, y))
    for coeffs in itertools.product(range(p), repeat=c):
        if not any(coeffs):
            continue
        escape = _combo_scaled(p, m + 1, "z", coeffs, xs)
        if deep:
            body = f_or(natom_f(escape), _not_in_deep_part(p, "z"))
        else:
            body = natom_f(escape)
        facts.append(forall_f(("z",), body))
    return exists_f(xs + ys, f_and(*facts))


def _u_exactly(p: int, m: int, c: int, deep: bool) -> Formula:
    if c == 0:
        return neg(_u_at_least(p, m, 1, deep))
    return f_and(_u_at_least(p, m, c, deep), neg(_u_at_least(p, m, c + 1, deep)))


def _u_value(ulm, tail: str, m: int):
    if m < len(ulm):
        return ulm[m]
    if tail == "zeros":
        return 0
    if tail == "ones":
        return 1
    raise ScriptError(f"unknown tail pattern {tail!r}")


def _invariant_profile(p: int, ulm, tail: str, deep: bool) -> Formula:
    """The full per-depth invariant description as one countable
    conjunction; "inf" entries expand to a nested countable family."""

    def at(m: int) -> Formula:
        value = _u_value(ulm, tail, m)
        if value == "inf":
            return c_and(
                indexed_family(
                    lambda c: _u_at_least(p, m, c + 1, deep), f"unbounded count at depth {m}"
                )
            )
        if not isinstance(value, int) or value < 0:
            raise ScriptError(f"invariant entries must be 'inf' or nonnegative integers, got {value!r}")
        return _u_exactly(p, m, value, deep)

    return c_and(indexed_family(at, "depth profile"))


def _validate_ulm(ulm, tail: str) -> None:
    if tail not in ("zeros", "ones"):
        raise ScriptError(f"unknown tail pattern {tail!r}")
    for v in ulm:
        if v != "inf" and (not isinstance(v, int) or v < 0):
            raise ScriptError(f"invariant entries must be 'inf' or nonnegative integers, got {v!r}")


def _deep_trivial(p: int, n: int) -> Formula:
    """Nothing divisible by p^n survives past the deep part."""

    member = exists_f(("w",), f_and(atom_f(_scaled_eq(p, n, "w", "v")), _in_deep_part(p, "w")))
    return forall_f(("v",), f_or(neg(member), atom_f(_zero_atom("v"))))


def pgroup_length_limit_sentence(p: int, ulm, tail: str = "ones") -> Formula:
    """Characterizes a group whose deep part is trivial, by its full
    depth profile."""

    _check_prime(p)
    _validate_ulm(ulm, tail)
    vanish = forall_f(("x",), f_or(_not_in_deep_part(p, "x"), atom_f(_zero_atom("x"))))
    return f_and(pgroup_axioms(p), vanish, _invariant_profile(p, ulm, tail, deep=False))


def _deep_count_cap(p: int, n: int) -> Formula:
    count = p**n
    if count > 16:
        raise ScriptError(f"a cap of {count} elements is too large to spell out")
    names = tuple(f"y{i + 1}" for i in range(count + 1))
    eqs = [atom_f(_veq(a, b)) for a, b in itertools.combinations(names, 2)]
    outs = [_not_in_deep_part(p, x) for x in names]
    return forall_f(names, f_or(*(eqs + outs)))


def pgroup_successor_minimal_sentence(p: int, n: int, ulm, tail: str = "ones") -> Formula:
    """Deep part as small as its exponent allows, profile fixed below."""

    _check_prime(p)
    if not isinstance(n, int) or n < 1:
        raise ScriptError("the exponent must be a positive integer")
    _validate_ulm(ulm, tail)
    return f_and(
        pgroup_axioms(p),
        _deep_trivial(p, n),
        _deep_count_cap(p, n),
        _invariant_profile(p, ulm, tail, deep=False),
    )


def pgroup_successor_general_sentence(p: int, n: int, summands, ulm, tail: str = "ones") -> Formula:
    """Deep part a fixed finite group, profile fixed below."""

    _check_prime(p)
    if not isinstance(n, int) or n < 1:
        raise ScriptError("the exponent must be a positive integer")
    _validate_ulm(ulm, tail)
    if not summands or any(not isinstance(k, int) or k < 1 or k > n for k in summands):
        raise ScriptError("deep summands must be positive integers within the exponent bound")
    group = _summand_group(p, summands)
    if group.size > 16:
        raise ScriptError(f"a deep part of {group.size} elements is too large to spell out")
    names = tuple(f"x{i + 1}" for i in range(group.size))
    facts = list(_distinct_all(names))
    for x in names:
        facts.append(_in_deep_part(p, x))
    for tup in itertools.product(range(group.size), repeat=3):
        atom = _rel("add", *(names[i] for i in tup))
        facts.append(atom_f(atom) if group.holds("add", tup) else natom_f(atom))
    copy_part = exists_f(names, f_and(*facts))
    extra = tuple(f"y{i + 1}" for i in range(group.size + 1))
    eqs = [atom_f(_veq(a, b)) for a, b in itertools.combinations(extra, 2)]
    outs = [_not_in_deep_part(p, x) for x in extra]
    cap_part = forall_f(extra, f_or(*(eqs + outs)))
    return f_and(
        pgroup_axioms(p),
        _deep_trivial(p, n),
        copy_part,
        cap_part,
        _invariant_profile(p, ulm, tail, deep=False),
    )


def _free_rank_family(p: int, exponent: int, deep: bool) -> Family:
    """For every r, some r elements generate a free sum of cyclic
    groups of order p^exponent (inside the deep part when asked)."""

    def at(r_index: int) -> Formula:
        r = r_index + 1
        names = tuple(f"x{i + 1}" for i in range(r))
        facts = []
        for x in names:
            facts.append(atom_f(_scaled_zero(p, exponent, x)))
            if deep:
                facts.append(_in_deep_part(p, x))
        combos = list(itertools.product(range(p**exponent), repeat=r))
        for ca, cb in itertools.combinations(combos, 2):
            facts.append(natom_f(_combo_pair_eq(ca, cb, names)))
        return exists_f(names, f_and(*facts))

    return Family(describe=f"free rank at order p^{exponent}", at=at, size=None)


def pgroup_uniform_tail_sentence(p: int, n: int, k: int, um_below=()) -> Formula:
    """Length-bounded group with unbounded count at one depth k and a
    declared finite count at each depth below it."""

    _check_prime(p)
    if not isinstance(n, int) or n < 1 or not isinstance(k, int) or k < 0 or k >= n:
        raise ScriptError("need 0 <= k < n with n a positive integer")
    if len(um_below) != k or any(not isinstance(v, int) or v < 0 for v in um_below):
        raise ScriptError(f"expected {k} finite counts below depth {k}")
    parts = [finite_exponent_axioms(p, n)]
    for m, value in enumerate(um_below):
        parts.append(_u_exactly(p, m, value, deep=False))
    parts.append(c_and(_free_rank_family(p, k + 1, deep=False)))
    if n > k + 1:
        parts.append(_invariant_tail_exact(p, list(range(k + 1, n)), n))
    return f_and(*parts)


def _invariant_tail_exact(p: int, depths, n: int) -> Formula:
    """Above the unbounded depth the profile is pinned to zero; kept
    separate so the spelled-out part stays finitary."""

    clauses = [_u_exactly(p, m, 0, deep=False) for m in depths]
    return f_and(*clauses) if len(clauses) > 1 else clauses[0]


def pgroup_tail_infinite_sentence(p: int, n: int, k: int, ulm, tail: str = "ones") -> Formula:
    """Deep-part version of the uniform tail, profile fixed below."""

    _check_prime(p)
    if not isinstance(n, int) or n < 1 or not isinstance(k, int) or k < 0 or k >= n:
        raise ScriptError("need 0 <= k < n with n a positive integer")
    if n != k + 1:
        raise ScriptError("the unbounded depth must sit at the top of the deep part here")
    _validate_ulm(ulm, tail)
    parts = [pgroup_axioms(p), _deep_trivial(p, n)]
    for m in range(k):
        parts.append(_u_exactly(p, m, 0, deep=True))
    parts.append(c_and(_free_rank_family(p, k + 1, deep=True)))
    parts.append(_invariant_profile(p, ulm, tail, deep=False))
    return f_and(*parts)


def pgroup_tail_infinite_offset_sentence(
    p: int, n: int, k: int, um_below, ulm, tail: str = "ones"
) -> Formula:
    """Like the deep-part uniform tail, but some depth below the
    unbounded one carries a nonzero finite count."""

    _check_prime(p)
    if not isinstance(n, int) or n < 1 or not isinstance(k, int) or k < 1 or k >= n:
        raise ScriptError("need 1 <= k < n with n a positive integer")
    if n != k + 1:
        raise ScriptError("the unbounded depth must sit at the top of the deep part here")
    if len(um_below) != k or any(not isinstance(v, int) or v < 0 for v in um_below):
        raise ScriptError(f"expected {k} finite counts below depth {k}")
    if not any(um_below):
        raise ScriptError("some depth below the unbounded one must have a nonzero count")
    _validate_ulm(ulm, tail)
    parts = [pgroup_axioms(p), _deep_trivial(p, n)]
    for m, value in enumerate(um_below):
        parts.append(_u_exactly(p, m, value, deep=True))
    parts.append(c_and(_free_rank_family(p, k + 1, deep=True)))
    parts.append(_invariant_profile(p, ulm, tail, deep=False))
    return f_and(*parts)


def pgroup_mixed_tall_sentence(p: int, n: int, um) -> Formula:
    """Length-bounded group described depth by depth, allowing several
    unbounded depths."""

    _check_prime(p)
    if not isinstance(n, int) or n < 1:
        raise ScriptError("the exponent must be a positive integer")
    if len(um) != n:
        raise ScriptError(f"expected {n} per-depth entries")
    if sum(1 for v in um if v == "inf") < 2:
        raise ScriptError("this shape needs at least two unbounded depths")
    parts = [finite_exponent_axioms(p, n)]
    for m, value in enumerate(um):
        if value == "inf":
            parts.append(
                c_and(
                    indexed_family(
                        lambda c, mm=m: _u_at_least(p, mm, c + 1, deep=False),
                        f"unbounded count at depth {m}",
                    )
                )
            )
        elif isinstance(value, int) and value >= 0:
            parts.append(_u_exactly(p, m, value, deep=False))
        else:
            raise ScriptError(f"invariant entries must be 'inf' or nonnegative integers, got {value!r}")
    return f_and(*parts)


def pgroup_two_infinite_sentence(p: int, n: int, um, ulm, tail: str = "ones") -> Formula:
    """Deep-part version of the mixed description, profile fixed below."""

    _check_prime(p)
    if not isinstance(n, int) or n < 1:
        raise ScriptError("the exponent must be a positive integer")
    if len(um) != n:
        raise ScriptError(f"expected {n} per-depth entries")
    if sum(1 for v in um if v == "inf") < 2:
        raise ScriptError("this shape needs at least two unbounded depths")
    _validate_ulm(ulm, tail)
    parts = [pgroup_axioms(p), _deep_trivial(p, n)]
    for m, value in enumerate(um):
        if value == "inf":
            parts.append(
                c_and(
                    indexed_family(
                        lambda c, mm=m: _u_at_least(p, mm, c + 1, deep=True),
                        f"unbounded count at depth {m}",
                    )
                )
            )
        elif isinstance(value, int) and value >= 0:
            parts.append(_u_exactly(p, m, value, deep=True))
        else:
            raise ScriptError(f"invariant entries must be 'inf' or nonnegative integers, got {value!r}")
    parts.append(_invariant_profile(p, ulm, tail, deep=False))
    return f_and(*parts)


# ---------------------------------------------------------------------------
# builders: dense order with an increasing constant chain


def _const(n: int):
    return ("const", n)


def _lt_const(x: str, n: int) -> Atom:
    return Atom("lt", (x, _const(n)), f"{x} < c{_sub(n)}", f"c{_sub(n)} ≤ {x}")


def _gt_const(x: str, n: int) -> Atom:
    return Atom("lt", (_const(n), x), f"c{_sub(n)} < {x}", f"{x} ≤ c{_sub(n)}")


def chain_order_axioms() -> Formula:
    """The class description: a dense linear order without endpoints
    carrying a strictly increasing chain of constants."""

    linear = forall_f(
        ("u", "v"),
        f_or(atom_f(_lt_atom("u", "v")), atom_f(_lt_atom("v", "u")), atom_f(_veq("u", "v"))),
    )
    dense = forall_f(
        ("u", "v"),
        f_or(
            natom_f(_lt_atom("u", "v")),
            exists_f(("w",), f_and(atom_f(_lt_atom("u", "w")), atom_f(_lt_atom("w", "v")))),
        ),
    )
    no_ends = forall_f(
        ("u",),
        f_and(
            exists_f(("w",), atom_f(_lt_atom("u", "w"))),
            exists_f(("w",), atom_f(_lt_atom("w", "u"))),
        ),
    )
    increasing = c_and(
        indexed_family(
            lambda n: atom_f(Atom("lt", (_const(n), _const(n + 1)), f"c{_sub(n)} < c{_sub(n + 1)}")),
            "consecutive constants",
        )
    )
    return f_and(linear, dense, no_ends, increasing)


def _above_all(x: str) -> Formula:
    return c_and(indexed_family(lambda n: atom_f(_gt_const(x, n)), "all constants"))


def _below_some(x: str) -> Formula:
    return c_or(indexed_family(lambda n: atom_f(_lt_const(x, n)), "some constant"))


def chain_model_sentence(model: str) -> Formula:
    """Characterizes one of the three countable models: "prime" (the
    chain is cofinal), "middle" (the chain has a least upper bound), or
    "saturated" (upper bounds exist but none is least)."""

    if model == "prime":
        return f_and(chain_order_axioms(), forall_f(("x",), _below_some("x")))
    if model == "middle":
        least_upper = exists_f(
            ("x",),
            f_and(
                _above_all("x"),
                forall_f(
                    ("y",),
                    f_or(_below_some("y"), atom_f(_lt_atom("x", "y")), atom_f(_veq("x", "y"))),
                ),
            ),
        )
        return f_and(chain_order_axioms(), least_upper)
    if model == "saturated":
        some_upper = exists_f(("x",), _above_all("x"))
        none_least = forall_f(
            ("y",),
            f_or(
                _below_some("y"),
                exists_f(("z",), f_and(_above_all("z"), atom_f(_lt_atom("z", "y")))),
            ),
        )
        return f_and(chain_order_axioms(), some_upper, none_least)
    raise ScriptError(f"unknown chain model {model!r}")


# ---------------------------------------------------------------------------
# the catalog


def _build_scott_finite(params):
    return scott_finite(params["struct"])


def _build_prime_field(params):
    return prime_field_sentence(params["q"])


def _build_vs_dim(params):
    return vs_dim_sentence(params["k"])


def _build_arch_cuts(params):
    return arch_cut_sentences(params["cuts"])


def _build_rcf_algebraic(params):
    return rcf_algebraic_sentence()


def _build_rcf_finite_degree(params):
    return rcf_finite_degree_sentence(params["k"], params["cuts"])


def _build_pg_divisible(params):
    return pgroup_divisible_formula(params["p"], params["m"])


def _build_pg_bounded_count(params):
    return pgroup_bounded_count_sentence(params["p"], params["n"])


def _build_pg_finite_exact(params):
    return pgroup_finite_exact_sentence(params["p"], params["summands"])


def _build_pg_length_limit(params):
    return pgroup_length_limit_sentence(params["p"], params["ulm"], params.get("tail", "ones"))


def _build_pg_successor_minimal(params):
    return pgroup_successor_minimal_sentence(
        params["p"], params["n"], params["ulm"], params.get("tail", "ones")
    )


def _build_pg_successor_general(params):
    return pgroup_successor_general_sentence(
        params["p"], params["n"], params["summands"], params["ulm"], params.get("tail", "ones")
    )


def _build_pg_uniform_tail(params):
    return pgroup_uniform_tail_sentence(
        params["p"], params["n"], params["k"], tuple(params.get("um_below", ()))
    )


def _build_pg_tail_infinite(params):
    return pgroup_tail_infinite_sentence(
        params["p"], params["n"], params["k"], params["ulm"], params.get("tail", "ones")
    )


def _build_pg_tail_infinite_offset(params):
    return pgroup_tail_infinite_offset_sentence(
        params["p"],
        params["n"],
        params["k"],
        tuple(params["um_below"]),
        params["ulm"],
        params.get("tail", "ones"),
    )


def _build_pg_mixed_tall(params):
    return pgroup_mixed_tall_sentence(params["p"], params["n"], params["um"])


def _build_pg_two_infinite(params):
    return pgroup_two_infinite_sentence(
        params["p"], params["n"], params["um"], params["ulm"], params.get("tail", "ones")
    )


def _build_ehrenfeucht(params):
    return chain_model_sentence(params["model"])


CATALOG = {
    "scott_finite": _build_scott_finite,
    "prime_field": _build_prime_field,
    "scott_vs_dim": _build_vs_dim,
    "arch_field_cuts": _build_arch_cuts,
    "rcf_algebraic": _build_rcf_algebraic,
    "rcf_finite_degree": _build_rcf_finite_degree,
    "pgroup_divisible": _build_pg_divisible,
    "pgroup_bounded_count": _build_pg_bounded_count,
    "pgroup_finite_exact": _build_pg_finite_exact,
    "pgroup_length_limit": _build_pg_length_limit,
    "pgroup_successor_minimal": _build_pg_successor_minimal,
    "pgroup_successor_general": _build_pg_successor_general,
    "pgroup_uniform_tail": _build_pg_uniform_tail,
    "pgroup_tail_infinite": _build_pg_tail_infinite,
    "pgroup_tail_infinite_offset": _build_pg_tail_infinite_offset,
    "pgroup_mixed_tall": _build_pg_mixed_tall,
    "pgroup_two_infinite": _build_pg_two_infinite,
    "scott_ehrenfeucht": _build_ehrenfeucht,
}


def build_scott(catalog_id: str, params: dict | None = None) -> Formula:
    """Builds one catalog sentence; raises ScriptError for an unknown
    id or parameters outside the entry's supported range."""

    if catalog_id not in CATALOG:
        raise ScriptError(f"unknown catalog id {catalog_id!r}")
    try:
        return CATALOG[catalog_id](params or {})
    except KeyError as missing:
        raise ScriptError(f"catalog id {catalog_id!r} needs parameter {missing.args[0]!r}") from None


GOLDEN_CLASSES = [
    ("scott_finite", {"struct": FiniteStructure.make((("R", 2),), 0, {})}, ("Pi", 1, True)),
    (
        "scott_finite",
        {"struct": FiniteStructure.make((("R", 2),), 3, {"R": [(0, 1), (1, 2), (0, 2)]})},
        ("dSigma", 1, True),
    ),
    ("prime_field", {"q": 3}, ("Sigma", 1, True)),
    ("scott_vs_dim", {"k": 0}, ("Pi", 1, True)),
    ("scott_vs_dim", {"k": 1}, ("Pi", 2, False)),
    ("scott_vs_dim", {"k": 2}, ("dSigma", 2, False)),
    ("scott_vs_dim", {"k": "infinite"}, ("Pi", 3, False)),
    (
        "arch_field_cuts",
        {"cuts": [[["1", "2"], ["5/4", "3/2"], ["7/5", "3/2"]]]},
        ("Pi", 3, False),
    ),
    ("rcf_algebraic", {}, ("Pi", 2, False)),
    (
        "rcf_finite_degree",
        {"k": 1, "cuts": [[["2", "3"], ["5/2", "3"], ["27/10", "14/5"]]]},
        ("dSigma", 2, False),
    ),
    ("pgroup_divisible", {"p": 2, "m": 3}, ("Sigma", 1, True)),
    ("pgroup_divisible", {"p": 2, "m": "omega"}, ("Pi", 2, False)),
    ("pgroup_bounded_count", {"p": 2, "n": 1}, ("Pi", 1, True)),
    ("pgroup_finite_exact", {"p": 2, "summands": [1, 1]}, ("dSigma", 1, True)),
    ("pgroup_length_limit", {"p": 2, "ulm": [2], "tail": "ones"}, ("Pi", 3, False)),
    ("pgroup_successor_minimal", {"p": 2, "n": 1, "ulm": [1], "tail": "ones"}, ("Pi", 3, False)),
    (
        "pgroup_successor_general",
        {"p": 2, "n": 1, "summands": [1, 1], "ulm": [1], "tail": "ones"},
        ("dSigma", 3, False),
    ),
    ("pgroup_uniform_tail", {"p": 2, "n": 1, "k": 0}, ("Pi", 2, False)),
    ("pgroup_uniform_tail", {"p": 2, "n": 2, "k": 1, "um_below": [1]}, ("dSigma", 2, False)),
    ("pgroup_tail_infinite", {"p": 2, "n": 1, "k": 0, "ulm": [1], "tail": "ones"}, ("Pi", 4, False)),
    (
        "pgroup_tail_infinite_offset",
        {"p": 2, "n": 2, "k": 1, "um_below": [1], "ulm": [1], "tail": "ones"},
        ("dSigma", 4, False),
    ),
    ("pgroup_mixed_tall", {"p": 2, "n": 2, "um": ["inf", "inf"]}, ("Pi", 3, False)),
    (
        "pgroup_two_infinite",
        {"p": 2, "n": 2, "um": ["inf", "inf"], "ulm": [1], "tail": "ones"},
        ("Pi", 5, False),
    ),
    ("scott_ehrenfeucht", {"model": "prime"}, ("Pi", 2, False)),
    ("scott_ehrenfeucht", {"model": "middle"}, ("Sigma", 3, False)),
    ("scott_ehrenfeucht", {"model": "saturated"}, ("Pi", 3, False)),
]
