"""Abelian p-group stages presented as ledgers of cyclic summands.

A group under construction is a finite direct sum of cyclic groups of
prime-power order.  The ledger records each summand with its current
order exponent and the history of its conversions, presents elements as
finitely supported residue tuples, and keeps a log of addition facts
that every later conversion must preserve.  Converting a summand
replaces Z_{p^e} by Z_{p^f} for f > e and re-presents every named
element through the multiplication-by-p^(f-e) embedding; the embedding
is an injective homomorphism, so logged facts stay true, and
``verify_atoms`` checks exactly that after each conversion.

Ulm invariants are computed two independent ways.  ``ulm_of_ledger``
counts summands per exponent.  ``ulm_bruteforce`` works on an explicit
addition table with no knowledge of any summand decomposition: it finds
element heights by iterating the multiply-by-p image, filters the
order-p elements by height, and reads each invariant off as the drop in
base-p logarithm between consecutive filters.  The two computations
must agree on every finite direct sum of cyclics, which is this
module's core oracle check.

``pair_realization_step`` grows a ledger whose limit Ulm sequence
matches a scripted set of lower-bound claims, where the claim (n, k)
promises at least k summands of exponent n + 1.  Claims may be
retracted; the summand witnessing a retracted claim is parked and
converted upward along a monotone landing function until it reaches a
level whose invariant is nonzero anyway.  The landing discipline is one
admissible realization of the classical existence argument, which fixes
the hypotheses on the claim set and the landing function but not the
build itself.

``run_group_reduction`` packages six scripted constructions whose
horizon groups separate isomorphism outcomes by the limit behaviour of
the driving script, from a one-bit choice between Z_{p^N} and its
square up to a length-omega build that feeds a moving level ladder into
the pair realizer.  Each run returns the standard log envelope with one
stage record per script stage.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

from .finitestructs import FiniteStructure, InvariantError, ScriptError
from .oracles import OracleScript, dsigma2_case, movable_run, validate_script

INF = "inf"


def _require_prime(p) -> None:
    if not isinstance(p, int) or p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
        raise ScriptError(f"{p!r} is not a prime")


def _valuation(x: int, p: int) -> int:
    """Largest v with p^v dividing the nonzero integer x."""
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


# ---------------------------------------------------------------------------
# Ulm vectors


@dataclass(frozen=True)
class UlmVector:
    """Finite Ulm sequence of a reduced p-group of finite length.

    Entry i counts the independent order-p elements of height exactly i,
    equivalently the cyclic summands of exponent i + 1.  Entries are
    natural numbers, or the marker ``INF`` in limit profiles.  Trailing
    zeros are stripped, so the length of the sequence is the length of
    the group and the last entry of a nonempty sequence is nonzero.
    """

    entries: tuple

    @classmethod
    def of(cls, entries) -> "UlmVector":
        items = list(entries)
        for u in items:
            if u != INF and not (isinstance(u, int) and u >= 0):
                raise ScriptError(f"Ulm entry {u!r} is neither a count nor {INF!r}")
        while items and items[-1] == 0:
            items.pop()
        return cls(tuple(items))

    @property
    def length(self) -> int:
        return len(self.entries)

    def at(self, level: int):
        """Invariant at a level, zero beyond the recorded length."""
        if 0 <= level < len(self.entries):
            return self.entries[level]
        return 0

    def to_obj(self) -> list:
        return list(self.entries)


# ---------------------------------------------------------------------------
# summand ledgers


@dataclass
class Summand:
    """One cyclic summand Z_{p^exponent} with its conversion history.

    The history holds [stage, exponent] entries, the creation first.
    """

    sid: int
    exponent: int
    history: list = field(default_factory=list)


class SummandLedger:
    """A finite direct sum of cyclic p-groups with a replayable diagram.

    Elements are finitely supported residue vectors keyed by summand id.
    The ledger names elements as they appear (the zero element, summand
    generators, logged sums) and records addition facts over the names.
    Conversions re-present every named element and then re-verify every
    logged fact, so a completed run certifies that its emitted diagram
    survived all surgery.

    The ``scratch`` dictionary is run-local bookkeeping for builders; it
    is never serialized.
    """

    def __init__(self, p: int):
        _require_prime(p)
        self.p = p
        self.summands: list[Summand] = []
        self._by_id: dict[int, Summand] = {}
        self._next_id = 0
        self.named: dict[str, dict[int, int]] = {"0": {}}
        self.atoms: list[tuple[str, str, str]] = []
        self._chains: dict[int, tuple[str, int]] = {}
        self._round = 0
        self._fresh = 0
        self.scratch: dict = {}

    # -- summand surgery ----------------------------------------------------

    def add_summand(self, exponent: int, stage: int) -> int:
        """Adjoin a fresh Z_{p^exponent} summand and name its generator."""
        if not isinstance(exponent, int) or exponent < 1:
            raise ScriptError("summand exponents must be positive integers")
        sid = self._next_id
        self._next_id += 1
        summand = Summand(sid, exponent, [[stage, exponent]])
        self.summands.append(summand)
        self._by_id[sid] = summand
        self.named[f"g{sid}"] = {sid: 1}
        return sid

    def convert_summand(self, sid: int, new_exponent: int, stage: int) -> "SummandLedger":
        """Grow one summand to a higher exponent and replay the diagram.

        The old copy embeds by multiplication with p^(new - old), so a
        residue x is re-presented as x * p^(new - old) in the larger
        cyclic group.  Shrinking is refused; every logged addition fact
        is re-verified after the re-presentation.
        """
        summand = self._by_id.get(sid)
        if summand is None:
            raise ScriptError(f"no summand with id {sid}")
        if not isinstance(new_exponent, int) or new_exponent <= summand.exponent:
            raise ScriptError("shrinking conversion: the new exponent must exceed the current one")
        factor = self.p ** (new_exponent - summand.exponent)
        modulus = self.p**new_exponent
        for vec in self.named.values():
            if sid in vec:
                vec[sid] = vec[sid] * factor % modulus
        summand.exponent = new_exponent
        summand.history.append([stage, new_exponent])
        self.verify_atoms()
        return self

    def exponent_of(self, sid: int) -> int:
        summand = self._by_id.get(sid)
        if summand is None:
            raise ScriptError(f"no summand with id {sid}")
        return summand.exponent

    def ids_at(self, exponent: int) -> list[int]:
        """Ids of the summands currently at an exponent, smallest first."""
        return sorted(s.sid for s in self.summands if s.exponent == exponent)

    def counts(self) -> dict[int, int]:
        """Multiset of current exponents as a plain dictionary."""
        out: dict[int, int] = {}
        for s in self.summands:
            out[s.exponent] = out.get(s.exponent, 0) + 1
        return out

    # -- elements -----------------------------------------------------------

    def value(self, name: str) -> dict[int, int]:
        if name not in self.named:
            raise ScriptError(f"unknown element name {name!r}")
        return dict(self.named[name])

    def _vec_add(self, u: dict[int, int], v: dict[int, int]) -> dict[int, int]:
        out = dict(u)
        for sid, r in v.items():
            modulus = self.p ** self._by_id[sid].exponent
            total = (out.get(sid, 0) + r) % modulus
            if total:
                out[sid] = total
            else:
                out.pop(sid, None)
        return out

    def add_named(self, a: str, b: str) -> dict[int, int]:
        return self._vec_add(self.value(a), self.value(b))

    def order_of(self, x) -> int:
        """Order of an element given by name or residue vector."""
        vec = self.value(x) if isinstance(x, str) else x
        top = 0
        for sid, r in vec.items():
            top = max(top, self._by_id[sid].exponent - _valuation(r, self.p))
        return self.p**top if top else 1

    # -- the logged diagram -------------------------------------------------

    def log_sum(self, a: str, b: str, stage: int) -> str:
        """Record the addition fact a + b = c and return the name of c.

        The sum reuses the first existing name holding the same vector,
        so zero sums close back onto the zero element.
        """
        vec = self.add_named(a, b)
        cname = None
        for name, known in self.named.items():
            if known == vec:
                cname = name
                break
        if cname is None:
            cname = f"e{self._fresh}"
            self._fresh += 1
            self.named[cname] = vec
        self.atoms.append((a, b, cname))
        return cname

    def log_next_atom(self, stage: int):
        """Extend one generator's multiple chain by a single logged fact.

        Generators are visited round robin in creation order; for the
        chosen generator g with current multiple m the logged fact is
        m + g, which names the next multiple.  Returns the (a, b, c)
        triple, or None while the ledger has no summands.
        """
        if not self.summands:
            return None
        summand = self.summands[self._round % len(self.summands)]
        self._round += 1
        gname = f"g{summand.sid}"
        current, mult = self._chains.get(summand.sid, (gname, 1))
        result = self.log_sum(current, gname, stage)
        self._chains[summand.sid] = (result, mult + 1)
        return (current, gname, result)

    def verify_atoms(self) -> None:
        """Re-evaluate every logged addition fact, raising on any break."""
        for a, b, c in self.atoms:
            if self._vec_add(self.named[a], self.named[b]) != self.named[c]:
                raise InvariantError(f"logged fact {a} + {b} = {c} no longer holds")

    # -- serialization ------------------------------------------------------

    def to_obj(self) -> dict:
        return {
            "p": self.p,
            "summands": [
                {"id": s.sid, "exponent": s.exponent, "history": [list(h) for h in s.history]}
                for s in sorted(self.summands, key=lambda s: s.sid)
            ],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "SummandLedger":
        """Rebuild the group shape; the diagram log is not serialized."""
        ledger = cls(obj["p"])
        for row in sorted(obj["summands"], key=lambda r: r["id"]):
            exponent = row["exponent"]
            history = [list(h) for h in row["history"]]
            if not isinstance(exponent, int) or exponent < 1:
                raise ScriptError("summand exponents must be positive integers")
            if not history or history[-1][1] != exponent:
                raise ScriptError("summand history must end at the current exponent")
            exps = [h[1] for h in history]
            if any(b <= a for a, b in zip(exps, exps[1:])):
                raise ScriptError("summand history must strictly increase")
            sid = row["id"]
            if sid in ledger._by_id:
                raise ScriptError(f"duplicate summand id {sid}")
            summand = Summand(sid, exponent, history)
            ledger.summands.append(summand)
            ledger._by_id[sid] = summand
            ledger.named[f"g{sid}"] = {sid: 1}
            ledger._next_id = max(ledger._next_id, sid + 1)
        return ledger


def height(x, ledger: SummandLedger):
    """Greatest m with x in p^m times the group, None for the zero element.

    Over a direct sum of cyclics an element is divisible by p^m exactly
    when every nonzero component is, so the height is the least p-adic
    valuation over the support.
    """
    vec = ledger.value(x) if isinstance(x, str) else x
    if not vec:
        return None
    return min(_valuation(r, ledger.p) for r in vec.values())


def ulm_of_ledger(ledger: SummandLedger) -> UlmVector:
    """Read the Ulm sequence off the summand multiset."""
    top = max((s.exponent for s in ledger.summands), default=0)
    counts = [0] * top
    for s in ledger.summands:
        counts[s.exponent - 1] += 1
    return UlmVector.of(counts)


# ---------------------------------------------------------------------------
# the brute-force oracle


def cyclic_sum_table(p: int, exponents) -> dict:
    """Explicit addition table of a direct sum of cyclic p-groups.

    Elements are indices into the lexicographic list of residue tuples;
    the table maps (i, j) to the index of the componentwise sum.  The
    empty sum is the one-element trivial group.
    """
    _require_prime(p)
    exponents = tuple(exponents)
    for e in exponents:
        if not isinstance(e, int) or e < 1:
            raise ScriptError("summand exponents must be positive integers")
    if p ** sum(exponents) > 20000:
        raise ScriptError("operation table would exceed the supported order")
    radices = [p**e for e in exponents]
    elems = list(itertools.product(*[range(r) for r in radices]))
    index = {t: i for i, t in enumerate(elems)}
    table = {}
    for i, a in enumerate(elems):
        for j, b in enumerate(elems):
            table[(i, j)] = index[tuple((x + y) % r for x, y, r in zip(a, b, radices))]
    return table


def _as_add_table(table) -> tuple[dict, int]:
    if isinstance(table, FiniteStructure):
        if dict(table.signature).get("add") != 3:
            raise ScriptError("structure does not carry a ternary addition relation")
        out: dict = {}
        for a, b, c in table.rel("add"):
            if (a, b) in out:
                raise ScriptError("addition relation is not functional")
            out[(a, b)] = c
        size = table.size
    elif isinstance(table, dict):
        out = dict(table)
        members = {i for key in out for i in key} | set(out.values())
        size = (max(members) + 1) if members else 1
        if not out:
            raise ScriptError("empty addition table")
    else:
        raise ScriptError("addition table must be a dict or a structure")
    for i in range(size):
        for j in range(size):
            if (i, j) not in out:
                raise ScriptError(f"addition table is missing the pair ({i}, {j})")
    return out, size


def ulm_bruteforce(table) -> UlmVector:
    """Ulm sequence from an explicit addition table, by pure search.

    The table is treated as an opaque finite abelian group of p-power
    order, with p inferred from the order.  Heights come from iterating
    the multiply-by-p image; the order-p elements of height at least
    beta form a filtration of subgroups, and the invariant at beta is
    the drop in base-p logarithm between consecutive filters, which is
    the dimension of the quotient as a vector space over the p-element
    field.
    """
    add, size = _as_add_table(table)
    if size == 1:
        return UlmVector.of(())
    p = 2
    while size % p:
        p += 1
    n = size
    while n % p == 0:
        n //= p
    if n != 1:
        raise ScriptError("table order is not a prime power")
    zero = None
    for e in range(size):
        if all(add[(e, x)] == x for x in range(size)):
            zero = e
            break
    if zero is None:
        raise ScriptError("addition table has no identity")
    times_p = []
    for x in range(size):
        acc = zero
        for _ in range(p):
            acc = add[(acc, x)]
        times_p.append(acc)
    levels = [set(range(size))]
    while levels[-1] != {zero}:
        image = {times_p[x] for x in levels[-1]}
        if image == levels[-1]:
            raise ScriptError("table is not a reduced p-group")
        levels.append(image)
    socle = {x for x in range(size) if times_p[x] == zero}
    sizes = []
    for layer in levels:
        filtered = socle & layer
        sizes.append(len(filtered))
        if filtered == {zero}:
            break
    entries = []
    for lo, hi in zip(sizes[1:], sizes[:-1]):
        if hi % lo:
            raise ScriptError("height filtration sizes are not p-power multiples")
        entries.append(_plog(hi // lo, p))
    return UlmVector.of(entries)


def _plog(m: int, p: int) -> int:
    k = 0
    while m % p == 0:
        m //= p
        k += 1
    if m != 1:
        raise ScriptError("subgroup index is not a power of the prime")
    return k


def exponent_partitions(max_sum: int) -> list[tuple]:
    """Nonincreasing positive exponent tuples with total at most max_sum.

    The empty tuple comes first; the listing is deterministic and covers
    every isomorphism type of an abelian p-group of order up to
    p^max_sum.
    """
    out = [()]

    def grow(prefix, remaining, cap):
        for e in range(min(cap, remaining), 0, -1):
            tup = prefix + (e,)
            out.append(tup)
            grow(tup, remaining - e, e)

    grow((), max_sum, max_sum)
    return out


# ---------------------------------------------------------------------------
# limitwise monotonic approximations


@dataclass(frozen=True)
class LimitwiseMonotonicFun:
    """Stagewise function approximation, nondecreasing in the stage.

    Row n lists the guesses at argument n; reading past the end of a row
    repeats its last value, so the final entry is the limit.
    """

    rows: tuple

    @classmethod
    def of(cls, rows) -> "LimitwiseMonotonicFun":
        packed = []
        for n, row in enumerate(rows):
            row = tuple(row)
            if not row:
                raise ScriptError(f"approximation row {n} is empty")
            for v in row:
                if not isinstance(v, int) or v < 0:
                    raise ScriptError(f"approximation row {n} holds a non-natural value")
            if any(b < a for a, b in zip(row, row[1:])):
                raise ScriptError(f"approximation row {n} is not monotone")
            packed.append(row)
        return cls(tuple(packed))

    def value(self, n: int, s: int) -> int:
        if not 0 <= n < len(self.rows):
            raise ScriptError(f"no approximation row for argument {n}")
        row = self.rows[n]
        return row[min(max(s, 0), len(row) - 1)]

    def limit(self, n: int) -> int:
        if not 0 <= n < len(self.rows):
            raise ScriptError(f"no approximation row for argument {n}")
        return self.rows[n][-1]


# ---------------------------------------------------------------------------
# scripted lower-bound claims


@dataclass(frozen=True)
class PairScript:
    """Stage table of believed (level, count) lower-bound claims.

    The claim (n, k) read at a stage promises at least k summands of
    exponent n + 1 in the limit group.  Rows may both gain and lose
    claims; from the settle stage on, every row holds exactly the
    declared limit set.
    """

    horizon: int
    declared_limit: tuple
    settle_stage: int
    table: tuple

    def believed(self, s: int) -> frozenset:
        return frozenset(self.table[s])

    def to_obj(self) -> dict:
        return {
            "kind": "pair_claims",
            "horizon": self.horizon,
            "declared_limit": [list(q) for q in self.declared_limit],
            "settle_stage": self.settle_stage,
            "table": [[list(q) for q in row] for row in self.table],
        }


def make_pair_script(rows) -> PairScript:
    """Pack claim rows into a script, computing settle and limit.

    The declared limit is the final row; the settle stage is the least
    stage from which every row equals it.
    """
    packed = []
    for row in rows:
        packed.append(tuple(sorted({(int(n), int(k)) for n, k in row})))
    declared = packed[-1] if packed else ()
    settle = len(packed)
    for s in range(len(packed) - 1, -1, -1):
        if set(packed[s]) != set(declared):
            break
        settle = s
    script = PairScript(len(packed), declared, settle, tuple(packed))
    problems = validate_pair_script(script)
    if problems:
        raise ScriptError("; ".join(problems))
    return script


def pair_script_from_obj(obj: dict) -> PairScript:
    if obj.get("kind") != "pair_claims":
        raise ScriptError("object does not describe a claim script")
    return PairScript(
        obj["horizon"],
        tuple(tuple(q) for q in obj["declared_limit"]),
        obj["settle_stage"],
        tuple(tuple(tuple(q) for q in row) for row in obj["table"]),
    )


def validate_pair_script(script: PairScript) -> list[str]:
    """Structural validation; returns violation strings, empty when valid."""
    out: list[str] = []
    if script.horizon != len(script.table):
        out.append("horizon does not match table length")
    if not 0 <= script.settle_stage <= script.horizon:
        out.append("settle_stage out of range")
        return out

    def check_row(row, where) -> bool:
        for q in row:
            if not (
                isinstance(q, tuple)
                and len(q) == 2
                and isinstance(q[0], int)
                and isinstance(q[1], int)
                and q[0] >= 0
                and q[1] >= 1
            ):
                out.append(f"{where} holds a malformed claim {q!r}")
                return False
        if list(row) != sorted(set(row)):
            out.append(f"{where} is not a sorted set of claims")
            return False
        return True

    for s, row in enumerate(script.table):
        if not check_row(row, f"row at stage {s}"):
            return out
    if not check_row(script.declared_limit, "declared_limit"):
        return out
    for s in range(script.settle_stage, script.horizon):
        if set(script.table[s]) != set(script.declared_limit):
            out.append("tail rows do not hold the declared limit set")
            break
    return out


def close_down(pairs) -> frozenset:
    """Downward closure of claims in the count coordinate.

    A promise of k summands at a level entails the promises of every
    positive count below k, and the realizer witnesses each entailed
    claim separately.
    """
    out = set()
    for n, k in pairs:
        for j in range(1, k + 1):
            out.add((n, j))
    return frozenset(out)


def window_match(pairs, ulm: UlmVector) -> tuple[bool, list]:
    """Compare claims against an Ulm vector on the window they span.

    The window runs over all levels up to the largest claimed level and
    all counts up to the largest claimed count; inside it, the vector
    must meet a claim exactly when the claim's closure contains it.
    Returns (ok, mismatching [level, count] pairs).
    """
    closed = close_down(pairs)
    if not closed:
        return True, []
    top_n = max(n for n, _ in closed)
    top_k = max(k for _, k in closed)
    bad = []
    for n in range(top_n + 1):
        for k in range(1, top_k + 1):
            u = ulm.at(n)
            holds = u == INF or u >= k
            if holds != ((n, k) in closed):
                bad.append([n, k])
    return not bad, bad


# ---------------------------------------------------------------------------
# the pair realizer


def pair_realization_step(script: PairScript, f, ledger: SummandLedger, s: int) -> SummandLedger:
    """One stage of realizing scripted claims as summand counts.

    Every claim believed at the stage keeps a witness summand of the
    claimed exponent.  A retracted claim parks its witness, remembering
    the claim's level as the parked home; parked summands convert upward
    to exponent f(home, s) + 1 as the landing function grows.  A fresh
    claim adopts the oldest parked summand already at the right exponent
    before creating a new one.  A parked summand that has arrived at its
    landing level while every claim there is separately witnessed climbs
    one step further and re-homes to the level it just left, so it heads
    for the next landing rather than inflating a fully counted level.

    The landing function must be nondecreasing in the stage with limits
    sitting on levels of nonzero invariant; under those hypotheses the
    settled ledger matches the settled claims on the window they span.
    The step stores its bookkeeping in ``ledger.scratch`` and returns
    the mutated ledger.
    """
    believed = close_down(script.believed(s))
    state = ledger.scratch.setdefault("realizer", {"witness": {}, "parked": []})
    witness = state["witness"]
    parked = state["parked"]
    for pair in sorted(witness):
        if pair not in believed:
            parked.append({"sid": witness.pop(pair), "home": pair[0]})
    for pair in sorted(believed):
        if pair in witness:
            continue
        level = pair[0]
        adopted = None
        for entry in parked:
            if ledger.exponent_of(entry["sid"]) == level + 1:
                adopted = entry
                break
        if adopted is not None:
            parked.remove(adopted)
            witness[pair] = adopted["sid"]
        else:
            witness[pair] = ledger.add_summand(level + 1, s)
    for entry in parked:
        target = f.value(entry["home"], s) + 1
        if ledger.exponent_of(entry["sid"]) < target:
            ledger.convert_summand(entry["sid"], target, s)
    for entry in parked:
        exponent = ledger.exponent_of(entry["sid"])
        if exponent != f.value(entry["home"], s) + 1:
            continue
        level = exponent - 1
        at_level = [q for q in believed if q[0] == level]
        if at_level and all(q in witness for q in at_level):
            ledger.convert_summand(entry["sid"], exponent + 1, s)
            entry["home"] = exponent
    return ledger


def realize_pairs(script: PairScript, f, p: int) -> SummandLedger:
    """Run the pair realizer over a whole claim script on a fresh ledger."""
    problems = validate_pair_script(script)
    if problems:
        raise ScriptError("; ".join(problems))
    ledger = SummandLedger(p)
    for s in range(script.horizon):
        pair_realization_step(script, f, ledger, s)
    return ledger


# ---------------------------------------------------------------------------
# scripted constructions


GROUP_MODES = (
    "cyclic_pi1",
    "finite_dce",
    "tail_pi2",
    "marked_dsigma2",
    "two_infinite_pi3",
    "length_omega_pi3",
)


def run_group_reduction(mode: str, params: dict, script) -> dict:
    """Entry point for the group constructions.

    Every mode builds a ledger stage by stage under its script, logs one
    addition fact per stage, and reports the horizon group next to the
    outcome its script limit declares.
    """
    if mode == "cyclic_pi1":
        return _run_cyclic(params, script)
    if mode == "finite_dce":
        return _run_finite_dce(params, script)
    if mode == "tail_pi2":
        return _run_tail(params, script)
    if mode == "marked_dsigma2":
        return _run_marked(params, script)
    if mode == "two_infinite_pi3":
        return _run_two_infinite(params, script)
    if mode == "length_omega_pi3":
        return _run_length_omega(params, script)
    raise ScriptError(f"unknown group mode {mode!r}")


def _precheck(script: OracleScript, kind: str, mode: str) -> None:
    if script.kind != kind:
        raise ScriptError(f"mode {mode} is driven by {kind} scripts, not {script.kind}")
    problems = validate_script(script)
    if problems:
        raise ScriptError("; ".join(problems))
    if script.horizon == 0:
        raise ScriptError("group runs need at least one stage")


def _stage_record(ledger: SummandLedger, s: int, drive, before: dict) -> tuple[dict, dict]:
    after = {m.sid: m.exponent for m in ledger.summands}
    created = [[sid, e] for sid, e in sorted(after.items()) if sid not in before]
    converted = [
        [sid, before[sid], after[sid]] for sid in sorted(before) if after[sid] != before[sid]
    ]
    atom = ledger.log_next_atom(s)
    record = {
        "s": s,
        "drive": drive,
        "created": created,
        "converted": converted,
        "new_atoms": [list(atom)] if atom else [],
        "ulm": ulm_of_ledger(ledger).to_obj(),
    }
    return record, after


def _envelope(mode: str, params: dict, script_obj, stages: list, final: dict) -> dict:
    return {
        "format": "limitstage.run.v1",
        "construction": f"pgroups.{mode}",
        "params": params,
        "script": script_obj,
        "stages": stages,
        "final": final,
    }


def _base_exponents(params: dict, banned: dict) -> list[int]:
    base = list(params.get("base", ()))
    for e in base:
        if not isinstance(e, int) or e < 1:
            raise ScriptError("base summand exponents must be positive integers")
        if e in banned:
            raise ScriptError(f"base summands must avoid the {banned[e]} level")
    return sorted(base)


def _profile(base: list[int], overrides: dict) -> UlmVector:
    """Limit Ulm profile of a base multiset with per-level overrides."""
    top = max([e for e in base] + [lvl + 1 for lvl in overrides], default=0)
    entries: list = [0] * top
    for e in base:
        entries[e - 1] += 1
    for lvl, v in overrides.items():
        entries[lvl] = v
    return UlmVector.of(entries)


def _retained(records: list, ledger: SummandLedger, exponent: int, target: int) -> set:
    """Pick which summands to keep at a level after an overshoot.

    Looks back for the most recent stage whose recorded cohort was within
    the target and keeps the members of that cohort still at the level,
    smallest ids first; with no such stage, nothing is kept.
    """
    chosen: tuple = ()
    for past in reversed(records):
        if len(past) <= target:
            chosen = past
            break
    alive = [sid for sid in chosen if ledger.exponent_of(sid) == exponent]
    return set(alive[:target])


def _run_cyclic(params: dict, script: OracleScript) -> dict:
    """One cyclic group against its square, decided by a shrinking bit.

    While the bit holds the group stays Z_{p^length}; the first zero bit
    adjoins a second copy, and zeros are permanent, so the limit group
    is the single copy exactly when the script limit is one.
    """
    _precheck(script, "pi1", "cyclic_pi1")
    p = params["p"]
    _require_prime(p)
    length = params["length"]
    if not isinstance(length, int) or length < 1:
        raise ScriptError("the cyclic length must be a positive integer")
    ledger = SummandLedger(p)
    stages: list = []
    before: dict = {}
    doubled = False
    for s in range(script.horizon):
        if s == 0:
            ledger.add_summand(length, s)
        if script.table[s] == 0 and not doubled:
            ledger.add_summand(length, s)
            doubled = True
        record, before = _stage_record(ledger, s, script.table[s], before)
        stages.append(record)
    ulm = ulm_of_ledger(ledger)
    outcome = "single" if script.declared_limit == 1 else "double"
    expected = UlmVector.of([0] * (length - 1) + [1 if outcome == "single" else 2])
    final = {
        "outcome": outcome,
        "ulm": ulm.to_obj(),
        "expected_ulm": expected.to_obj(),
        "matches_case": ulm == expected,
        "summands": sorted(m.exponent for m in ledger.summands),
        "order_exponent": sum(m.exponent for m in ledger.summands),
        "settled": script.settle_stage < script.horizon,
        "atoms": len(ledger.atoms),
    }
    return _envelope("cyclic_pi1", params, script.to_obj(), stages, final)


def _tiers(params: dict) -> list[Counter]:
    tiers = []
    for key in ("minus", "mid", "plus"):
        exps = list(params[key])
        for e in exps:
            if not isinstance(e, int) or e < 1:
                raise ScriptError("case group exponents must be positive integers")
        if not exps:
            raise ScriptError("case groups must not be trivial")
        tiers.append(Counter(exps))
    for small, large in zip(tiers, tiers[1:]):
        if any(small[e] > large[e] for e in small):
            raise ScriptError("case groups must form a nested summand chain")
        if small == large:
            raise ScriptError("case group inclusions must be proper")
    if len({max(t) for t in tiers}) != 1:
        raise ScriptError("case groups must share their length")
    return tiers


def _run_finite_dce(params: dict, script: OracleScript) -> dict:
    """Nested triple of finite groups along a two-set difference script.

    The case index only ever climbs, and each climb adjoins the summands
    that extend the current group to the next one in the chain, so the
    horizon group is the chain member picked by the settled case.
    """
    _precheck(script, "dsigma2", "finite_dce")
    for col in (0, 1):
        bits = [pair[col] for pair in script.table]
        if any(b < a for a, b in zip(bits, bits[1:])):
            raise ScriptError("finite_dce needs computably-enumerable script components")
    p = params["p"]
    _require_prime(p)
    tiers = _tiers(params)
    ledger = SummandLedger(p)
    stages: list = []
    before: dict = {}
    applied = 0
    prev_case = None
    for s in range(script.horizon):
        case = dsigma2_case(script.table[s])
        if prev_case is not None and case < prev_case:
            raise ScriptError(f"case regressed at stage {s}")
        prev_case = case
        if s == 0:
            for e in sorted(tiers[0].elements()):
                ledger.add_summand(e, s)
        while applied < case:
            for e in sorted((tiers[applied + 1] - tiers[applied]).elements()):
                ledger.add_summand(e, s)
            applied += 1
        record, before = _stage_record(ledger, s, case, before)
        stages.append(record)
    final_case = prev_case if prev_case is not None else 0
    ulm = ulm_of_ledger(ledger)
    expected = _expected_of_counter(tiers[final_case])
    final = {
        "case": final_case,
        "outcome": ("minus", "mid", "plus")[final_case],
        "ulm": ulm.to_obj(),
        "expected_ulm": expected.to_obj(),
        "matches_case": ulm == expected,
        "summands": sorted(m.exponent for m in ledger.summands),
        "settled": script.settle_stage < script.horizon,
        "atoms": len(ledger.atoms),
    }
    return _envelope("finite_dce", params, script.to_obj(), stages, final)


def _expected_of_counter(counter: Counter) -> UlmVector:
    top = max(counter)
    entries = [0] * top
    for e, c in counter.items():
        entries[e - 1] += c
    return UlmVector.of(entries)


def _run_tail(params: dict, script: OracleScript) -> dict:
    """Grow one level without bound exactly on believing stages.

    Every stage whose bit is one adjoins a summand at the counted level;
    infinitely many ones make the invariant there infinite, finitely
    many freeze it at the number of believing stages.
    """
    _precheck(script, "pi2", "tail_pi2")
    p = params["p"]
    _require_prime(p)
    level = params["level"]
    if not isinstance(level, int) or level < 0:
        raise ScriptError("the counted level must be a natural number")
    base = list(params.get("base", ()))
    for e in base:
        if not isinstance(e, int) or e <= level + 1:
            raise ScriptError("base summands must sit strictly above the counted level")
    ledger = SummandLedger(p)
    stages: list = []
    before: dict = {}
    count_trace = []
    for s in range(script.horizon):
        if s == 0:
            for e in sorted(base):
                ledger.add_summand(e, s)
        if script.table[s] == 1:
            ledger.add_summand(level + 1, s)
        count_trace.append(len(ledger.ids_at(level + 1)))
        record, before = _stage_record(ledger, s, script.table[s], before)
        stages.append(record)
    count = count_trace[-1]
    unbounded = script.declared_limit == 1
    final = {
        "outcome": "unbounded" if unbounded else "frozen",
        "count": count,
        "count_trace": count_trace,
        "believing_stages": [s for s in range(script.horizon) if script.table[s] == 1],
        "ulm": ulm_of_ledger(ledger).to_obj(),
        "limit_ulm": _profile(base, {level: INF if unbounded else count}).to_obj(),
        "settled": script.settle_stage < script.horizon,
        "atoms": len(ledger.atoms),
    }
    return _envelope("tail_pi2", params, script.to_obj(), stages, final)


def _marked_levels(params: dict) -> tuple[int, int]:
    marked = params["marked_level"]
    tail = params["tail_level"]
    for value in (marked, tail):
        if not isinstance(value, int) or value < 0:
            raise ScriptError("levels must be natural numbers")
    if marked >= tail:
        raise ScriptError("the marked level must lie below the tail level")
    return marked, tail


def _run_marked(params: dict, script: OracleScript) -> dict:
    """Match a marked level's count to a three-case difference script.

    The case picks the target count at the marked level: zero, the
    middle count, or the larger outer count.  Overshoots convert the
    surplus up to the tail level, keeping the cohort recorded at the
    most recent stage that was within the target; undershoots create
    fresh summands.  Every stage also adjoins one tail summand, so the
    tail level's invariant is infinite in every limit case.
    """
    _precheck(script, "dsigma2", "marked_dsigma2")
    p = params["p"]
    _require_prime(p)
    marked, tail = _marked_levels(params)
    count_mid = params["count_mid"]
    count_plus = params["count_plus"]
    for value in (count_mid, count_plus):
        if not isinstance(value, int) or value < 1:
            raise ScriptError("target counts must be positive integers")
    if count_mid >= count_plus:
        raise ScriptError("the outer count must exceed the middle count")
    base = _base_exponents(params, {marked + 1: "marked", tail + 1: "tail"})
    targets = (0, count_mid, count_plus)
    ledger = SummandLedger(p)
    stages: list = []
    before: dict = {}
    records: list = []
    tail_trace = []
    for s in range(script.horizon):
        if s == 0:
            for e in base:
                ledger.add_summand(e, s)
        case = dsigma2_case(script.table[s])
        target = targets[case]
        cohort = ledger.ids_at(marked + 1)
        if len(cohort) > target:
            keep = _retained(records, ledger, marked + 1, target)
            for sid in cohort:
                if sid not in keep:
                    ledger.convert_summand(sid, tail + 1, s)
            cohort = sorted(keep)
        while len(cohort) < target:
            cohort.append(ledger.add_summand(marked + 1, s))
        ledger.add_summand(tail + 1, s)
        records.append(tuple(sorted(cohort)))
        tail_trace.append(len(ledger.ids_at(tail + 1)))
        record, before = _stage_record(ledger, s, case, before)
        stages.append(record)
    final_case = dsigma2_case(script.declared_limit)
    ulm = ulm_of_ledger(ledger)
    final = {
        "case": final_case,
        "outcome": ("cleared", "count_mid", "count_plus")[final_case],
        "marked_count": ulm.at(marked),
        "target": targets[final_case],
        "matches_case": script.settle_stage < script.horizon
        and ulm.at(marked) == targets[final_case],
        "tail_trace": tail_trace,
        "ulm": ulm.to_obj(),
        "limit_ulm": _profile(base, {marked: targets[final_case], tail: INF}).to_obj(),
        "settled": script.settle_stage < script.horizon,
        "atoms": len(ledger.atoms),
    }
    return _envelope("marked_dsigma2", params, script.to_obj(), stages, final)


def _run_two_infinite(params: dict, script: OracleScript) -> dict:
    """Track a movable finite set's size at the marked level.

    The moving front of an enumeration's complement drives the count of
    marked summands; shrinks convert the surplus up to the tail level
    under the same retained-cohort rule as the matched construction, and
    every stage adjoins one tail summand.  When the enumerated set is
    cofinite the front keeps returning to the declared gaps, and the
    marked invariant is read at the last such return.
    """
    _precheck(script, "ce_enum", "two_infinite_pi3")
    p = params["p"]
    _require_prime(p)
    marked, tail = _marked_levels(params)
    base = _base_exponents(params, {marked + 1: "marked", tail + 1: "tail"})
    fronts = movable_run(script)
    ledger = SummandLedger(p)
    stages: list = []
    before: dict = {}
    records: list = []
    tail_trace = []
    for s in range(script.horizon):
        if s == 0:
            for e in base:
                ledger.add_summand(e, s)
        front = fronts[s]
        target = len(front)
        cohort = ledger.ids_at(marked + 1)
        if len(cohort) > target:
            keep = _retained(records, ledger, marked + 1, target)
            for sid in cohort:
                if sid not in keep:
                    ledger.convert_summand(sid, tail + 1, s)
            cohort = sorted(keep)
        while len(cohort) < target:
            cohort.append(ledger.add_summand(marked + 1, s))
        ledger.add_summand(tail + 1, s)
        records.append(tuple(sorted(cohort)))
        tail_trace.append(len(ledger.ids_at(tail + 1)))
        record, before = _stage_record(ledger, s, list(front), before)
        stages.append(record)
    gaps = tuple(sorted(script.declared_limit))
    hits = [s for s in range(script.horizon) if fronts[s] == gaps]
    settled = bool(hits) and script.settle_stage < script.horizon
    read_stage = hits[-1] if hits else script.horizon - 1
    read_ulm = UlmVector.of(stages[read_stage]["ulm"])
    final = {
        "read_stage": read_stage,
        "gaps": list(gaps),
        "marked_count": read_ulm.at(marked),
        "matches_case": settled and read_ulm.at(marked) == len(gaps),
        "tail_trace": tail_trace,
        "ulm": ulm_of_ledger(ledger).to_obj(),
        "limit_ulm": _profile(base, {marked: len(gaps), tail: INF}).to_obj(),
        "settled": settled,
        "atoms": len(ledger.atoms),
    }
    return _envelope("two_infinite_pi3", params, script.to_obj(), stages, final)


class _LadderFun:
    """Landing function reading the odd rungs of a moving level ladder."""

    def __init__(self, rung):
        self._rung = rung

    def value(self, n: int, s: int) -> int:
        return self._rung(2 * n + 1, s)


def _run_length_omega(params: dict, script: OracleScript) -> dict:
    """Length-omega build from a level ladder and scripted claims.

    A monotone ladder of levels is approximated from the landing rows;
    stage s believes the claims (rung, 1) for the first s odd rungs, and
    while the membership bit holds it also believes the scripted claim
    rows.  The believed claims feed the pair realizer, whose landing
    function reads the odd rungs, so retracted claims park their
    witnesses on the ladder.  With the bit exiting, only the ladder
    survives; with it holding, the claim rows shape the limit group.
    """
    _precheck(script, "pi1", "length_omega_pi3")
    p = params["p"]
    _require_prime(p)
    landing = LimitwiseMonotonicFun.of(params["landing_rows"])
    claim_rows = [
        tuple(sorted({(int(n), int(k)) for n, k in row})) for row in params["claim_rows"]
    ]
    if len(claim_rows) != script.horizon:
        raise ScriptError("claim rows must cover exactly the script horizon")
    for earlier, later in zip(claim_rows, claim_rows[1:]):
        if not set(earlier) <= set(later):
            raise ScriptError("claim rows must be cumulative")
    memo: dict = {}

    def rung(i: int, s: int) -> int:
        key = (i, s)
        if key not in memo:
            if s == 0:
                memo[key] = i
            elif i == 0:
                memo[key] = landing.value(0, s)
            else:
                memo[key] = max(landing.value(rung(i - 1, s) + 1, s), rung(i, s - 1))
        return memo[key]

    rows = []
    for s in range(script.horizon):
        pairs = {(rung(2 * j + 1, s), 1) for j in range(s)}
        if script.table[s] == 1:
            pairs |= set(claim_rows[s])
        rows.append(tuple(sorted(pairs)))
    claims = make_pair_script(rows)
    ladder_fun = _LadderFun(rung)
    ledger = SummandLedger(p)
    stages: list = []
    before: dict = {}
    for s in range(script.horizon):
        pair_realization_step(claims, ladder_fun, ledger, s)
        record, before = _stage_record(ledger, s, [list(q) for q in rows[s]], before)
        stages.append(record)
    ulm = ulm_of_ledger(ledger)
    believed = claims.declared_limit
    ok, mismatches = window_match(set(believed), ulm)
    final = {
        "outcome": "tracks_claims" if script.declared_limit == 1 else "ladder_only",
        "believed": [list(q) for q in believed],
        "ladder": [rung(2 * j + 1, script.horizon - 1) for j in range(script.horizon - 1)],
        "claims_hold": all(ulm.at(n) >= k for n, k in close_down(believed)),
        "window_ok": ok,
        "window_mismatches": mismatches,
        "ulm": ulm.to_obj(),
        "summands": sorted(m.exponent for m in ledger.summands),
        "settled": script.settle_stage < script.horizon
        and claims.settle_stage < claims.horizon,
        "atoms": len(ledger.atoms),
    }
    return _envelope("length_omega_pi3", params, script.to_obj(), stages, final)
