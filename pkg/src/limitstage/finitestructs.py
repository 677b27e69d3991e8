"""Finite relational structures and their case-table constructions.

Structures here are finite, purely relational, with universe ``0..size-1``.
A construction run consumes a two-component script whose induced case
(outside / first-only / both) picks one structure out of a nested triple
``A_minus <= A <= A_plus`` and keeps emitting that structure's atomic
diagram, one new sentence per stage, in a fixed global enumeration order.
Because the triples are nested as induced substructures and the script
components only ever switch on, the emitted diagram is monotone and its
union at the horizon is the diagram of the settled case structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .oracles import OracleScript, dsigma2_case, validate_script


class ScriptError(ValueError):
    """Raised when a run is handed a script that fails its precondition."""


class InvariantError(RuntimeError):
    """Raised when a run detects that one of its own invariants broke."""


@dataclass(frozen=True)
class FiniteStructure:
    """A finite relational structure with universe ``0..size-1``.

    ``signature`` is a sorted tuple of (relation name, arity) pairs;
    ``relations`` holds, per relation, the sorted tuple of its tuples.
    """

    signature: tuple[tuple[str, int], ...]
    size: int
    relations: tuple[tuple[str, tuple[tuple[int, ...], ...]], ...]

    @staticmethod
    def make(signature, size, relations: dict) -> "FiniteStructure":
        sig = tuple(sorted((str(n), int(a)) for n, a in signature))
        rels = []
        by_name = dict(relations)
        for name, arity in sig:
            tuples = sorted(tuple(int(x) for x in t) for t in by_name.get(name, ()))
            for t in tuples:
                if len(t) != arity or any(not 0 <= x < size for x in t):
                    raise ValueError(f"tuple {t} does not fit relation {name}/{arity} on size {size}")
            if len(set(tuples)) != len(tuples):
                raise ValueError(f"duplicate tuples in relation {name}")
            rels.append((name, tuple(tuples)))
        return FiniteStructure(sig, size, tuple(rels))

    def rel(self, name: str) -> frozenset:
        for n, tuples in self.relations:
            if n == name:
                return frozenset(tuples)
        raise KeyError(name)

    def holds(self, name: str, args: tuple[int, ...]) -> bool:
        return args in self.rel(name)

    def to_obj(self) -> dict:
        return {
            "signature": [[n, a] for n, a in self.signature],
            "size": self.size,
            "relations": {n: [list(t) for t in tuples] for n, tuples in self.relations},
        }

    @staticmethod
    def from_obj(obj: dict) -> "FiniteStructure":
        return FiniteStructure.make(
            [(n, a) for n, a in obj["signature"]], obj["size"], obj.get("relations", {})
        )


BINARY_SIG = (("R", 2),)


def restrict(a: FiniteStructure, keep) -> FiniteStructure:
    """Induced substructure on ``keep``, renumbered in increasing order."""
    keep = sorted(set(keep))
    if any(not 0 <= x < a.size for x in keep):
        raise ValueError("restriction outside the universe")
    index = {x: i for i, x in enumerate(keep)}
    rels = {
        name: [tuple(index[x] for x in t) for t in tuples if all(x in index for x in t)]
        for name, tuples in a.relations
    }
    return FiniteStructure.make(a.signature, len(keep), rels)


def extend(a: FiniteStructure, new_tuples: dict | None = None) -> FiniteStructure:
    """One-element extension; ``new_tuples`` lists tuples touching the new
    element (the default extension adds none)."""
    rels = {name: list(tuples) for name, tuples in a.relations}
    for name, extra in (new_tuples or {}).items():
        for t in extra:
            t = tuple(int(x) for x in t)
            if a.size not in t:
                raise ValueError(f"extension tuple {t} does not touch the new element")
            rels.setdefault(name, []).append(t)
    return FiniteStructure.make(a.signature, a.size + 1, rels)


def is_induced_substructure(small: FiniteStructure, big: FiniteStructure) -> bool:
    """Identity-embedding check: ``small`` is ``big`` induced on a prefix."""
    if small.signature != big.signature or small.size > big.size:
        return False
    for name, _ in small.signature:
        induced = {t for t in big.rel(name) if all(x < small.size for x in t)}
        if induced != small.rel(name):
            return False
    return True


# ---------------------------------------------------------------------------
# isomorphism by brute force (structures of size <= 8)


def _profile(a: FiniteStructure, x: int):
    out = []
    for name, tuples in a.relations:
        occ = tuple(sorted(tuple(i for i, y in enumerate(t) if y == x) for t in tuples if x in t))
        out.append((name, occ))
    return tuple(out)


def isomorphic(a: FiniteStructure, b: FiniteStructure) -> bool:
    """Brute-force isomorphism with per-element occurrence pruning."""
    if a.signature != b.signature or a.size != b.size:
        return False
    if a.relations == b.relations:
        return True
    if a.size > 8:
        raise ValueError("brute-force isomorphism is limited to size 8")
    if [len(t) for _, t in a.relations] != [len(t) for _, t in b.relations]:
        return False
    prof_a = [_profile(a, x) for x in range(a.size)]
    prof_b = [_profile(b, x) for x in range(b.size)]
    if sorted(prof_a) != sorted(prof_b):
        return False
    candidates = [[y for y in range(b.size) if prof_b[y] == prof_a[x]] for x in range(a.size)]
    rels_a = [(name, tuples) for name, tuples in a.relations]
    rel_b = {name: frozenset(tuples) for name, tuples in b.relations}

    assignment = [-1] * a.size
    used = [False] * b.size

    def consistent(x: int) -> bool:
        for name, tuples in rels_a:
            target = rel_b[name]
            for t in tuples:
                if x in t and all(assignment[z] >= 0 for z in t):
                    if tuple(assignment[z] for z in t) not in target:
                        return False
        return True

    def negative_ok(x: int) -> bool:
        for name, _ in rels_a:
            pos = a.rel(name)
            target = rel_b[name]
            for t in product(range(a.size), repeat=_arity(a, name)):
                if x in t and all(assignment[z] >= 0 for z in t) and t not in pos:
                    if tuple(assignment[z] for z in t) in target:
                        return False
        return True

    def search(x: int) -> bool:
        if x == a.size:
            return True
        for y in candidates[x]:
            if used[y]:
                continue
            assignment[x] = y
            used[y] = True
            if consistent(x) and negative_ok(x) and search(x + 1):
                return True
            assignment[x] = -1
            used[y] = False
        return False

    return search(0)


def _arity(a: FiniteStructure, name: str) -> int:
    for n, ar in a.signature:
        if n == name:
            return ar
    raise KeyError(name)


def canonical_key(a: FiniteStructure):
    """Smallest relation presentation over all universe permutations."""
    if a.size > 8:
        raise ValueError("canonical form is limited to size 8")
    best = None
    for perm in _permutations(a.size):
        rels = tuple(
            (name, tuple(sorted(tuple(perm[x] for x in t) for t in tuples)))
            for name, tuples in a.relations
        )
        if best is None or rels < best:
            best = rels
    return (a.signature, a.size, best)


def _permutations(n: int):
    from itertools import permutations

    return permutations(range(n))


def enumerate_binary_structures(max_size: int) -> list[FiniteStructure]:
    """All structures over one binary relation, one per isomorphism class,
    for every universe size up to ``max_size``.

    The size-4 sweep walks all 2^16 relation masks, so a byte-table trick
    keeps the canonical-form computation quick.
    """
    out: list[FiniteStructure] = []
    for size in range(max_size + 1):
        cells = [(i, j) for i in range(size) for j in range(size)]
        cell_index = {c: k for k, c in enumerate(cells)}
        perms = list(_permutations(size))
        # per permutation: where each bit moves
        moves = []
        for perm in perms:
            moves.append([cell_index[(perm[i], perm[j])] for (i, j) in cells])
        n_cells = len(cells)
        lo_bits = min(8, n_cells)
        tables = []
        for mv in moves:
            lo = [0] * (1 << lo_bits)
            for chunk in range(1 << lo_bits):
                v = 0
                for b in range(lo_bits):
                    if chunk >> b & 1:
                        v |= 1 << mv[b]
                lo[chunk] = v
            hi_bits = n_cells - lo_bits
            hi = [0] * (1 << hi_bits)
            for chunk in range(1 << hi_bits):
                v = 0
                for b in range(hi_bits):
                    if chunk >> b & 1:
                        v |= 1 << mv[lo_bits + b]
                hi[chunk] = v
            tables.append((lo, hi))
        lo_mask = (1 << lo_bits) - 1
        seen = set()
        for mask in range(1 << n_cells):
            canon = mask
            for lo, hi in tables:
                image = lo[mask & lo_mask] | hi[mask >> lo_bits]
                if image < canon:
                    canon = image
            if canon not in seen:
                seen.add(canon)
                tuples = [cells[k] for k in range(n_cells) if mask >> k & 1]
                out.append(FiniteStructure.make(BINARY_SIG, size, {"R": tuples}))
    return out


# ---------------------------------------------------------------------------
# diagram enumeration and case runs


def atom_stream(signature, universe_size: int):
    """Atoms over a finite universe: grouped by the largest element
    mentioned, then by relation, then lexicographically."""
    for m in range(universe_size):
        for name, arity in signature:
            for t in product(range(m + 1), repeat=arity):
                if m in t:
                    yield (name, t)


def diagram_prefix(a: FiniteStructure, count: int):
    """First ``count`` signed sentences of the atomic diagram."""
    out = []
    for name, t in atom_stream(a.signature, a.size):
        if len(out) >= count:
            break
        out.append((name, t, 1 if a.holds(name, t) else 0))
    return out


def structure_from_diagram(signature, size: int, atoms) -> FiniteStructure:
    """Rebuild a structure from decided sentences; every atom over the
    universe must be decided."""
    decided = {(name, t): sign for name, t, sign in atoms}
    rels: dict[str, list] = {}
    for name, t in atom_stream(signature, size):
        if (name, t) not in decided:
            raise InvariantError(f"diagram does not decide {name}{t}")
        if decided[(name, t)]:
            rels.setdefault(name, []).append(t)
    return FiniteStructure.make(signature, size, rels)


MODES = ("pi1_empty", "dce")


def run_finite_reduction(mode: str, params: dict, script: OracleScript) -> dict:
    """Diagram-copy run for the finite case tables.

    ``pi1_empty`` keeps the empty structure while the script believes and
    switches to the one-element structure on exit.  ``dce`` follows the
    induced case of a two-component script through a nested triple.  The
    run emits one new diagram sentence per stage (when any remain) and
    reports the structure the horizon diagram settles on.
    """
    if mode == "pi1_empty":
        return _run_cases(
            "finite.pi1_empty",
            params,
            script,
            _pi1_cases(params),
            lambda s: 0 if script.table[s] else 1,
        )
    if mode == "dce":
        return _run_cases(
            "finite.dce",
            params,
            script,
            _dce_cases(params),
            lambda s: dsigma2_case(script.table[s]),
        )
    raise ScriptError(f"unknown finite mode {mode!r}")


def _pi1_cases(params: dict):
    if "out_structure" in params:
        out = FiniteStructure.from_obj(params["out_structure"])
        if out.size != 1:
            raise ScriptError("pi1_empty out_structure must have one element")
    else:
        out = FiniteStructure.make(BINARY_SIG, 1, {})
    empty = FiniteStructure.make(out.signature, 0, {})
    return [empty, out]


def _dce_cases(params: dict):
    triple = [FiniteStructure.from_obj(params[k]) for k in ("minus", "mid", "plus")]
    if not (
        is_induced_substructure(triple[0], triple[1])
        and is_induced_substructure(triple[1], triple[2])
    ):
        raise ScriptError("case structures must be nested induced substructures")
    return triple


def _precheck(script: OracleScript, mode_kinds: tuple[str, ...]) -> None:
    if script.kind not in mode_kinds:
        raise ScriptError(f"script kind {script.kind!r} does not drive this mode")
    violations = validate_script(script)
    if violations:
        raise ScriptError("; ".join(violations))


def _run_cases(construction: str, params: dict, script: OracleScript, cases, case_at) -> dict:
    if construction.endswith("pi1_empty"):
        _precheck(script, ("pi1",))
    else:
        _precheck(script, ("dsigma2",))
        for col in (0, 1):
            bits = [pair[col] for pair in script.table]
            if any(b < a for a, b in zip(bits, bits[1:])):
                raise ScriptError("dce needs computably-enumerable script components")
    stages = []
    emitted: dict = {}
    prev_case = None
    for s in range(script.horizon):
        case = case_at(s)
        if prev_case is not None and case < prev_case:
            raise ScriptError(f"case regressed at stage {s}")
        prev_case = case
        current = cases[case]
        want = diagram_prefix(current, s + 1)
        new_atoms = []
        for name, t, sign in want:
            key = (name, t)
            if key in emitted:
                if emitted[key] != sign:
                    raise InvariantError(f"diagram sign flipped on {name}{t} at stage {s}")
            else:
                emitted[key] = sign
                new_atoms.append((name, t, sign))
        stages.append({"s": s, "case": case, "new_atoms": new_atoms, "retracted": []})
    final_case = prev_case if prev_case is not None else 0
    final_structure = cases[final_case]
    total_atoms = sum(
        final_structure.size ** arity for _, arity in final_structure.signature
    )
    settled = len(emitted) >= total_atoms and script.settle_stage < script.horizon
    report = {
        "case": final_case,
        "settled": settled,
        "structure": final_structure.to_obj(),
    }
    if settled:
        rebuilt = structure_from_diagram(
            final_structure.signature, final_structure.size, [(n, t, g) for (n, t), g in emitted.items()]
        )
        if not isomorphic(rebuilt, final_structure):
            raise InvariantError("horizon diagram does not present the settled case structure")
    return {
        "format": "limitstage.run.v1",
        "construction": construction,
        "params": params,
        "script": script.to_obj(),
        "stages": [
            {
                "s": st["s"],
                "case": st["case"],
                "new_atoms": [[n, list(t), g] for n, t, g in st["new_atoms"]],
                "retracted": st["retracted"],
            }
            for st in stages
        ],
        "final": report,
    }
