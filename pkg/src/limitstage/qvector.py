"""Exact rational vector spaces with deterministic enumerations.

Vectors are finitely-supported tuples of ``Fraction`` coordinates, written
canonically with trailing zeros stripped.  A global weight order fixes one
enumeration of the ambient space, every span enumerates its members in that
same order, and members of a smaller span therefore appear as a subsequence
of any larger span's enumeration.  The module also carries the exact rank
computation and the small constraint solver the embedding runs lean on when
they rebind constants after a look-back.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product

from .finitestructs import InvariantError, ScriptError
from .oracles import OracleScript, dsigma2_case, validate_script
from .serial import frac_parse, frac_str

Vector = tuple  # tuple[Fraction, ...] with no trailing zeros

ZERO: Vector = ()


def vcanon(seq) -> Vector:
    coords = [Fraction(c) for c in seq]
    while coords and coords[-1] == 0:
        coords.pop()
    return tuple(coords)


def vadd(u: Vector, v: Vector) -> Vector:
    n = max(len(u), len(v))
    return vcanon(
        (u[i] if i < len(u) else 0) + (v[i] if i < len(v) else 0) for i in range(n)
    )


def vscale(q, v: Vector) -> Vector:
    q = Fraction(q)
    return vcanon(q * c for c in v)


def standard_vector(i: int) -> Vector:
    return tuple([Fraction(0)] * i + [Fraction(1)])


def vec_to_obj(v: Vector) -> list:
    return [frac_str(c) for c in v]


def vec_from_obj(obj) -> Vector:
    return vcanon(frac_parse(c) for c in obj)


def height(q: Fraction) -> int:
    return max(abs(q.numerator), q.denominator)


def vweight(v: Vector) -> int:
    if not v:
        return 0
    return max(len(v), max(height(c) for c in v))


@lru_cache(maxsize=None)
def rationals_upto(h: int) -> tuple:
    """All rationals of height at most ``h``, in increasing order."""
    out = set()
    for den in range(1, h + 1):
        for num in range(-h, h + 1):
            q = Fraction(num, den)
            if height(q) <= h:
                out.add(q)
    return tuple(sorted(out))


_BLOCK_CANDIDATE_CAP = 5_000_000
_WEIGHT_CAP = 64


def _padded(v: Vector, width: int):
    return tuple(v[i] if i < len(v) else Fraction(0) for i in range(width))


@lru_cache(maxsize=None)
def ambient_block(w: int) -> tuple:
    """All vectors of weight exactly ``w``, sorted coordinatewise."""
    if w == 0:
        return (ZERO,)
    if w > _WEIGHT_CAP:
        raise InvariantError("ambient enumeration requested past the weight cap")
    values = rationals_upto(w)
    if len(values) ** w > _BLOCK_CANDIDATE_CAP:
        raise InvariantError("ambient block too large to enumerate")
    block = []
    for raw in product(values, repeat=w):
        v = vcanon(raw)
        if vweight(v) == w:
            block.append(v)
    return tuple(sorted(block, key=lambda v: _padded(v, w)))


def rank_of(vectors) -> int:
    """Rank over the rationals, by fraction-free integer elimination."""
    vecs = [vcanon(v) for v in vectors]
    vecs = [v for v in vecs if v]
    if not vecs:
        return 0
    width = max(len(v) for v in vecs)
    rows = []
    for v in vecs:
        lcm = 1
        for c in v:
            lcm = lcm * c.denominator // _gcd(lcm, c.denominator)
        rows.append([int(c * lcm) for c in _padded(v, width)])
    pivot_row = 0
    prev = 1
    for col in range(width):
        sel = next((r for r in range(pivot_row, len(rows)) if rows[r][col]), None)
        if sel is None:
            continue
        rows[pivot_row], rows[sel] = rows[sel], rows[pivot_row]
        for r in range(pivot_row + 1, len(rows)):
            for cc in range(col + 1, width):
                rows[r][cc] = (rows[r][cc] * rows[pivot_row][col] - rows[r][col] * rows[pivot_row][cc]) // prev
            rows[r][col] = 0
        prev = rows[pivot_row][col]
        pivot_row += 1
        if pivot_row == len(rows):
            break
    return pivot_row


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a) if a else abs(b)


def rref(vectors) -> tuple:
    """Reduced row-echelon basis for the span, rows sorted by pivot."""
    vecs = [vcanon(v) for v in vectors]
    vecs = [v for v in vecs if v]
    if not vecs:
        return ()
    width = max(len(v) for v in vecs)
    rows = [list(_padded(v, width)) for v in vecs]
    basis: list[list[Fraction]] = []
    for row in rows:
        row = row[:]
        for b in basis:
            pivot = next(i for i, c in enumerate(b) if c)
            if row[pivot]:
                factor = row[pivot]
                row = [rc - factor * bc for rc, bc in zip(row, b)]
        if any(row):
            pivot = next(i for i, c in enumerate(row) if c)
            row = [c / row[pivot] for c in row]
            basis.append(row)
    basis.sort(key=lambda b: next(i for i, c in enumerate(b) if c))
    # clear above each pivot
    for i, b in enumerate(basis):
        pivot = next(j for j, c in enumerate(b) if c)
        for k in range(i):
            if basis[k][pivot]:
                factor = basis[k][pivot]
                basis[k] = [kc - factor * bc for kc, bc in zip(basis[k], b)]
    return tuple(vcanon(b) for b in basis)


class SpanTarget:
    """The span of finitely many vectors, enumerated in the ambient order."""

    def __init__(self, basis, key: str | None = None):
        self.basis = rref(basis)
        self.dim = len(self.basis)
        self.pivots = tuple(
            next(i for i, c in enumerate(b) if c) for b in self.basis
        )
        self.key = key if key is not None else "span[" + ",".join(
            "(" + ",".join(frac_str(c) for c in b) + ")" for b in self.basis
        ) + "]"
        self._blocks: list[tuple] = []
        self._members: list[Vector] = []

    def contains(self, v: Vector) -> bool:
        rem = list(_padded(vcanon(v), max(len(vcanon(v)), max((len(b) for b in self.basis), default=0))))
        for b, pivot in zip(self.basis, self.pivots):
            if pivot < len(rem) and rem[pivot]:
                factor = rem[pivot]
                for i, c in enumerate(b):
                    rem[i] -= factor * c
        return not any(rem)

    def coords_of(self, v: Vector):
        """Coefficients over the reduced basis; None when not a member."""
        if not self.contains(v):
            return None
        padded = _padded(vcanon(v), max((p + 1 for p in self.pivots), default=0) if self.pivots else 0)
        return tuple(padded[p] if p < len(padded) else Fraction(0) for p in self.pivots)

    def _block(self, w: int) -> tuple:
        if w == 0:
            return (ZERO,)
        if self.dim == 0:
            return ()
        if w > _WEIGHT_CAP:
            raise InvariantError("span enumeration requested past the weight cap")
        # a weight-w vector has no coordinate at position w or later, and
        # its coefficient over a reduced basis row is its value at that
        # row's pivot, so rows with deep pivots are forced out
        active = [i for i, pivot in enumerate(self.pivots) if pivot < w]
        if not active:
            return ()
        values = rationals_upto(w)
        if len(values) ** len(active) > _BLOCK_CANDIDATE_CAP:
            raise InvariantError("span block too large to enumerate")
        block = []
        for coeffs in product(values, repeat=len(active)):
            v = ZERO
            for t, i in zip(coeffs, active):
                if t:
                    v = vadd(v, vscale(t, self.basis[i]))
            if vweight(v) == w:
                block.append(v)
        return tuple(sorted(set(block), key=lambda v: _padded(v, w)))

    def enum_prefix(self, n: int) -> list:
        """First ``n`` members in enumeration order; the answer is shorter
        only for the zero-dimensional span, whose enumeration is just
        the zero vector."""
        if self.dim == 0:
            self._members = [ZERO]
            return self._members[:n]
        while len(self._members) < n:
            w = len(self._blocks)
            block = self._block(w)
            self._blocks.append(block)
            self._members.extend(block)
        return self._members[:n]

    def enum(self, i: int) -> Vector:
        return self.enum_prefix(i + 1)[i]


class AmbientTarget:
    """Every finitely-supported rational vector, in the weight order."""

    dim = None

    def __init__(self):
        self.key = "ambient"
        self._members: list[Vector] = []
        self._next_block = 0

    def contains(self, v: Vector) -> bool:
        return True

    def enum_prefix(self, n: int) -> list:
        while len(self._members) < n:
            self._members.extend(ambient_block(self._next_block))
            self._next_block += 1
        return self._members[:n]

    def enum(self, i: int) -> Vector:
        return self.enum_prefix(i + 1)[i]


def span_of_first(k: int, key: str | None = None) -> SpanTarget:
    return SpanTarget([standard_vector(i) for i in range(k)], key=key or f"dim{k}")


# ---------------------------------------------------------------------------
# the quantifier-free constraint solver


def qf_solve(n_unknowns, equations, disequations, target):
    """Find vectors for the unknowns inside ``target``.

    Each constraint is ``(coeffs, rhs)`` with ``coeffs`` a map from unknown
    index to a rational coefficient, read as ``sum coeffs[i]*x_i = rhs``
    (or ``!= rhs`` for a disequation).  Linear equations are eliminated
    exactly.  Each remaining free unknown then takes the least element of
    the target's enumeration that no disequation forbids: a disequation
    pins down at most one forbidden value once its other unknowns are
    fixed, so assigning the unknowns in index order always terminates and
    keeps the answer deterministic.  Returns a list of vectors, or None
    when the system has no solution in the target.
    """
    rows = []
    for coeffs, rhs in equations:
        row = [Fraction(0)] * n_unknowns
        for i, c in coeffs.items():
            row[i] += Fraction(c)
        rows.append((row, vcanon(rhs)))

    # bound[i] = (constant, {free_index: coeff}) meaning x_i = constant + sum coeff*x_f
    bound: dict = {}
    for u in range(n_unknowns):
        sel = None
        for idx, (row, rhs) in enumerate(rows):
            if row[u]:
                sel = idx
                break
        if sel is None:
            continue
        row, rhs = rows.pop(sel)
        inv = Fraction(1) / row[u]
        expr_coeffs = {j: -c * inv for j, c in enumerate(row) if j != u and c}
        expr_rhs = vscale(inv, rhs)
        bound[u] = (expr_rhs, expr_coeffs)
        new_rows = []
        for row2, rhs2 in rows:
            if row2[u]:
                factor = row2[u]
                merged = row2[:]
                merged[u] = Fraction(0)
                for j, c in expr_coeffs.items():
                    merged[j] += factor * c
                rhs2 = vadd(rhs2, vscale(-factor, expr_rhs))
                new_rows.append((merged, rhs2))
            else:
                new_rows.append((row2, rhs2))
        rows = new_rows
    for row, rhs in rows:
        if any(row):
            raise InvariantError("elimination left an unreduced row")
        if rhs != ZERO:
            return None

    # expand every unknown into a constant plus free-unknown combination,
    # so disequations that elimination made degenerate are decided now
    # instead of defeating the scan below
    expansion: dict = {}

    def expand(u):
        if u not in bound:
            return ZERO, {u: Fraction(1)}
        if u in expansion:
            return expansion[u]
        const, coeffs = bound[u]
        total_const = const
        total: dict = {}
        for j, c in coeffs.items():
            cj, fj = expand(j)
            total_const = vadd(total_const, vscale(c, cj))
            for f, cf in fj.items():
                total[f] = total.get(f, Fraction(0)) + c * cf
        expansion[u] = (total_const, {f: c for f, c in total.items() if c})
        return expansion[u]

    # reduce each disequation to a combination of free unknowns; the ones
    # elimination made degenerate are decided here
    reduced = []
    for coeffs, rhs in disequations:
        const = ZERO
        free_part: dict = {}
        for i, c in coeffs.items():
            c = Fraction(c)
            if not c:
                continue
            ci, fi = expand(i)
            const = vadd(const, vscale(c, ci))
            for f, cf in fi.items():
                free_part[f] = free_part.get(f, Fraction(0)) + c * cf
        free_part = {f: c for f, c in free_part.items() if c}
        adjusted = vadd(vcanon(rhs), vscale(-1, const))
        if not free_part:
            if adjusted == ZERO:
                return None  # the forced values violate this disequation
            continue  # satisfied no matter what the free unknowns become
        reduced.append((free_part, adjusted))

    free = [u for u in range(n_unknowns) if u not in bound]
    # hang each disequation on the last free unknown it mentions; when
    # that unknown is being assigned, every other one is already fixed
    # and the disequation forbids exactly one value
    attached: dict = {f: [] for f in free}
    for free_part, adjusted in reduced:
        attached[max(free_part)].append((free_part, adjusted))

    assignment: dict = {}
    for f in free:
        excluded = set()
        for free_part, adjusted in attached[f]:
            rest = adjusted
            for g, c in free_part.items():
                if g != f:
                    rest = vadd(rest, vscale(-c, assignment[g]))
            excluded.add(vscale(Fraction(1) / free_part[f], rest))
        index = 0
        choice = None
        while choice is None:
            prefix = target.enum_prefix(index + 1)
            if len(prefix) <= index:
                return None  # target exhausted before a free value was legal
            if prefix[index] not in excluded:
                choice = prefix[index]
            index += 1
        assignment[f] = choice

    def resolve(u):
        if u in assignment:
            return assignment[u]
        const, coeffs = bound[u]
        v = const
        for j, c in coeffs.items():
            v = vadd(v, vscale(c, resolve(j)))
        assignment[u] = v
        return v

    values = [resolve(u) for u in range(n_unknowns)]
    for v in values:
        if not target.contains(v):
            return None
    for coeffs, rhs in disequations:
        total = ZERO
        for i, c in coeffs.items():
            total = vadd(total, vscale(Fraction(c), values[i]))
        if total == vcanon(rhs):
            raise InvariantError("greedy assignment missed a disequation")
    return values


# ---------------------------------------------------------------------------
# the atomic language over an enumerated space

# atoms: ("add", i, j, k) meaning e_i + e_j = e_k, and ("scal", i, j, q)
# meaning q * e_i = e_j, grouped into finite blocks by the larger of the
# element indices (and, for scalars, the height of q)


def atom_block(n: int, enum_len) -> list:
    """Atoms in block ``n`` over indices below ``enum_len`` (None for no cap)."""
    out = []
    cap = enum_len if enum_len is not None else n + 1
    idx = range(min(cap, n + 1))
    for i, j, k in product(idx, repeat=3):
        if max(i, j, k) == n:
            out.append(("add", i, j, k))
    for i, j in product(idx, repeat=2):
        for q in rationals_upto(n + 1):
            if max(i, j, height(q) - 1) == n:
                out.append(("scal", i, j, q))
    return out


def atom_truth(atom, enum: list) -> int:
    if atom[0] == "add":
        _, i, j, k = atom
        return 1 if vadd(enum[i], enum[j]) == enum[k] else 0
    _, i, j, q = atom
    return 1 if vscale(q, enum[i]) == enum[j] else 0


def atom_to_obj(atom, sign: int) -> list:
    if atom[0] == "add":
        return ["add", atom[1], atom[2], atom[3], sign]
    return ["scal", atom[1], atom[2], frac_str(atom[3]), sign]


def _atom_stream(space):
    cap = 1 if space.dim == 0 else None
    n = 0
    while True:
        for atom in atom_block(n, cap):
            yield atom
        n += 1


def run_dim0(params: dict, script: OracleScript) -> dict:
    """Diagram-copy run: the trivial space while the script believes, the
    one-dimensional space after an exit."""
    if script.kind != "pi1":
        raise ScriptError("dim0_pi1 needs an antitone bit script")
    violations = validate_script(script)
    if violations:
        raise ScriptError("; ".join(violations))
    cases = [SpanTarget([], key="dim0"), span_of_first(1, key="dim1")]
    emitted: dict = {}
    stages = []
    prev_case = 0
    for s in range(script.horizon):
        case = 0 if script.table[s] else 1
        if case < prev_case:
            raise ScriptError(f"case regressed at stage {s}")
        prev_case = case
        space = cases[case]
        new_atoms = []
        count = 0
        stream = _atom_stream(space)
        while count < s + 1:
            atom = next(stream)
            enum = space.enum_prefix(_atom_span(atom) + 1)
            count += 1
            sign = atom_truth(atom, enum)
            if atom in emitted:
                if emitted[atom] != sign:
                    raise InvariantError(f"diagram sign flipped on {atom}")
            else:
                emitted[atom] = sign
                new_atoms.append(atom_to_obj(atom, sign))
        stages.append({"s": s, "case": case, "new_atoms": new_atoms, "retracted": []})
    settled = script.settle_stage < script.horizon
    final_case = prev_case
    if settled and emitted:
        space = cases[final_case]
        enum = space.enum_prefix(max(_atom_span(a) for a in emitted) + 1)
        for atom, sign in emitted.items():
            if atom_truth(atom, enum) != sign:
                raise InvariantError("horizon diagram disagrees with the settled case")
    return {
        "format": "limitstage.run.v1",
        "construction": "qvector.dim0_pi1",
        "params": params,
        "script": script.to_obj(),
        "stages": stages,
        "final": {"case": final_case, "dim": final_case, "settled": settled, "atoms": len(emitted)},
    }


def _atom_span(atom) -> int:
    if atom[0] == "add":
        return max(atom[1], atom[2], atom[3])
    return max(atom[1], atom[2])


# ---------------------------------------------------------------------------
# embedding runs through the stage machine


class QVectorDomain:
    """Adapter giving the stage machine vector-space arithmetic."""

    def atom_blocks(self, n: int) -> list:
        return atom_block(n, None)

    def atom_constants(self, atom) -> tuple:
        if atom[0] == "add":
            return atom[1:4]
        return atom[1:3]

    def atom_truth_under(self, atom, images: dict) -> int:
        if atom[0] == "add":
            _, i, j, k = atom
            return 1 if vadd(images[i], images[j]) == images[k] else 0
        _, i, j, q = atom
        return 1 if vscale(q, images[i]) == images[j] else 0

    def atom_obj(self, atom, sign: int) -> list:
        return atom_to_obj(atom, sign)

    def elem_obj(self, v: Vector) -> list:
        return vec_to_obj(v)

    def _contributions(self, atom):
        if atom[0] == "add":
            _, i, j, k = atom
            return ((i, Fraction(1)), (j, Fraction(1)), (k, Fraction(-1)))
        _, i, j, q = atom
        return ((i, Fraction(q)), (j, Fraction(-1)))

    def rebind(self, target, known: dict, unknowns: list, decided: dict):
        """Images for ``unknowns`` in ``target`` that satisfy every frozen
        sentence over known-plus-unknown constants, stay injective, and
        avoid the known images; None when no such images exist."""
        pos = {c: i for i, c in enumerate(unknowns)}
        equations = []
        disequations = []
        for atom, sign in decided.items():
            consts = self.atom_constants(atom)
            if not any(c in pos for c in consts):
                if all(c in known for c in consts):
                    if self.atom_truth_under(atom, known) != sign:
                        return None
                continue
            if not all(c in known or c in pos for c in consts):
                continue  # touches a constant that stays parked
            coeffs: dict = {}
            rhs = ZERO
            for c, gamma in self._contributions(atom):
                if c in pos:
                    coeffs[pos[c]] = coeffs.get(pos[c], Fraction(0)) + gamma
                else:
                    rhs = vadd(rhs, vscale(-gamma, known[c]))
            coeffs = {i: c for i, c in coeffs.items() if c}
            if sign:
                equations.append((coeffs, rhs))
            else:
                disequations.append((coeffs, rhs))
        for a in range(len(unknowns)):
            for b in range(a + 1, len(unknowns)):
                disequations.append(({a: Fraction(1), b: Fraction(-1)}, ZERO))
            for v in known.values():
                disequations.append(({a: Fraction(1)}, v))
        return qf_solve(len(unknowns), equations, disequations, target)


EMBED_MODES = ("dim1_pi2", "dimk_dsigma2", "inf_pi3_cof")
MODES = ("dim0_pi1",) + EMBED_MODES


def run_qvector(mode: str, params: dict, script: OracleScript) -> dict:
    """Entry point for the vector-space constructions."""
    if mode == "dim0_pi1":
        return run_dim0(params, script)
    if mode == "dim1_pi2":
        return _run_dim1_pi2(params, script)
    if mode == "dimk_dsigma2":
        return _run_dimk(params, script)
    if mode == "inf_pi3_cof":
        return _run_inf_cof(params, script)
    raise ScriptError(f"unknown qvector mode {mode!r}")


def _precheck_embedding(script: OracleScript, kind: str) -> None:
    if script.kind != kind:
        raise ScriptError(f"this mode is driven by {kind} scripts, not {script.kind}")
    violations = validate_script(script)
    if violations:
        raise ScriptError("; ".join(violations))
    if script.horizon == 0:
        raise ScriptError("embedding runs need at least one stage")


def _machine_stages(domain, target_for, stage_data, policy, horizon):
    from .stagemachine import StageMachine

    machine = StageMachine(domain, target_for, stage_data, policy, horizon)
    return machine.run()


def _envelope(construction, params, script, stages, domain, data_obj, final) -> dict:
    from .stagemachine import serialize_stages

    return {
        "format": "limitstage.run.v1",
        "construction": construction,
        "params": params,
        "script": script.to_obj(),
        "stages": serialize_stages(stages, domain, data_obj),
        "final": final,
    }


def _maintained(stages, pairs) -> tuple:
    from .stagemachine import check_extension

    bad = check_extension(stages, pairs)
    return (not bad, [[t, s] for t, s in bad])


def _run_dim1_pi2(params: dict, script: OracleScript) -> dict:
    _precheck_embedding(script, "pi2")
    line = span_of_first(1, "dim1")
    plane = span_of_first(2, "dim2")
    domain = QVectorDomain()
    stages = _machine_stages(
        domain,
        lambda bit: line if bit else plane,
        lambda s: script.table[s],
        "greatest_same_guess",
        script.horizon,
    )
    believing = [s for s in range(script.horizon) if script.table[s] == 1]
    if script.declared_limit == 1:
        read_stage = believing[-1]
    else:
        read_stage = script.horizon - 1
    dim = 1 if stages[read_stage]["target_key"] == "dim1" else 2
    pairs = [(t, s) for i, t in enumerate(believing) for s in believing[i + 1:]]
    maintained_ok, bad = _maintained(stages, pairs)
    settled = script.settle_stage < script.horizon
    expected = 1 if script.declared_limit == 1 else 2
    final = {
        "read_stage": read_stage,
        "target": stages[read_stage]["target_key"],
        "dim": dim,
        "settled": settled,
        "maintained_ok": maintained_ok,
        "broken_pairs": bad,
        "flagged": [st["s"] for st in stages if st["flagged"]],
        "matches_declared": settled and maintained_ok and dim == expected,
    }
    return _envelope("qvector.dim1_pi2", params, script, stages, domain, int, final)


def _run_dimk(params: dict, script: OracleScript) -> dict:
    _precheck_embedding(script, "dsigma2")
    k = int(params.get("k", 1))
    if k < 1:
        raise ScriptError("the base dimension must be at least one")
    low = span_of_first(k, f"dim{k}")
    high = span_of_first(k + 1, f"dim{k + 1}")
    domain = QVectorDomain()
    stages = _machine_stages(
        domain,
        lambda pair: high if dsigma2_case(pair) == 1 else low,
        lambda s: script.table[s],
        "vs_two_set",
        script.horizon,
    )
    read_stage = script.horizon - 1
    dim = k + 1 if stages[read_stage]["target_key"] == high.key else k
    cases = [dsigma2_case(pair) for pair in script.table]
    ones = [s for s in range(script.horizon) if cases[s] == 1]
    pairs = []
    for i, t in enumerate(ones):
        for s in ones[i + 1:]:
            if all(script.table[u][0] == 1 for u in range(t, s + 1)):
                pairs.append((t, s))
    maintained_ok, bad = _maintained(stages, pairs)
    settled = script.settle_stage < script.horizon
    expected = k + 1 if dsigma2_case(script.declared_limit) == 1 else k
    final = {
        "read_stage": read_stage,
        "target": stages[read_stage]["target_key"],
        "dim": dim,
        "settled": settled,
        "maintained_ok": maintained_ok,
        "broken_pairs": bad,
        "flagged": [st["s"] for st in stages if st["flagged"]],
        "matches_declared": settled and maintained_ok and dim == expected,
    }
    return _envelope("qvector.dimk_dsigma2", params, script, stages, domain, list, final)


def _span_key(index_set) -> str:
    return "span[" + ",".join(str(i) for i in index_set) + "]"


def _run_inf_cof(params: dict, script: OracleScript) -> dict:
    from .oracles import movable_run

    _precheck_embedding(script, "ce_enum")
    targets: dict = {}

    def target_for(index_set):
        if index_set not in targets:
            targets[index_set] = SpanTarget(
                [standard_vector(i) for i in index_set], key=_span_key(index_set)
            )
        return targets[index_set]

    sets = movable_run(script)
    domain = QVectorDomain()
    stages = _machine_stages(
        domain,
        target_for,
        lambda s: sets[s],
        "span_restore",
        script.horizon,
    )
    limit_set = tuple(sorted(script.declared_limit))
    hits = [s for s in range(script.horizon) if sets[s] == limit_set]
    settled = bool(hits) and script.settle_stage < script.horizon
    read_stage = hits[-1] if hits else script.horizon - 1
    pairs = [(t, s) for i, t in enumerate(hits) for s in hits[i + 1:]]
    maintained_ok, bad = _maintained(stages, pairs)
    final = {
        "read_stage": read_stage,
        "target": stages[read_stage]["target_key"],
        "dim": len(limit_set) if settled else None,
        "limit_set": list(limit_set),
        "settled": settled,
        "maintained_ok": maintained_ok,
        "broken_pairs": bad,
        "flagged": [st["s"] for st in stages if st["flagged"]],
        "matches_declared": settled and maintained_ok
        and stages[read_stage]["target_key"] == _span_key(limit_set),
    }
    return _envelope("qvector.inf_pi3_cof", params, script, stages, domain, list, final)
