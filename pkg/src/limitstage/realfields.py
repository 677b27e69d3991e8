"""Exact Archimedean ordered-field targets for the staged reductions.

Two families of fields are presented.  The algebraic reals are roots of
integer polynomials isolated by rational intervals.  On top of them sit
real closures of purely transcendental extensions: a declared base of
computable reals is carried as nested rational interval streams with
algebraic independence declared rather than decided, so the zero test
for rational functions of the base is syntactic, and every other sign
is settled by refining the streams.  Elements of a closure are roots of
polynomials whose coefficients are rational functions of the base, each
carrying an isolating interval and a derivation record saying how the
element was introduced.

All arithmetic is exact.  Sums and products of algebraic elements go
through resultants (with cheap paths when one operand is a rational
function), equality bottoms out in a zero certificate on the defining
data, and root counting is Sturm-certified.  Interval refinement is
capped by a configurable depth; a sign or certificate that fails to
settle within the cap raises rather than guessing, because for valid
inputs the refinement provably terminates.

The targets are enumerated real closures of growing prefixes of one
base, arranged in a chain, and the staged reductions drive the generic
embedding machine over them: a two-field run for the algebraic case, a
three-field run for finite transcendence degree, and a liminf-driven
walk along the whole chain.  A finished run is audited by a census of
which base elements appear among the embedded images.
"""

from __future__ import annotations

import os
from fractions import Fraction
from itertools import product

from .finitestructs import InvariantError, ScriptError
from .oracles import OracleScript, dsigma2_case, validate_script
from .serial import frac_parse, frac_str

DEPTH_DEFAULT = 64


def refinement_depth() -> int:
    """The interval-width cap, as a power of two, from the environment."""
    raw = os.environ.get("LIMITSTAGE_DEPTH", "")
    try:
        depth = int(raw)
    except ValueError:
        return DEPTH_DEFAULT
    return depth if depth >= 8 else DEPTH_DEFAULT


class RefinementError(InvariantError):
    """A sign or certificate stayed undecided at the configured depth."""

    def __init__(self, message: str, depth: int):
        super().__init__(f"{message}: undecided at depth 2^-{depth}")
        self.depth = depth


# ---------------------------------------------------------------------------
# rational interval arithmetic


def iadd(a, b):
    return (a[0] + b[0], a[1] + b[1])


def ineg(a):
    return (-a[1], -a[0])


def isub(a, b):
    return iadd(a, ineg(b))


def imul(a, b):
    ps = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return (min(ps), max(ps))


def idiv(a, b):
    if b[0] <= 0 <= b[1]:
        raise InvariantError("interval division by an interval containing zero")
    ps = (a[0] / b[0], a[0] / b[1], a[1] / b[0], a[1] / b[1])
    return (min(ps), max(ps))


def ipow(a, e: int):
    out = (Fraction(1), Fraction(1))
    for _ in range(e):
        out = imul(out, a)
    return out


def interval_sign(a):
    """-1, +1, or 0 when the interval straddles; 0 is merely undecided."""
    if a[0] > 0:
        return 1
    if a[1] < 0:
        return -1
    return 0


# ---------------------------------------------------------------------------
# multivariate polynomials over the rationals
#
# a polynomial is a dict from exponent tuples (one entry per variable)
# to nonzero Fractions; the zero polynomial is the empty dict


def mp_const(q, arity: int) -> dict:
    q = Fraction(q)
    return {(0,) * arity: q} if q else {}


def mp_var(i: int, arity: int) -> dict:
    exps = [0] * arity
    exps[i] = 1
    return {tuple(exps): Fraction(1)}


def mp_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for exps, c in b.items():
        v = out.get(exps, Fraction(0)) + c
        if v:
            out[exps] = v
        else:
            out.pop(exps, None)
    return out


def mp_neg(a: dict) -> dict:
    return {exps: -c for exps, c in a.items()}


def mp_scale(q, a: dict) -> dict:
    q = Fraction(q)
    if not q:
        return {}
    return {exps: q * c for exps, c in a.items()}


def mp_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            exps = tuple(x + y for x, y in zip(e1, e2))
            v = out.get(exps, Fraction(0)) + c1 * c2
            if v:
                out[exps] = v
            else:
                out.pop(exps, None)
    return out


def mp_lift(a: dict, arity: int) -> dict:
    return {exps + (0,) * (arity - len(exps)): c for exps, c in a.items()}


def mp_support(a: dict) -> set:
    out = set()
    for exps in a:
        for i, e in enumerate(exps):
            if e:
                out.add(i)
    return out


def mp_eval_box(a: dict, boxes) -> tuple:
    total = (Fraction(0), Fraction(0))
    for exps, c in a.items():
        term = (Fraction(c), Fraction(c))
        for i, e in enumerate(exps):
            if e:
                term = imul(term, ipow(boxes[i], e))
        total = iadd(total, term)
    return total


def mp_eval_point(a: dict, points) -> Fraction:
    total = Fraction(0)
    for exps, c in a.items():
        term = Fraction(c)
        for i, e in enumerate(exps):
            if e:
                term *= Fraction(points[i]) ** e
        total += term
    return total


def mp_subst(a: dict, var: int, value: Fraction) -> dict:
    """Substitute a rational for one variable, dropping its slot."""
    out: dict = {}
    for exps, c in a.items():
        coeff = c * Fraction(value) ** exps[var]
        if not coeff:
            continue
        rest = exps[:var] + exps[var + 1 :]
        v = out.get(rest, Fraction(0)) + coeff
        if v:
            out[rest] = v
        else:
            out.pop(rest, None)
    return out


def mp_key(a: dict) -> tuple:
    return tuple(sorted((exps, (c.numerator, c.denominator)) for exps, c in a.items()))


def mp_to_obj(a: dict) -> list:
    return [[list(exps), frac_str(c)] for exps, c in sorted(a.items())]


def mp_from_obj(obj) -> dict:
    return {tuple(exps): frac_parse(c) for exps, c in obj}


# ---------------------------------------------------------------------------
# rational functions of the base: reduced pairs (numerator, denominator)


def _project1(a: dict, var: int) -> list:
    """Dense univariate image of a polynomial supported on one variable."""
    out: list = []
    for exps, c in a.items():
        e = exps[var] if exps else 0
        while len(out) <= e:
            out.append(Fraction(0))
        out[e] = c
    while out and not out[-1]:
        out.pop()
    return out


def _inflate1(dense: list, var: int, arity: int) -> dict:
    out = {}
    for e, c in enumerate(dense):
        if c:
            exps = [0] * arity
            if arity:
                exps[var] = e
            out[tuple(exps)] = c
    return out


def _dense_gcd(a: list, b: list) -> list:
    a, b = list(a), list(b)
    while b:
        if len(a) < len(b):
            a, b = b, a
            continue
        lead = b[-1]
        while len(a) >= len(b):
            factor = a[-1] / lead
            shift = len(a) - len(b)
            for i, c in enumerate(b):
                a[i + shift] -= factor * c
            while a and not a[-1]:
                a.pop()
            if not a:
                break
        a, b = b, a
    if a:
        lead = a[-1]
        a = [c / lead for c in a]
    return a


def _dense_exact_div(a: list, b: list) -> list:
    a = list(a)
    out = [Fraction(0)] * (len(a) - len(b) + 1)
    while a and len(a) >= len(b):
        factor = a[-1] / b[-1]
        shift = len(a) - len(b)
        out[shift] = factor
        for i, c in enumerate(b):
            a[i + shift] -= factor * c
        while a and not a[-1]:
            a.pop()
    if a:
        raise InvariantError("inexact polynomial division")
    return out


def rf_make(num: dict, den: dict, arity: int) -> tuple:
    """A reduced pair.  Pairs supported on at most one variable are put
    in lowest terms with a monic denominator, which makes them fully
    canonical; wider pairs only get the monic normalization, enough
    because their equality is never decided by comparing raw pairs."""
    if not den:
        raise InvariantError("denominator is identically zero")
    if not num:
        return ({}, mp_const(1, arity))
    names = mp_support(num) | mp_support(den)
    if len(names) == 1:
        var = next(iter(names))
        dn, dd = _project1(num, var), _project1(den, var)
        g = _dense_gcd(dn, dd)
        if len(g) > 1:
            num = _inflate1(_dense_exact_div(dn, g), var, arity)
            den = _inflate1(_dense_exact_div(dd, g), var, arity)
    lead = den[max(den)]
    if lead != 1:
        num = mp_scale(Fraction(1) / lead, num)
        den = mp_scale(Fraction(1) / lead, den)
    return (num, den)


def rf_to_obj(c: tuple) -> list:
    return [mp_to_obj(c[0]), mp_to_obj(c[1])]


def rf_from_obj(obj) -> tuple:
    return (mp_from_obj(obj[0]), mp_from_obj(obj[1]))


# ---------------------------------------------------------------------------
# declared transcendental bases as nested interval streams


class TransBase:
    """Computable reals given by strictly nesting rational intervals.

    ``streams`` maps each element index to a function from a precision
    rank to an interval pair; ranks only ever grow, refinement is
    memoized, and the algebraic independence of the family is declared,
    never decided.  The shipped default family has factorial gaps, so a
    few ranks already push widths far below any working tolerance.
    """

    def __init__(self, streams):
        self.streams = list(streams)
        self.count = len(self.streams)
        self._cache: list = [[] for _ in self.streams]

    def interval(self, i: int, rank: int) -> tuple:
        cache = self._cache[i]
        while len(cache) <= rank:
            lo, hi = self.streams[i](len(cache))
            lo, hi = Fraction(lo), Fraction(hi)
            if not lo < hi:
                raise InvariantError("base stream produced an empty interval")
            if cache:
                plo, phi = cache[-1]
                if not (plo < lo and hi < phi):
                    raise InvariantError("base stream intervals do not strictly nest")
            cache.append((lo, hi))
        return cache[rank]

    def refine(self, i: int, width: Fraction) -> tuple:
        rank = 0
        box = self.interval(i, rank)
        while box[1] - box[0] >= width:
            rank += 1
            box = self.interval(i, rank)
        return box

    def boxes(self, width: Fraction) -> list:
        return [self.refine(i, width) for i in range(self.count)]


def _fact(n: int) -> int:
    out = 1
    for j in range(2, n + 1):
        out *= j
    return out


def _gap_stream(seed: int):
    # the upper pad is three next-gap units, not two, so interval
    # midpoints sit half a gap away from the value instead of landing
    # on its next truncation, keeping nearby signs decidable
    def stream(rank: int):
        m = rank + 1
        total = Fraction(0)
        for j in range(1, m + 1):
            total += Fraction(1, 10 ** (_fact(j) + seed * j))
        tail = Fraction(3, 10 ** (_fact(m + 1) + seed * (m + 1)))
        return (total, total + tail)

    return stream


def make_base(count: int) -> TransBase:
    """The default declared-independent family, one stream per element."""
    return TransBase([_gap_stream(i) for i in range(count)])


def _euler_stream(rank: int):
    m = rank + 2
    total = Fraction(0)
    fact = 1
    for j in range(m + 1):
        if j:
            fact *= j
        total += Fraction(1, fact)
    return (total, total + Fraction(3, fact * (m + 1)))


def euler_base() -> TransBase:
    """A one-element base holding the classical exponential constant."""
    return TransBase([_euler_stream])


# ---------------------------------------------------------------------------
# coefficient field adapters


class QField:
    """Rational coefficients; signs are immediate."""

    arity = 0

    def __init__(self):
        self._serial = 0
        self._op_cache: dict = {}
        self._member_pool: dict = {}

    def zero(self):
        return Fraction(0)

    def one(self):
        return Fraction(1)

    def from_fraction(self, q):
        return Fraction(q)

    def is_zero(self, c) -> bool:
        return c == 0

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def sign(self, c) -> int:
        return (c > 0) - (c < 0)

    def bounds(self, c) -> tuple:
        mag = abs(c)
        return (mag, mag)

    def coeff_obj(self, c):
        return frac_str(c)

    def support(self, c) -> set:
        return set()


class BaseField:
    """Rational-function coefficients over a declared transcendental base.

    The zero test is syntactic; every other sign refines the base
    streams until the numerator and denominator boxes both exclude
    zero, which terminates for truthful streams because a nonzero
    rational function cannot vanish at a declared-independent point.
    """

    def __init__(self, base: TransBase, arity=None):
        self.base = base
        self.arity = base.count if arity is None else arity
        self._serial = 0
        self._op_cache: dict = {}
        self._member_pool: dict = {}

    def zero(self):
        return ({}, mp_const(1, self.arity))

    def one(self):
        return (mp_const(1, self.arity), mp_const(1, self.arity))

    def from_fraction(self, q):
        return (mp_const(q, self.arity), mp_const(1, self.arity))

    def var(self, i: int):
        return (mp_var(i, self.arity), mp_const(1, self.arity))

    def is_zero(self, c) -> bool:
        return not c[0]

    def add(self, a, b):
        num = mp_add(mp_mul(a[0], b[1]), mp_mul(b[0], a[1]))
        return rf_make(num, mp_mul(a[1], b[1]), self.arity)

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def neg(self, a):
        return (mp_neg(a[0]), a[1])

    def mul(self, a, b):
        return rf_make(mp_mul(a[0], b[0]), mp_mul(a[1], b[1]), self.arity)

    def div(self, a, b):
        if not b[0]:
            raise InvariantError("division by the zero rational function")
        return rf_make(mp_mul(a[0], b[1]), mp_mul(a[1], b[0]), self.arity)

    def box(self, c, width: Fraction) -> tuple:
        boxes = self.base.boxes(width)
        return idiv(mp_eval_box(c[0], boxes), mp_eval_box(c[1], boxes))

    def sign(self, c) -> int:
        if not c[0]:
            return 0
        depth = refinement_depth()
        exp = 8
        while True:
            boxes = self.base.boxes(Fraction(1, 2 ** exp))
            num = mp_eval_box(c[0], boxes)
            den = mp_eval_box(c[1], boxes)
            sn, sd = interval_sign(num), interval_sign(den)
            if sn and sd:
                return sn * sd
            if exp >= depth:
                raise RefinementError("rational function sign", depth)
            exp = min(exp * 2, depth)

    def bounds(self, c) -> tuple:
        """Positive rationals (low, high) with low <= |value| <= high."""
        depth = refinement_depth()
        exp = 8
        while True:
            box = self.box(c, Fraction(1, 2 ** exp))
            if interval_sign(box):
                return (min(abs(box[0]), abs(box[1])), max(abs(box[0]), abs(box[1])))
            if exp >= depth:
                raise RefinementError("coefficient magnitude", depth)
            exp = min(exp * 2, depth)

    def coeff_obj(self, c):
        return rf_to_obj(c)

    def support(self, c) -> set:
        return mp_support(c[0]) | mp_support(c[1])

    def subst(self, c, var: int, value: Fraction) -> tuple:
        num = mp_subst(c[0], var, value)
        den = mp_subst(c[1], var, value)
        if not den:
            raise ZeroDivisionError("substitution killed a denominator")
        return rf_make(num, den, self.arity - 1)


# ---------------------------------------------------------------------------
# dense polynomials over a coefficient adapter


def p_trim(F, cs) -> list:
    cs = list(cs)
    while cs and F.is_zero(cs[-1]):
        cs.pop()
    return cs


def p_add(F, a, b) -> list:
    n = max(len(a), len(b))
    out = []
    for i in range(n):
        x = a[i] if i < len(a) else F.zero()
        y = b[i] if i < len(b) else F.zero()
        out.append(F.add(x, y))
    return p_trim(F, out)


def p_neg(F, a) -> list:
    return [F.neg(c) for c in a]


def p_sub(F, a, b) -> list:
    return p_add(F, a, p_neg(F, b))


def p_scale(F, q, a) -> list:
    return p_trim(F, [F.mul(q, c) for c in a])


def p_mul(F, a, b) -> list:
    if not a or not b:
        return []
    out = [F.zero()] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if F.is_zero(x):
            continue
        for j, y in enumerate(b):
            out[i + j] = F.add(out[i + j], F.mul(x, y))
    return p_trim(F, out)


def p_divmod(F, a, b) -> tuple:
    b = p_trim(F, b)
    if not b:
        raise InvariantError("polynomial division by zero")
    rem = p_trim(F, a)
    quot = [F.zero()] * max(len(rem) - len(b) + 1, 0)
    lead = b[-1]
    while len(rem) >= len(b):
        factor = F.div(rem[-1], lead)
        shift = len(rem) - len(b)
        quot[shift] = factor
        for i, c in enumerate(b):
            rem[i + shift] = F.sub(rem[i + shift], F.mul(factor, c))
        rem = p_trim(F, rem)
    return p_trim(F, quot), rem


def p_deriv(F, a) -> list:
    return p_trim(F, [F.mul(F.from_fraction(i), c) for i, c in enumerate(a)][1:])


def p_eval_frac(F, a, q: Fraction):
    qc = F.from_fraction(q)
    total = F.zero()
    for c in reversed(a):
        total = F.add(F.mul(total, qc), c)
    return total


def p_gcd(F, a, b) -> list:
    a, b = p_trim(F, a), p_trim(F, b)
    while b:
        _, r = p_divmod(F, a, b)
        a, b = b, r
    if a:
        a = p_scale(F, F.div(F.one(), a[-1]), a)
    return a


def p_squarefree(F, a) -> list:
    d = p_deriv(F, a)
    if not d:
        return p_trim(F, a)
    g = p_gcd(F, a, d)
    if len(g) <= 1:
        return p_trim(F, a)
    q, _ = p_divmod(F, a, g)
    return q


def sturm_chain(F, a) -> list:
    chain = [p_trim(F, a)]
    d = p_deriv(F, a)
    if d:
        chain.append(d)
        while len(chain[-1]) > 1:
            _, r = p_divmod(F, chain[-2], chain[-1])
            if not r:
                break
            chain.append(p_neg(F, r))
    return chain


def _sign_count(F, chain, q: Fraction) -> int:
    signs = []
    for poly in chain:
        s = F.sign(p_eval_frac(F, poly, q)) if poly else 0
        if s:
            signs.append(s)
    return sum(1 for x, y in zip(signs, signs[1:]) if x != y)


def count_roots(F, chain, lo: Fraction, hi: Fraction) -> int:
    """Distinct roots in (lo, hi); endpoints must not be roots."""
    return _sign_count(F, chain, lo) - _sign_count(F, chain, hi)


def cauchy_bound(F, a) -> Fraction:
    low, _ = F.bounds(a[-1])
    top = Fraction(0)
    for c in a[:-1]:
        if F.is_zero(c):
            continue
        _, high = F.bounds(c)
        top = max(top, high)
    return 1 + top / low


def isolate_intervals(F, coeffs) -> list:
    """Disjoint open rational intervals, one per distinct real root,
    in ascending order, with non-root endpoints, Sturm-certified."""
    a = p_trim(F, coeffs)
    if not a:
        raise InvariantError("cannot isolate roots of the zero polynomial")
    if len(a) == 1:
        return []
    sq = p_squarefree(F, a)
    chain = sturm_chain(F, sq)
    bound = cauchy_bound(F, sq)
    total = count_roots(F, chain, -bound, bound)
    out: list = []
    stack = [(-bound, bound, total)]
    while stack:
        lo, hi, n = stack.pop()
        if n == 0:
            continue
        if n == 1:
            out.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        if not F.is_zero(p_eval_frac(F, sq, mid)):
            left = count_roots(F, chain, lo, mid)
            stack.append((lo, mid, left))
            stack.append((mid, hi, n - left))
            continue
        # the midpoint is itself a root: shrink a clean window around
        # it before recursing on the two outer parts
        w = (hi - lo) / 16
        while True:
            a2, b2 = mid - w, mid + w
            if (
                not F.is_zero(p_eval_frac(F, sq, a2))
                and not F.is_zero(p_eval_frac(F, sq, b2))
                and count_roots(F, chain, a2, b2) == 1
            ):
                break
            w = w / 3
        out.append((a2, b2))
        left = count_roots(F, chain, lo, a2)
        stack.append((lo, a2, left))
        stack.append((b2, hi, n - left - 1))
    return sorted(out)


# ---------------------------------------------------------------------------
# resultants for sums and products of algebraic elements
#
# a bivariate polynomial is a list over powers of the eliminated
# variable t whose entries are dense coefficient lists over F in z


class _PolyRing:
    """F[z] wrapped as the entry ring of the determinant sweep."""

    def __init__(self, F):
        self.F = F

    def is_zero(self, c) -> bool:
        return not c

    def add(self, a, b):
        return p_add(self.F, a, b)

    def sub(self, a, b):
        return p_sub(self.F, a, b)

    def mul(self, a, b):
        return p_mul(self.F, a, b)

    def neg(self, a):
        return p_neg(self.F, a)

    def exact_div(self, a, b):
        q, r = p_divmod(self.F, a, b)
        if r:
            raise InvariantError("fraction-free elimination hit an inexact division")
        return q


def _bareiss_det(ring: _PolyRing, rows: list):
    n = len(rows)
    m = [list(r) for r in rows]
    flip = 1
    prev = [ring.F.one()]
    for k in range(n - 1):
        if ring.is_zero(m[k][k]):
            sel = next((r for r in range(k + 1, n) if not ring.is_zero(m[r][k])), None)
            if sel is None:
                return []
            m[k], m[sel] = m[sel], m[k]
            flip = -flip
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = ring.sub(ring.mul(m[i][j], m[k][k]), ring.mul(m[i][k], m[k][j]))
                m[i][j] = ring.exact_div(num, prev)
            m[i][k] = []
        prev = m[k][k]
    det = m[n - 1][n - 1]
    return ring.neg(det) if flip < 0 else det


def _resultant_t(F, A: list, B: list) -> list:
    """Resultant in t of two bivariate polynomials, as a poly in z."""
    ring = _PolyRing(F)
    n, m = len(A) - 1, len(B) - 1
    if n < 1 or m < 1:
        raise InvariantError("resultant operands must have positive degree")
    size = n + m
    rows = []
    for i in range(m):
        row = [[] for _ in range(size)]
        for j, c in enumerate(A):
            row[i + (n - j)] = list(c)
        rows.append(row)
    for i in range(n):
        row = [[] for _ in range(size)]
        for j, c in enumerate(B):
            row[i + (m - j)] = list(c)
        rows.append(row)
    return _bareiss_det(ring, rows)


def _as_biv_const(F, coeffs: list) -> list:
    return [[c] if not F.is_zero(c) else [] for c in coeffs]


def _shifted_operand(F, coeffs: list) -> list:
    """q(z - t) as a polynomial in t with F[z] coefficients."""
    z_minus_t = [[F.zero(), F.one()], [F.neg(F.one())]]
    ring = _PolyRing(F)
    out: list = []
    for c in reversed(coeffs):
        if out:
            mult: list = []
            for i, entry in enumerate(out):
                if not entry:
                    continue
                for j, factor in enumerate(z_minus_t):
                    while len(mult) <= i + j:
                        mult.append([])
                    mult[i + j] = ring.add(mult[i + j], ring.mul(entry, factor))
            out = mult
        if not out:
            out = [[]]
        head = [c] if not F.is_zero(c) else []
        out[0] = ring.add(out[0], head)
    while out and not out[-1]:
        out.pop()
    return out


def _scaled_operand(F, coeffs: list) -> list:
    """t^m q(z/t) as a polynomial in t with F[z] coefficients."""
    m = len(coeffs) - 1
    out = []
    for i in range(m + 1):
        c = coeffs[m - i]
        if F.is_zero(c):
            out.append([])
        else:
            out.append([F.zero()] * (m - i) + [c])
    while out and not out[-1]:
        out.pop()
    return out


# ---------------------------------------------------------------------------
# field elements: roots of polynomials over the coefficient field


class FieldElem:
    """One element of a real closed field, as certified defining data.

    ``coeffs`` is the defining polynomial over the adapter, ``lo`` and
    ``hi`` the isolating interval (rational endpoints, neither a root),
    and ``psi`` the derivation record: a term tree over rational
    function leaves, root-taking, and field operations, saying how the
    element was introduced.
    """

    __slots__ = ("field", "coeffs", "lo", "hi", "psi", "serial", "_chain")

    def __init__(self, field, coeffs, lo, hi, psi):
        self.field = field
        self.coeffs = tuple(coeffs)
        self.lo = Fraction(lo)
        self.hi = Fraction(hi)
        self.psi = psi
        self.serial = field._serial
        field._serial += 1
        self._chain = None

    def box(self) -> tuple:
        return (self.lo, self.hi)

    def degree(self) -> int:
        return len(self.coeffs) - 1

    def chain(self):
        if self._chain is None:
            self._chain = sturm_chain(
                self.field, p_squarefree(self.field, list(self.coeffs))
            )
        return self._chain

    def refine(self) -> None:
        """Shrink the isolating interval, keeping both invariants."""
        F = self.field
        mid = (self.lo + self.hi) / 2
        if not F.is_zero(p_eval_frac(F, list(self.coeffs), mid)):
            if count_roots(F, self.chain(), self.lo, mid) == 1:
                self.hi = mid
            else:
                self.lo = mid
            return
        # the element is the rational midpoint itself
        w = (self.hi - self.lo) / 16
        while True:
            a2, b2 = mid - w, mid + w
            if (
                self.lo < a2
                and b2 < self.hi
                and not F.is_zero(p_eval_frac(F, list(self.coeffs), a2))
                and not F.is_zero(p_eval_frac(F, list(self.coeffs), b2))
            ):
                self.lo, self.hi = a2, b2
                return
            w = w / 3

    def to_obj(self) -> dict:
        return {
            "coeffs": [self.field.coeff_obj(c) for c in self.coeffs],
            "interval": [frac_str(self.lo), frac_str(self.hi)],
            "psi": self.psi,
        }


def make_elem(field, coeffs, lo, hi, psi) -> FieldElem:
    coeffs = p_trim(field, coeffs)
    if len(coeffs) <= 1:
        raise InvariantError("an element needs a nonconstant defining polynomial")
    lo, hi = Fraction(lo), Fraction(hi)
    if not lo < hi:
        raise InvariantError("isolating interval is empty")
    if field.is_zero(p_eval_frac(field, coeffs, lo)) or field.is_zero(
        p_eval_frac(field, coeffs, hi)
    ):
        raise InvariantError("isolating interval endpoints must not be roots")
    chain = sturm_chain(field, p_squarefree(field, coeffs))
    if count_roots(field, chain, lo, hi) != 1:
        raise InvariantError("the interval does not isolate exactly one root")
    return FieldElem(field, coeffs, lo, hi, psi)


def _ratfunc_psi(field, c) -> list:
    if isinstance(field, QField):
        q = Fraction(c)
        num = {(): q} if q else {}
        return ["ratfun", mp_to_obj(num), mp_to_obj({(): Fraction(1)})]
    return ["ratfun", mp_to_obj(c[0]), mp_to_obj(c[1])]


def elem_from_coeff(field, c, psi=None) -> FieldElem:
    """The degree-one element equal to one coefficient-field value."""
    if psi is None:
        psi = _ratfunc_psi(field, c)
    coeffs = [field.neg(c), field.one()]
    if isinstance(field, QField):
        lo, hi = Fraction(c) - 1, Fraction(c) + 1
    else:
        box = field.box(c, Fraction(1, 2 ** 8)) if c[0] else (Fraction(0), Fraction(0))
        lo, hi = box[0] - 1, box[1] + 1
    return FieldElem(field, coeffs, lo, hi, psi)


def elem_from_fraction(field, q) -> FieldElem:
    return elem_from_coeff(field, field.from_fraction(q))


def base_elem(field, i: int) -> FieldElem:
    if isinstance(field, QField) or i >= field.arity:
        raise InvariantError("base element index outside the field's base")
    return elem_from_coeff(field, field.var(i))


def _coeff_value(field, elem: FieldElem):
    """The coefficient-field value of a degree-one element."""
    c0, c1 = elem.coeffs
    return field.div(field.neg(c0), c1)


def _isolate_near(field, coeffs, operands, combine, psi) -> FieldElem:
    """The root of ``coeffs`` tracked by shrinking operand boxes.

    ``combine`` turns the operands' current boxes into the candidate
    interval; the operands are refined until the candidate certifies
    exactly one root with non-root endpoints.
    """
    F = field
    sq = p_squarefree(F, p_trim(F, coeffs))
    chain = sturm_chain(F, sq)
    depth = refinement_depth()
    for _ in range(depth + 4):
        lo, hi = combine([e.box() for e in operands])
        clean = not F.is_zero(p_eval_frac(F, sq, lo)) and not F.is_zero(
            p_eval_frac(F, sq, hi)
        )
        if clean and count_roots(F, chain, lo, hi) == 1:
            return make_elem(F, coeffs, lo, hi, psi)
        for e in operands:
            e.refine()
    raise RefinementError("root tracking", depth)


def _cached(field, key, build):
    cache = field._op_cache
    if key not in cache:
        cache[key] = build()
    return cache[key]


def add_elems(x: FieldElem, y: FieldElem) -> FieldElem:
    F = x.field
    if y.field is not F:
        raise InvariantError("elements live over different coefficient fields")
    a, b = (x, y) if x.serial <= y.serial else (y, x)
    return _cached(F, ("add", a.serial, b.serial), lambda: _add_build(F, a, b))


def _add_build(F, x, y) -> FieldElem:
    psi = ["add", x.psi, y.psi]
    if x.degree() == 1 and y.degree() == 1:
        return elem_from_coeff(F, F.add(_coeff_value(F, x), _coeff_value(F, y)), psi)
    if x.degree() == 1 or y.degree() == 1:
        low, high = (x, y) if x.degree() == 1 else (y, x)
        shifted = _compose_shift(F, list(high.coeffs), _coeff_value(F, low))
        return _isolate_near(F, shifted, [x, y], lambda bs: iadd(bs[0], bs[1]), psi)
    res = _resultant_t(
        F, _as_biv_const(F, list(x.coeffs)), _shifted_operand(F, list(y.coeffs))
    )
    return _isolate_near(F, res, [x, y], lambda bs: iadd(bs[0], bs[1]), psi)


def _compose_shift(F, coeffs: list, r) -> list:
    """p(z - r), expanded over the coefficient field."""
    out: list = []
    linear = [F.neg(r), F.one()]
    for c in reversed(coeffs):
        out = p_add(F, p_mul(F, out, linear), [c])
    return out


def mul_elems(x: FieldElem, y: FieldElem) -> FieldElem:
    F = x.field
    if y.field is not F:
        raise InvariantError("elements live over different coefficient fields")
    a, b = (x, y) if x.serial <= y.serial else (y, x)
    return _cached(F, ("mul", a.serial, b.serial), lambda: _mul_build(F, a, b))


def _mul_build(F, x, y) -> FieldElem:
    psi = ["mul", x.psi, y.psi]
    if sign(x) == 0 or sign(y) == 0:
        return elem_from_fraction(F, 0)
    if x.degree() == 1 and y.degree() == 1:
        return elem_from_coeff(F, F.mul(_coeff_value(F, x), _coeff_value(F, y)), psi)
    if x.degree() == 1 or y.degree() == 1:
        low, high = (x, y) if x.degree() == 1 else (y, x)
        r = _coeff_value(F, low)
        d = high.degree()
        raised = [F.one()]
        for _ in range(d):
            raised.append(F.mul(raised[-1], r))
        scaled = [F.mul(c, raised[d - i]) for i, c in enumerate(high.coeffs)]
        return _isolate_near(F, scaled, [x, y], lambda bs: imul(bs[0], bs[1]), psi)
    res = _resultant_t(
        F, _as_biv_const(F, list(x.coeffs)), _scaled_operand(F, list(y.coeffs))
    )
    return _isolate_near(F, res, [x, y], lambda bs: imul(bs[0], bs[1]), psi)


def neg_elem(x: FieldElem) -> FieldElem:
    F = x.field
    return _cached(F, ("neg", x.serial), lambda: _neg_build(F, x))


def _neg_build(F, x) -> FieldElem:
    coeffs = [F.neg(c) if i % 2 else c for i, c in enumerate(x.coeffs)]
    return make_elem(F, coeffs, -x.hi, -x.lo, ["neg", x.psi])


def inv_elem(x: FieldElem) -> FieldElem:
    F = x.field
    return _cached(F, ("inv", x.serial), lambda: _inv_build(F, x))


def _inv_build(F, x) -> FieldElem:
    if sign(x) == 0:
        raise InvariantError("inverse of the zero element")
    coeffs = list(x.coeffs)
    while F.is_zero(coeffs[0]):
        coeffs.pop(0)
    coeffs = list(reversed(coeffs))
    one = (Fraction(1), Fraction(1))
    return _isolate_near(F, coeffs, [x], lambda bs: idiv(one, bs[0]), ["inv", x.psi])


def sub_elems(x: FieldElem, y: FieldElem) -> FieldElem:
    return add_elems(x, neg_elem(y))


def sign(x) -> int:
    """Exact sign; zero only by certificate on the defining data."""
    if isinstance(x, RealAlg):
        x = x.elem()
    F = x.field
    return _cached(F, ("sign", x.serial), lambda: _sign_build(F, x))


def _sign_build(F, x) -> int:
    depth = refinement_depth()
    for _ in range(depth + 4):
        if x.lo > 0:
            return 1
        if x.hi < 0:
            return -1
        if F.is_zero(x.coeffs[0]) and x.lo < 0 < x.hi:
            return 0
        x.refine()
    raise RefinementError("element sign", depth)


def compare_elems(x: FieldElem, y: FieldElem) -> int:
    if x is y:
        return 0
    F = x.field
    a, b, flip = (x, y, 1) if x.serial <= y.serial else (y, x, -1)
    return flip * _cached(F, ("cmp", a.serial, b.serial), lambda: _cmp_build(F, a, b))


def _cmp_build(F, x, y) -> int:
    for _ in range(3):
        if x.hi < y.lo:
            return -1
        if y.hi < x.lo:
            return 1
        x.refine()
        y.refine()
    return sign(sub_elems(x, y))


def equal_elems(x: FieldElem, y: FieldElem) -> bool:
    return compare_elems(x, y) == 0


def _cheap_equal(x: FieldElem, y: FieldElem) -> bool:
    if x.hi < y.lo or y.hi < x.lo:
        return False
    return equal_elems(x, y)


# ---------------------------------------------------------------------------
# the public algebraic-reals type


class RealAlg:
    """A real algebraic number: integer coefficients, isolating interval."""

    __slots__ = ("coeffs", "interval", "_elem")

    _shared_field = None

    def __init__(self, coeffs, interval):
        self.coeffs = tuple(int(c) for c in coeffs)
        self.interval = (Fraction(interval[0]), Fraction(interval[1]))
        self._elem = None

    @classmethod
    def field(cls) -> QField:
        if cls._shared_field is None:
            cls._shared_field = QField()
        return cls._shared_field

    @classmethod
    def make(cls, coeffs, interval) -> "RealAlg":
        coeffs = [int(c) for c in coeffs]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        if len(coeffs) <= 1:
            raise InvariantError("an algebraic number needs a nonconstant polynomial")
        lo, hi = Fraction(interval[0]), Fraction(interval[1])
        make_elem(cls.field(), [Fraction(c) for c in coeffs], lo, hi, None)
        return cls(coeffs, (lo, hi))

    @classmethod
    def from_fraction(cls, q) -> "RealAlg":
        q = Fraction(q)
        return cls((-q.numerator, q.denominator), (q - 1, q + 1))

    def elem(self) -> FieldElem:
        if self._elem is None:
            lo, hi = self.interval
            psi = ["alg", list(self.coeffs), [frac_str(lo), frac_str(hi)]]
            self._elem = make_elem(
                self.field(), [Fraction(c) for c in self.coeffs], lo, hi, psi
            )
        return self._elem

    def to_obj(self) -> dict:
        return {
            "coeffs": list(self.coeffs),
            "interval": [frac_str(self.interval[0]), frac_str(self.interval[1])],
        }

    @classmethod
    def from_obj(cls, obj) -> "RealAlg":
        return cls.make(obj["coeffs"], [frac_parse(q) for q in obj["interval"]])


def _gcd_int(a: int, b: int) -> int:
    a, b = abs(a), abs(b)
    while b:
        a, b = b, a % b
    return a


def _alg_of_elem(elem: FieldElem) -> RealAlg:
    lcm = 1
    for c in elem.coeffs:
        lcm = lcm * c.denominator // _gcd_int(lcm, c.denominator)
    ints = [int(c * lcm) for c in elem.coeffs]
    g = 0
    for c in ints:
        g = _gcd_int(g, c)
    if g > 1:
        ints = [c // g for c in ints]
    if ints[-1] < 0:
        ints = [-c for c in ints]
    return RealAlg(ints, (elem.lo, elem.hi))


def alg_add(x: RealAlg, y: RealAlg) -> RealAlg:
    return _alg_of_elem(add_elems(x.elem(), y.elem()))


def alg_sub(x: RealAlg, y: RealAlg) -> RealAlg:
    return _alg_of_elem(sub_elems(x.elem(), y.elem()))


def alg_mul(x: RealAlg, y: RealAlg) -> RealAlg:
    return _alg_of_elem(mul_elems(x.elem(), y.elem()))


def alg_neg(x: RealAlg) -> RealAlg:
    return _alg_of_elem(neg_elem(x.elem()))


def alg_inv(x: RealAlg) -> RealAlg:
    return _alg_of_elem(inv_elem(x.elem()))


def alg_compare(x: RealAlg, y: RealAlg) -> int:
    return compare_elems(x.elem(), y.elem())


def isolate_roots(coeffs, field=None) -> list:
    """All distinct real roots, ascending.

    With no adapter the coefficients are integers and the answer is a
    list of RealAlg values; over a coefficient adapter it is a list of
    FieldElems whose derivation records name the defining polynomial
    and the root's index in the ascending order.
    """
    if field is None:
        rational = [Fraction(int(c)) for c in coeffs]
        ints = [int(c) for c in coeffs]
        while ints and ints[-1] == 0:
            ints.pop()
        out = []
        for lo, hi in isolate_intervals(RealAlg.field(), rational):
            out.append(RealAlg(ints, (lo, hi)))
        return out
    trimmed = p_trim(field, list(coeffs))
    windows = isolate_intervals(field, trimmed)
    out = []
    for idx, (lo, hi) in enumerate(windows):
        psi = ["root", [field.coeff_obj(c) for c in trimmed], idx]
        out.append(make_elem(field, list(trimmed), lo, hi, psi))
    return out


# ---------------------------------------------------------------------------
# quantifier-free evaluation


def qf_eval(sentences, assignment: dict) -> bool:
    """Exact truth of signed atomic field sentences under an assignment.

    Atoms are ``["add", i, j, k, sgn]``, ``["mul", i, j, k, sgn]``, and
    ``["lt", i, j, sgn]`` over constant ids; ``sgn`` is 1 for the atom
    and 0 for its negation.  Values may be RealAlg or FieldElem.
    """
    values = {
        c: v.elem() if isinstance(v, RealAlg) else v for c, v in assignment.items()
    }
    for atom in sentences:
        op = atom[0]
        for c in atom[1:-1]:
            if c not in values:
                raise ScriptError(f"atom mentions an unassigned constant {c}")
        if op == "add":
            _, i, j, k, sgn = atom
            got = equal_elems(add_elems(values[i], values[j]), values[k])
        elif op == "mul":
            _, i, j, k, sgn = atom
            got = equal_elems(mul_elems(values[i], values[j]), values[k])
        elif op == "lt":
            _, i, j, sgn = atom
            got = compare_elems(values[i], values[j]) < 0
        else:
            raise ScriptError(f"unknown atom shape {op!r}")
        if got != bool(sgn):
            return False
    return True


# ---------------------------------------------------------------------------
# derivation records and rational-substitution recovery


def _subst_rf(num_obj, den_obj, big_arity: int, var: int, value: Fraction, small_field):
    num = mp_subst(mp_lift(mp_from_obj(num_obj), big_arity), var, value)
    den = mp_subst(mp_lift(mp_from_obj(den_obj), big_arity), var, value)
    if not den:
        raise ZeroDivisionError("substitution killed a denominator")
    if isinstance(small_field, QField):
        return mp_eval_point(num, ()) / mp_eval_point(den, ())
    return rf_make(num, den, small_field.arity)


def _subst_psi(psi, small_field, big_arity: int, var: int, value: Fraction, near):
    """Replay one derivation over the smaller field, with one base
    element of the bigger field replaced by a rational; ``near`` is the
    original element's interval, used to pick among surviving roots."""
    kind = psi[0]
    if kind == "ratfun":
        coeff = _subst_rf(psi[1], psi[2], big_arity, var, value, small_field)
        return elem_from_coeff(small_field, coeff)
    if kind == "alg":
        coeffs = [small_field.from_fraction(c) for c in psi[1]]
        return make_elem(
            small_field, coeffs, frac_parse(psi[2][0]), frac_parse(psi[2][1]), psi
        )
    if kind == "root":
        coeffs = [
            _subst_rf(obj[0], obj[1], big_arity, var, value, small_field)
            for obj in psi[1]
        ]
        windows = isolate_intervals(small_field, coeffs)
        survivors = [w for w in windows if w[0] < near[1] and near[0] < w[1]]
        if len(survivors) != 1:
            raise LookupError("the substituted polynomial lost the tracked root")
        lo, hi = survivors[0]
        idx = windows.index(survivors[0])
        trimmed = p_trim(small_field, coeffs)
        out_psi = ["root", [small_field.coeff_obj(c) for c in trimmed], idx]
        return make_elem(small_field, trimmed, lo, hi, out_psi)
    if kind in ("add", "mul"):
        left = _subst_psi(psi[1], small_field, big_arity, var, value, near)
        right = _subst_psi(psi[2], small_field, big_arity, var, value, near)
        return add_elems(left, right) if kind == "add" else mul_elems(left, right)
    if kind == "neg":
        return neg_elem(_subst_psi(psi[1], small_field, big_arity, var, value, near))
    if kind == "inv":
        return inv_elem(_subst_psi(psi[1], small_field, big_arity, var, value, near))
    raise ScriptError(f"unknown derivation record {kind!r}")


def _const_of(poly: dict) -> Fraction:
    if not poly:
        return Fraction(0)
    [(exps, c)] = list(poly.items())
    if any(exps):
        raise InvariantError("a kept image mentions the distinguished base element")
    return c


def _lower_elem(elem: FieldElem, big_field, small_field, var: int):
    """Re-home an image that never mentions the distinguished element."""
    lowered = []
    for c in elem.coeffs:
        if var in big_field.support(c):
            raise InvariantError("a kept image mentions the distinguished base element")
        if isinstance(small_field, QField):
            lowered.append(_const_of(c[0]) / _const_of(c[1]))
        else:
            num = mp_subst(mp_lift(c[0], big_field.arity), var, Fraction(0))
            den = mp_subst(mp_lift(c[1], big_field.arity), var, Fraction(0))
            lowered.append(rf_make(num, den, small_field.arity))
    return make_elem(small_field, lowered, elem.lo, elem.hi, elem.psi)


def substitute_recover(field, var: int, p_t: dict, p_s: dict, sentences) -> dict:
    """Pull an embedding down to the subfield missing one base element.

    ``p_t`` is the kept part, whose images never mention the
    distinguished base element ``var``; ``p_s`` is the full embedding
    whose extra constants carry derivation records that may mention it.
    The distinguished element's interval is refined until some rational
    inside it replays every extra derivation so that all the sentences
    come out true and the images stay distinct; the configured depth
    bounds the retries.  Returns the recovered embedding together with
    the chosen rational and the number of rounds.
    """
    extras = sorted(c for c in p_s if c not in p_t)
    if not extras:
        return {"embedding": dict(p_t), "e_prime": None, "rounds": 0}
    if field.arity == 1:
        small_field = RealAlg.field()
    else:
        streams = [field.base.streams[i] for i in range(field.base.count) if i != var]
        small_field = BaseField(TransBase(streams), field.arity - 1)
    kept = {c: _lower_elem(v, field, small_field, var) for c, v in p_t.items()}
    depth = refinement_depth()
    rounds = 0
    exp = 8
    while True:
        rounds += 1
        box = field.base.refine(var, Fraction(1, 2 ** exp))
        e_prime = (box[0] + box[1]) / 2
        try:
            candidate = dict(kept)
            for c in extras:
                candidate[c] = _subst_psi(
                    p_s[c].psi, small_field, field.arity, var, e_prime, p_s[c].box()
                )
            values = list(candidate.values())
            distinct = all(
                not equal_elems(a, b)
                for i, a in enumerate(values)
                for b in values[i + 1 :]
            )
            if distinct and qf_eval(sentences, candidate):
                return {
                    "embedding": candidate,
                    "e_prime": frac_str(e_prime),
                    "rounds": rounds,
                }
        except (ZeroDivisionError, LookupError):
            pass
        if exp >= depth:
            raise RefinementError("substitution recovery", depth)
        exp = min(exp * 2, depth)


# ---------------------------------------------------------------------------
# enumerated closure targets along a base chain


_CANDIDATE_CAP = 40_000
_WEIGHT_CAP = 12


class ClosureTarget:
    """The real closure of the first ``j`` base elements, enumerated.

    The enumeration starts with the base elements themselves, then
    proceeds in weight blocks: rational functions of those elements in
    a canonical order, and, from weight four on, real roots of monic
    polynomials whose coefficients are already-listed rational
    functions, so the whole closure is covered in the limit.  A block
    whose candidate count would pass the desk-scale cap is not built;
    the enumeration simply stops extending, which bounded runs at sane
    horizons never notice.
    """

    def __init__(self, field, j: int, key=None):
        if j > field.arity:
            raise InvariantError("closure uses more base elements than the field has")
        self.field = field
        self.j = j
        self.key = key if key is not None else f"closure{j}"
        self._members: list = []
        self._keys: set = set()
        self._rf_stream: list = []
        self._next_weight = 0
        self._exhausted = False

    def contains(self, elem: FieldElem) -> bool:
        for c in elem.coeffs:
            if any(i >= self.j for i in self.field.support(c)):
                return False
        return True

    def enum_prefix(self, n: int) -> list:
        while len(self._members) < n and not self._exhausted:
            self._extend_block()
        return self._members[:n]

    def enum(self, i: int) -> FieldElem:
        prefix = self.enum_prefix(i + 1)
        if len(prefix) <= i:
            raise InvariantError("enumeration stopped before the requested index")
        return prefix[i]

    def _note(self, value) -> None:
        key = (mp_key(value[0]), mp_key(value[1]))
        if key in self._keys:
            return
        self._keys.add(key)
        # targets over one field share member objects, so a value that
        # several closures list is one object and the machine's identity
        # checks agree with value equality across target switches
        pool = self.field._member_pool
        elem = pool.get(key)
        if elem is None:
            if isinstance(self.field, QField):
                coeff = mp_eval_point(value[0], ()) / mp_eval_point(value[1], ())
            else:
                coeff = value
            elem = elem_from_coeff(self.field, coeff)
            pool[key] = elem
        self._members.append(elem)
        self._rf_stream.append(elem)

    def _extend_block(self) -> None:
        w = self._next_weight
        if w > _WEIGHT_CAP:
            self._exhausted = True
            return
        self._next_weight += 1
        if w == 0:
            arity = self.field.arity
            for i in range(self.j):
                self._note(rf_make(mp_var(i, arity), mp_const(1, arity), arity))
            return
        for value in self._rf_candidates(w):
            self._note(value)
        if w >= 4 and not self._exhausted:
            self._closure_pass(w)

    def _rf_candidates(self, w: int):
        arity = self.field.arity
        if self.j == 0:
            heights = []
            for den in range(1, w + 1):
                for num in range(-w, w + 1):
                    if max(abs(num), den) == w and _gcd_int(num, den) <= 1:
                        heights.append(Fraction(num, den))
            for q in sorted(heights):
                yield rf_make(mp_const(q, arity), mp_const(1, arity), arity)
            return
        numerators = self._int_polys(w)
        if numerators is None:
            self._exhausted = True
            return
        if self.j == 1:
            seen = set()
            pairs = []
            for num in numerators:
                for den in numerators:
                    if not den:
                        continue
                    value = rf_make(dict(num), dict(den), arity)
                    key = (mp_key(value[0]), mp_key(value[1]))
                    if key in seen:
                        continue
                    seen.add(key)
                    pairs.append((key, value))
            for _, value in sorted(pairs, key=lambda kv: kv[0]):
                yield value
            return
        for num in sorted(numerators, key=mp_key):
            yield rf_make(dict(num), mp_const(1, arity), arity)

    def _int_polys(self, w: int):
        arity = self.field.arity
        monomials = [
            exps for exps in product(range(w + 1), repeat=self.j) if sum(exps) <= w
        ]
        if (2 * w + 1) ** len(monomials) > _CANDIDATE_CAP:
            return None
        out = []
        for coeffs in product(range(-w, w + 1), repeat=len(monomials)):
            poly = {}
            for exps, c in zip(monomials, coeffs):
                if c:
                    poly[tuple(exps) + (0,) * (arity - self.j)] = Fraction(c)
            out.append(poly)
        return out

    def _closure_pass(self, w: int) -> None:
        for degree in range(2, w - 1):
            budget = w - degree
            for combo in _compositions(budget, degree):
                if any(i - 1 >= len(self._rf_stream) for i in combo):
                    continue
                coeffs = [
                    _coeff_value(self.field, self._rf_stream[i - 1]) for i in combo
                ]
                poly = coeffs + [self.field.one()]
                for root in isolate_roots(poly, self.field):
                    if any(_cheap_equal(root, other) for other in self._members):
                        continue
                    self._members.append(root)

    def position_of(self, elem: FieldElem, cap: int):
        for i, member in enumerate(self.enum_prefix(cap)):
            if _cheap_equal(member, elem):
                return i
        return None


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# staged discovery of a transcendence ladder


def enum_chain(presentation: list, horizon: int, kmax: int) -> dict:
    """Stage the search for successive independent elements.

    ``presentation`` lists field elements revealed one per stage; the
    dependence surrogate is syntactic support, which is faithful for
    elements built from the declared base.  At stage ``s`` the pick for
    each level is recomputed greedily from the revealed prefix: the
    least revealed element whose support escapes the union of the picks
    below.  While a level has no witness its guess climbs with the
    reveal frontier, so every row is nondecreasing, and a settled row
    ends at the true pick index.
    """
    supports = []
    for elem in presentation:
        sup: set = set()
        for c in elem.coeffs:
            sup |= elem.field.support(c)
        supports.append(sup)
    rows: list = [[] for _ in range(kmax)]
    for s in range(horizon):
        revealed = min(s + 1, len(supports))
        cover: set = set()
        level = 0
        for n in range(revealed):
            if level >= kmax:
                break
            if not supports[n] <= cover:
                rows[level].append(n)
                cover = cover | supports[n]
                level += 1
        for k in range(level, kmax):
            rows[k].append(s + 1)
    picks: list = []
    cover = set()
    for n in range(len(supports)):
        if not supports[n] <= cover:
            picks.append(n)
            cover |= supports[n]
    settled = [
        k < len(picks) and bool(rows[k]) and rows[k][-1] == picks[k]
        for k in range(kmax)
    ]
    return {"f": rows, "picks": picks[:kmax], "settled": settled, "horizon": horizon}


# ---------------------------------------------------------------------------
# the census and the staged reductions


def census_filled(images, field, count: int) -> list:
    """Base elements, by index, equal to some image."""
    filled = []
    for i in range(count):
        probe = base_elem(field, i)
        if any(_cheap_equal(x, probe) for x in images):
            filled.append(i)
    return filled


class FieldDomain:
    """Adapter giving the stage machine ordered-field arithmetic."""

    # kept inside every closure's opening weight blocks, so a placement
    # scan never triggers the combinatorially larger later blocks
    rebind_window = 20

    def __init__(self, field):
        self.field = field

    def atom_blocks(self, n: int) -> list:
        out = []
        idx = range(n + 1)
        for i, j, k in product(idx, repeat=3):
            if max(i, j, k) == n:
                out.append(("add", i, j, k))
        for i, j, k in product(idx, repeat=3):
            if max(i, j, k) == n:
                out.append(("mul", i, j, k))
        for i, j in product(idx, repeat=2):
            if i != j and max(i, j) == n:
                out.append(("lt", i, j))
        return out

    def atom_constants(self, atom) -> tuple:
        if atom[0] == "lt":
            return atom[1:3]
        return atom[1:4]

    def atom_truth_under(self, atom, images: dict) -> int:
        if atom[0] == "add":
            _, i, j, k = atom
            return 1 if equal_elems(add_elems(images[i], images[j]), images[k]) else 0
        if atom[0] == "mul":
            _, i, j, k = atom
            return 1 if equal_elems(mul_elems(images[i], images[j]), images[k]) else 0
        _, i, j = atom
        return 1 if compare_elems(images[i], images[j]) < 0 else 0

    def atom_obj(self, atom, sgn: int) -> list:
        return list(atom) + [sgn]

    def elem_obj(self, elem: FieldElem):
        return elem.psi

    def rebind(self, target, known: dict, unknowns, decided: dict):
        """Re-derivation only; everything else waits.

        A constant comes back exactly when frozen positive sentences
        determine its value from already-placed images, and the value
        is then taken from the target's own enumeration so identical
        values stay identical objects.  Fresh constants wait for range
        coverage to name their elements instead of being placed
        greedily.  The caution is load-bearing: a greedy choice here
        could give one constant different images on two look-back
        branches, and a later anchor restore would then expose some
        frozen sentence as flipped.
        """
        for atom, sgn in decided.items():
            consts = self.atom_constants(atom)
            if all(c in known for c in consts):
                if self.atom_truth_under(atom, known) != sgn:
                    return None
        placed = dict(known)
        chosen = []
        used = {v.serial for v in known.values()}
        for c in unknowns:
            value = self._pinned_value(c, placed, decided)
            if value is None:
                return None
            image = self._locate(target, value, used)
            if image is None:
                return None
            placed[c] = image
            ok = True
            for atom, sgn in decided.items():
                consts = self.atom_constants(atom)
                if c in consts and all(x in placed for x in consts):
                    if self.atom_truth_under(atom, placed) != sgn:
                        ok = False
                        break
            if not ok:
                return None
            used.add(image.serial)
            chosen.append(image)
        return chosen

    def _pinned_value(self, c, placed: dict, decided: dict):
        """The value a frozen positive sentence forces on ``c``, if any."""
        for atom, sgn in decided.items():
            if sgn != 1 or atom[0] == "lt":
                continue
            op, i, j, k = atom
            if op == "add":
                if k == c and i in placed and j in placed and i != c and j != c:
                    return add_elems(placed[i], placed[j])
                if i == c and j in placed and k in placed and j != c and k != c:
                    return sub_elems(placed[k], placed[j])
                if j == c and i in placed and k in placed and i != c and k != c:
                    return sub_elems(placed[k], placed[i])
            else:
                if k == c and i in placed and j in placed and i != c and j != c:
                    return mul_elems(placed[i], placed[j])
                if i == c and j in placed and k in placed and j != c and k != c:
                    if sign(placed[j]) != 0:
                        return mul_elems(placed[k], inv_elem(placed[j]))
                if j == c and i in placed and k in placed and i != c and k != c:
                    if sign(placed[i]) != 0:
                        return mul_elems(placed[k], inv_elem(placed[i]))
        return None

    def _locate(self, target, value, used: set):
        """The enumeration's own object for ``value``, when listed."""
        prefix = target.enum_prefix(self.rebind_window)
        for member in prefix:
            if member.serial in used:
                continue
            if _cheap_equal(member, value):
                return member
        return None


FIELD_MODES = ("alg_pi2", "findeg_dsigma2", "infdeg_pi3")


def run_field_reduction(mode: str, params: dict, script: OracleScript) -> dict:
    """Entry point for the ordered-field constructions."""
    if mode == "alg_pi2":
        return _run_alg(params, script)
    if mode == "findeg_dsigma2":
        return _run_findeg(params, script)
    if mode == "infdeg_pi3":
        return _run_infdeg(params, script)
    raise ScriptError(f"unknown field mode {mode!r}")


def _precheck(script: OracleScript, kind: str, mode: str) -> None:
    if script.kind != kind:
        raise ScriptError(f"mode {mode} is driven by {kind} scripts, not {script.kind}")
    problems = validate_script(script)
    if problems:
        raise ScriptError("; ".join(problems))
    if script.horizon == 0:
        raise ScriptError("field runs need at least one stage")


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


def _final_block(stages, read_stage, field, count, settled, maintained, expected):
    maintained_ok, bad = maintained
    filled = census_filled(stages[read_stage]["p"].values(), field, count)
    return {
        "read_stage": read_stage,
        "target": stages[read_stage]["target_key"],
        "census": len(filled),
        "filled": filled,
        "settled": settled,
        "maintained_ok": maintained_ok,
        "broken_pairs": bad,
        "flagged": [st["s"] for st in stages if st["flagged"]],
        "matches_declared": settled and maintained_ok and len(filled) == expected,
    }


def _run_alg(params: dict, script: OracleScript) -> dict:
    _precheck(script, "pi2", "alg_pi2")
    if params:
        raise ScriptError("the algebraic mode takes no parameters")
    field = BaseField(make_base(1))
    targets = {0: ClosureTarget(field, 0), 1: ClosureTarget(field, 1)}
    domain = FieldDomain(field)
    stages = _machine_stages(
        domain,
        lambda bit: targets[0] if bit else targets[1],
        lambda s: script.table[s],
        "greatest_same_guess",
        script.horizon,
    )
    believing = [s for s in range(script.horizon) if script.table[s] == 1]
    if script.declared_limit == 1:
        read_stage = believing[-1]
    else:
        read_stage = script.horizon - 1
    pairs = [(t, s) for i, t in enumerate(believing) for s in believing[i + 1 :]]
    settled = script.settle_stage < script.horizon
    expected = 0 if script.declared_limit == 1 else 1
    final = _final_block(
        stages, read_stage, field, 1, settled, _maintained(stages, pairs), expected
    )
    return _envelope("realfields.alg_pi2", params, script, stages, domain, int, final)


def _run_findeg(params: dict, script: OracleScript) -> dict:
    _precheck(script, "dsigma2", "findeg_dsigma2")
    k = int(params.get("k", 1))
    if k < 1:
        raise ScriptError("the transcendence degree must be at least one")
    field = BaseField(make_base(k + 1))
    targets = {j: ClosureTarget(field, j) for j in (k - 1, k, k + 1)}
    domain = FieldDomain(field)
    stages = _machine_stages(
        domain,
        lambda pair: targets[k - 1 + dsigma2_case(pair)],
        lambda s: script.table[s],
        "field_two_set",
        script.horizon,
    )
    read_stage = script.horizon - 1
    cases = [dsigma2_case(pair) for pair in script.table]
    ones = [s for s in range(script.horizon) if cases[s] == 1]
    pairs = []
    for i, t in enumerate(ones):
        for s in ones[i + 1 :]:
            if all(script.table[u][0] == 1 for u in range(t, s + 1)):
                pairs.append((t, s))
    settled = script.settle_stage < script.horizon
    expected = k - 1 + dsigma2_case(script.declared_limit)
    final = _final_block(
        stages, read_stage, field, k + 1, settled, _maintained(stages, pairs), expected
    )
    return _envelope(
        "realfields.findeg_dsigma2", params, script, stages, domain, list, final
    )


def condition_pairs(values) -> list:
    """Stage pairs the walk's extension condition covers: (t, s) with
    the earlier value at most the later one and no interior stage
    dipping below the earlier value."""
    out = []
    for t in range(len(values)):
        floor_ok = True
        for s in range(t + 1, len(values)):
            if values[s] < values[t]:
                floor_ok = False
            elif floor_ok and values[t] <= values[s]:
                out.append((t, s))
    return out


def _run_infdeg(params: dict, script: OracleScript) -> dict:
    _precheck(script, "liminf_fun", "infdeg_pi3")
    if params:
        raise ScriptError("the unbounded-degree mode takes no parameters")
    top = max(max(script.table), 1)
    field = BaseField(make_base(top))
    targets: dict = {}

    def target_for(g):
        if g not in targets:
            targets[g] = ClosureTarget(field, g)
        return targets[g]

    domain = FieldDomain(field)
    stages = _machine_stages(
        domain,
        target_for,
        lambda s: script.table[s],
        "liminf_condition",
        script.horizon,
    )
    hits = [
        s for s in range(script.horizon) if script.table[s] == script.declared_limit
    ]
    settled = bool(hits) and script.settle_stage < script.horizon
    read_stage = hits[-1] if hits else script.horizon - 1
    pairs = condition_pairs(script.table)
    final = _final_block(
        stages,
        read_stage,
        field,
        top,
        settled,
        _maintained(stages, pairs),
        script.declared_limit,
    )
    return _envelope(
        "realfields.infdeg_pi3", params, script, stages, domain, int, final
    )
