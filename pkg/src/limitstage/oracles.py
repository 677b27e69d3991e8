"""Scripted approximation oracles.

Every construction in this package is driven by a finite *script*: a
stage-indexed table standing in for one approximation oracle, together
with the limit behaviour the table is meant to exhibit and the stage by
which that behaviour is visible.  The script kinds:

``pi1``         bits, antitone (once 0, never 1 again); limit 1 means the
                table is constantly 1.
``sigma2``      bits; limit b means the table equals b from the settle
                stage on.
``pi2``         bits; limit 1 means 1s keep recurring (at desk scale: a 1
                occurs at or after the settle stage); limit 0 means the
                tail is all 0.
``dsigma2``     pairs of bits, one per component set, each component with
                sigma2 semantics.  The induced case of a settled pair is
                0 (first bit 0), 1 (in the first set only) or 2 (in
                both).
``ce_enum``     finite sets, nondecreasing in the stage.  The declared
                limit is the finite set of numbers the enumeration
                permanently omits: from the settle stage on, the gaps
                below ``max(limit) + 1`` are exactly the declared set.
``delta2_fun``  naturals, one per stage (or one row of naturals per
                stage); limit is the eventual value (or row).
``liminf_fun``  naturals; the declared limit is the minimum of the tail
                from the settle stage on, attained there.

Scripts serialize as ``{kind, horizon, declared_limit, settle_stage,
table}`` and are validated structurally by :func:`validate_script`, which
returns a list of violations (empty means valid).

The module also carries two pieces of stage machinery that belong to the
scripts rather than to any one structure class: the movable-finite-set
tracker (:func:`movable_set_step`), which follows the complement of a
scripted enumeration, and :func:`build_liminf_tracker`, which turns a
row-table of settling guesses at a nondecreasing function into a
``liminf_fun`` script by promoting an index on agreement and falling back
to the least disagreeing index otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .serial import canonical_dumps

KINDS = ("pi1", "sigma2", "pi2", "dsigma2", "ce_enum", "delta2_fun", "liminf_fun")

BIT_KINDS = ("pi1", "sigma2", "pi2")


@dataclass(frozen=True)
class OracleScript:
    """A finite stage table with its declared limit behaviour."""

    kind: str
    horizon: int
    declared_limit: object
    settle_stage: int
    table: tuple

    def guess(self, s: int):
        return self.table[s]

    def to_obj(self) -> dict:
        table = [list(row) if isinstance(row, tuple) else row for row in self.table]
        limit = self.declared_limit
        if isinstance(limit, tuple):
            limit = list(limit)
        return {
            "kind": self.kind,
            "horizon": self.horizon,
            "declared_limit": limit,
            "settle_stage": self.settle_stage,
            "table": table,
        }

    def dumps(self) -> str:
        return canonical_dumps(self.to_obj())


def script_from_obj(obj: dict) -> OracleScript:
    kind = obj["kind"]
    raw = obj["table"]
    if kind == "dsigma2":
        table = tuple((int(a), int(b)) for a, b in raw)
    elif kind == "ce_enum":
        table = tuple(tuple(int(x) for x in row) for row in raw)
    elif kind == "delta2_fun" and raw and isinstance(raw[0], list):
        table = tuple(tuple(int(x) for x in row) for row in raw)
    else:
        table = tuple(int(x) for x in raw)
    limit = obj["declared_limit"]
    if isinstance(limit, list):
        limit = tuple(int(x) for x in limit)
    return OracleScript(
        kind=kind,
        horizon=int(obj["horizon"]),
        declared_limit=limit,
        settle_stage=int(obj["settle_stage"]),
        table=table,
    )


# ---------------------------------------------------------------------------
# validation


def _is_bit(x) -> bool:
    return isinstance(x, int) and x in (0, 1)


def _check_bits(script: OracleScript, out: list[str]) -> bool:
    if not all(_is_bit(x) for x in script.table):
        out.append("table entries must be bits")
        return False
    return True


def validate_script(script: OracleScript) -> list[str]:
    """Structural validation; returns violation strings, empty when valid."""
    out: list[str] = []
    if script.kind not in KINDS:
        return [f"unknown kind {script.kind!r}"]
    if script.horizon != len(script.table):
        out.append("horizon does not match table length")
    if not 0 <= script.settle_stage <= script.horizon:
        out.append("settle_stage out of range")
        return out
    T = len(script.table)
    settle = script.settle_stage
    tail = range(min(settle, T), T)
    kind = script.kind

    if kind in BIT_KINDS:
        if not _check_bits(script, out):
            return out
        limit = script.declared_limit
        if not _is_bit(limit):
            out.append("declared_limit must be a bit")
            return out
        if kind == "pi1":
            for s in range(1, T):
                if script.table[s] > script.table[s - 1]:
                    out.append(f"pi1 table not antitone at stage {s}")
                    break
            if T and limit != min(script.table):
                out.append("pi1 declared_limit disagrees with table")
        elif kind == "sigma2":
            if any(script.table[s] != limit for s in tail):
                out.append("sigma2 tail does not hold the declared limit")
        else:  # pi2
            if limit == 1:
                if T and not any(script.table[s] == 1 for s in tail):
                    out.append("pi2 declared limit 1 but no 1 at or after settle_stage")
            else:
                if any(script.table[s] != 0 for s in tail):
                    out.append("pi2 declared limit 0 but a 1 occurs after settle_stage")

    elif kind == "dsigma2":
        for s, entry in enumerate(script.table):
            if not (isinstance(entry, tuple) and len(entry) == 2 and all(_is_bit(b) for b in entry)):
                out.append(f"dsigma2 entry at stage {s} must be a bit pair")
                return out
        limit = script.declared_limit
        if not (isinstance(limit, tuple) and len(limit) == 2 and all(_is_bit(b) for b in limit)):
            out.append("dsigma2 declared_limit must be a bit pair")
            return out
        for s in tail:
            if script.table[s] != limit:
                out.append("dsigma2 tail does not hold the declared limit pair")
                break

    elif kind == "ce_enum":
        for s, row in enumerate(script.table):
            if not isinstance(row, tuple) or any(not isinstance(x, int) or x < 0 for x in row):
                out.append(f"ce_enum entry at stage {s} must be a set of naturals")
                return out
            if list(row) != sorted(set(row)):
                out.append(f"ce_enum entry at stage {s} is not a sorted set")
                return out
        for s in range(1, T):
            if not set(script.table[s - 1]) <= set(script.table[s]):
                out.append(f"ce_enum table not nondecreasing at stage {s}")
                break
        limit = script.declared_limit
        if not isinstance(limit, tuple) or list(limit) != sorted(set(limit)):
            out.append("ce_enum declared_limit must be a sorted set")
            return out
        lim = set(limit)
        for s in range(T):
            if lim & set(script.table[s]):
                out.append(f"ce_enum enumerates a declared-omitted element at stage {s}")
                break
        if limit:
            top = max(limit)
            for s in tail:
                gaps = {y for y in range(top + 1) if y not in script.table[s]}
                if gaps != lim:
                    out.append("ce_enum tail gaps do not match the declared limit set")
                    break

    elif kind == "delta2_fun":
        rows = script.table and isinstance(script.table[0], tuple)
        if rows:
            width = len(script.table[0])
            for s, row in enumerate(script.table):
                if len(row) != width or any(not isinstance(x, int) or x < 0 for x in row):
                    out.append(f"delta2_fun row at stage {s} malformed")
                    return out
            limit = script.declared_limit
            if not isinstance(limit, tuple) or len(limit) != width:
                out.append("delta2_fun declared_limit must be a row of the table width")
                return out
            for s in tail:
                if script.table[s] != limit:
                    out.append("delta2_fun tail rows do not hold the declared row")
                    break
        else:
            if any(not isinstance(x, int) or x < 0 for x in script.table):
                out.append("delta2_fun entries must be naturals")
                return out
            if not isinstance(script.declared_limit, int):
                out.append("delta2_fun declared_limit must be a natural")
                return out
            if any(script.table[s] != script.declared_limit for s in tail):
                out.append("delta2_fun tail does not hold the declared value")

    elif kind == "liminf_fun":
        if any(not isinstance(x, int) or x < 0 for x in script.table):
            out.append("liminf_fun entries must be naturals")
            return out
        if not isinstance(script.declared_limit, int):
            out.append("liminf_fun declared_limit must be a natural")
            return out
        if settle < T and min(script.table[s] for s in tail) != script.declared_limit:
            out.append("liminf_fun tail minimum differs from the declared liminf")

    return out


def dsigma2_case(pair: tuple[int, int]) -> int:
    """Case index of a component pair: 0 outside, 1 first-only, 2 both."""
    b1, b2 = pair
    if not b1:
        return 0
    return 2 if b2 else 1


# ---------------------------------------------------------------------------
# generation


def gen_script(spec: dict) -> OracleScript:
    """Build a script from a semantic spec.

    The spec names the kind, horizon and declared limit, plus a
    perturbation schedule whose shape depends on the kind (see the
    per-kind helpers below).  Generation is deterministic; the settle
    stage is computed as the earliest stage from which the declared
    behaviour holds over the schedule.
    """
    kind = spec["kind"]
    horizon = spec["horizon"]
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if kind == "pi1":
        return _gen_pi1(horizon, spec)
    if kind == "sigma2":
        return _gen_sigma2(horizon, spec)
    if kind == "pi2":
        return _gen_pi2(horizon, spec)
    if kind == "dsigma2":
        return _gen_dsigma2(horizon, spec)
    if kind == "ce_enum":
        return _gen_ce_enum(horizon, spec)
    if kind == "delta2_fun":
        return _gen_delta2(horizon, spec)
    if kind == "liminf_fun":
        return _gen_liminf(horizon, spec)
    raise ValueError(f"unknown kind {kind!r}")


def _gen_pi1(horizon: int, spec: dict) -> OracleScript:
    limit = spec["limit"]
    if limit == 1:
        table = (1,) * horizon
        settle = 0
    else:
        exit_stage = spec.get("exit", 0)
        if horizon and not 0 <= exit_stage < horizon:
            raise ValueError("pi1 exit stage must fall inside the horizon")
        table = tuple(1 if s < exit_stage else 0 for s in range(horizon))
        settle = exit_stage if horizon else 0
    return OracleScript("pi1", horizon, limit, settle, table)


def _bit_table(horizon: int, limit: int, flips: Sequence[int]) -> tuple[tuple, int]:
    flips = sorted(set(flips))
    if flips and flips[-1] >= horizon:
        raise ValueError("flip stage outside the horizon")
    table = tuple(1 - limit if s in set(flips) else limit for s in range(horizon))
    settle = flips[-1] + 1 if flips else 0
    return table, settle


def _gen_sigma2(horizon: int, spec: dict) -> OracleScript:
    table, settle = _bit_table(horizon, spec["limit"], spec.get("flips", ()))
    return OracleScript("sigma2", horizon, spec["limit"], settle, table)


def _gen_pi2(horizon: int, spec: dict) -> OracleScript:
    limit = spec["limit"]
    if limit == 0:
        table, settle = _bit_table(horizon, 0, spec.get("ones", ()))
        return OracleScript("pi2", horizon, 0, settle, table)
    if "ones" in spec:
        ones = sorted(set(spec["ones"]))
        if ones and ones[-1] >= horizon:
            raise ValueError("recurrence stage outside the horizon")
        settle = spec.get("settle", 0)
    else:
        period = spec.get("period", 3)
        offset = spec.get("offset", 0)
        ones = [s for s in range(horizon) if s % period == offset % period]
        settle = spec.get("settle", 0)
    table = tuple(1 if s in set(ones) else 0 for s in range(horizon))
    if horizon and not any(table[s] for s in range(min(settle, horizon - 1), horizon)):
        raise ValueError("pi2 limit-1 schedule has no recurrence after settle")
    return OracleScript("pi2", horizon, 1, settle, table)


def _gen_dsigma2(horizon: int, spec: dict) -> OracleScript:
    limit = tuple(spec["limit"])
    if spec.get("ce"):
        entries = (spec.get("entry1"), spec.get("entry2"))
        cols = []
        for bit, entry in zip(limit, entries):
            if bit:
                if entry is None or (horizon and not 0 <= entry < horizon):
                    raise ValueError("ce component with limit 1 needs an entry stage inside the horizon")
                cols.append(tuple(1 if s >= entry else 0 for s in range(horizon)))
            else:
                if entry is not None:
                    raise ValueError("ce component with limit 0 cannot have an entry stage")
                cols.append((0,) * horizon)
        settle = max([e for e in entries if e is not None], default=0)
    else:
        col1, s1 = _bit_table(horizon, limit[0], spec.get("flips1", ()))
        col2, s2 = _bit_table(horizon, limit[1], spec.get("flips2", ()))
        cols = [col1, col2]
        settle = max(s1, s2)
    table = tuple(zip(cols[0], cols[1])) if horizon else ()
    return OracleScript("dsigma2", horizon, limit, settle, table)


def _gen_ce_enum(horizon: int, spec: dict) -> OracleScript:
    """Enumerate everything except the declared complement, with churn.

    Values below ``cover`` (excluding the complement) enter in increasing
    order during the warm-up, except those the ``late`` map delays.  After
    the last scheduled entry the generator keeps churning: it lets a few
    fresh values sit outside the enumeration for ``churn`` stages, then
    enumerates them, so trackers of the complement keep returning to the
    declared set.
    """
    comp = tuple(sorted(set(spec.get("complement", ()))))
    cover = spec.get("cover", (max(comp) + 2 if comp else 2))
    churn = max(2, spec.get("churn", 4))
    late: dict[int, int] = dict(spec.get("late", {}))
    if any(v in comp for v in late):
        raise ValueError("late entries must not be declared-omitted values")
    warmup = max(1, spec.get("warmup", 2))
    base = [v for v in range(cover) if v not in comp and v not in late]
    pending = sorted(late.items(), key=lambda kv: (kv[1], kv[0]))
    current: set[int] = set()
    table = []
    covered_at = None
    next_fresh = cover
    for s in range(horizon):
        if s >= 1:
            if base:
                current.update(base[:warmup])
                del base[:warmup]
            while pending and pending[0][1] <= s:
                current.add(pending.pop(0)[0])
            if not base and not pending:
                if covered_at is None:
                    covered_at = s
                elif (s - covered_at) % churn == 0:
                    # flush every fresh value a complement tracker may
                    # have picked up since the last flush
                    hi = cover + s
                    current.update(range(next_fresh, hi))
                    next_fresh = max(next_fresh, hi)
        table.append(tuple(sorted(current)))
    if comp and horizon:
        top = max(comp)
        settle = None
        for s in range(horizon):
            gaps = {y for y in range(top + 1) if y not in table[s]}
            if gaps == set(comp):
                settle = s
                break
        if settle is None:
            raise ValueError("horizon too short to cover the declared complement window")
    else:
        settle = covered_at if covered_at is not None else 0
    return OracleScript("ce_enum", horizon, comp, settle, tuple(table))


def _gen_delta2(horizon: int, spec: dict) -> OracleScript:
    limit = spec["limit"]
    pre = sorted(spec.get("pre", ()), key=lambda kv: kv[0])
    if pre and pre[-1][0] >= horizon:
        raise ValueError("pre-settle stage outside the horizon")
    values = [limit] * horizon
    for stage, value in pre:
        values[stage] = value
    settle = pre[-1][0] + 1 if pre else 0
    return OracleScript("delta2_fun", horizon, limit, settle, tuple(values))


def _gen_liminf(horizon: int, spec: dict) -> OracleScript:
    limit = spec["limit"]
    period = max(1, spec.get("period", 3))
    wave = spec.get("wave", 2)
    pre = sorted(spec.get("pre", ()), key=lambda kv: kv[0])
    if pre and pre[-1][0] >= horizon:
        raise ValueError("pre-settle stage outside the horizon")
    settle = pre[-1][0] + 1 if pre else 0
    values = []
    for s in range(horizon):
        if s < settle:
            values.append(limit)
        else:
            values.append(limit if (s - settle) % period == 0 else limit + 1 + ((s - settle) % wave if wave else 0))
    for stage, value in pre:
        values[stage] = value
    if settle < horizon and min(values[settle:]) != limit:
        raise ValueError("liminf schedule does not attain its limit after settle")
    return OracleScript("liminf_fun", horizon, limit, settle, tuple(values))


# ---------------------------------------------------------------------------
# movable finite set


def movable_set_step(current: Sequence[int], enumerated: Sequence[int]) -> tuple[int, ...]:
    """One update of the finite set tracking an enumeration's complement.

    If some enumerated value sits in the current set, keep only the part
    of the set below the least such value.  Otherwise grow the set by the
    least value that is neither enumerated nor already present.
    """
    cur = set(current)
    enum = set(enumerated)
    hit = sorted(cur & enum)
    if hit:
        x = hit[0]
        return tuple(sorted(y for y in cur if y < x))
    y = 0
    while y in enum or y in cur:
        y += 1
    return tuple(sorted(cur | {y}))


def movable_run(script: OracleScript) -> list[tuple[int, ...]]:
    """Stage sets of the movable tracker along a ``ce_enum`` script.

    The tracker starts empty and steps against the stage-``s`` table entry
    to produce its stage-``s`` set, for every stage past the first.
    """
    if script.kind != "ce_enum":
        raise ValueError("movable_run drives ce_enum scripts")
    if script.horizon == 0:
        return []
    sets: list[tuple[int, ...]] = [()]
    for s in range(1, script.horizon):
        sets.append(movable_set_step(sets[-1], script.table[s]))
    return sets


# ---------------------------------------------------------------------------
# liminf tracker


def build_liminf_tracker(approx: OracleScript) -> tuple[OracleScript, list[tuple[int, int]]]:
    """Fold a row-table of settling guesses into a ``liminf_fun`` script.

    ``approx`` must be a row-shaped ``delta2_fun`` script whose stage-``s``
    row holds the stage-``s`` guesses at a function of the column index,
    nondecreasing in the column at every stage.  The tracker follows one
    column index: it starts at column 0, advances one column whenever the
    new stage agrees with the previous stage on every column up to the
    tracked one, and otherwise falls back to the least column where they
    disagree.  The emitted value is always the new stage's guess at the
    tracked column.  The tracked index is clamped at the table width.

    Returns the emitted script and the trace of (value, column) pairs.
    """
    if approx.kind != "delta2_fun" or not approx.table or not isinstance(approx.table[0], tuple):
        raise ValueError("build_liminf_tracker needs a row-shaped delta2_fun script")
    rows = approx.table
    width = len(rows[0])
    for s, row in enumerate(rows):
        for j in range(1, width):
            if row[j] < row[j - 1]:
                raise ValueError(f"guess row at stage {s} is not nondecreasing")
    trace: list[tuple[int, int]] = [(rows[0][0], 0)]
    col = 0
    for s in range(len(rows) - 1):
        new, old = rows[s + 1], rows[s]
        diff = [j for j in range(col + 1) if new[j] != old[j]]
        if diff:
            col = diff[0]
        else:
            col = min(col + 1, width - 1)
        trace.append((new[col], col))
    values = tuple(v for v, _ in trace)
    declared = approx.declared_limit[-1] if isinstance(approx.declared_limit, tuple) else approx.declared_limit
    settle = 0
    for s, v in enumerate(values):
        if v < declared:
            settle = s + 1
    script = OracleScript("liminf_fun", len(values), declared, settle, values)
    return script, trace
