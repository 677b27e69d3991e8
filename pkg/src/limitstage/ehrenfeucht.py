"""Stagewise dense-order constructions with named increasing constants.

The classical three-model theory (Ehrenfeucht's example) axiomatizes a
dense linear order without endpoints together with constants c_0 < c_1
< ... and has exactly three countable models: the constants may be
cofinal, may have a least upper bound, or may have upper bounds but no
least one.  This module builds finite stage presentations of all three
under guess scripts, one constant per stage, and classifies a finished
run by the evidence in its log.

Two step disciplines drive the builds.  Under the cofinal discipline a
believing stage destroys the current upper-bound marker and places the
next constant past everything, so recurring belief makes the constants
cofinal, while a settled disbelief leaves one marker preserved.  Under
the descent discipline the run starts with a marker above the constants
and each destroy instruction undercuts it, creating a new marker
strictly closer to the constants; the instruction guesses come from an
eventually-correct script, and the two mistake kinds are repaired as in
the classical argument: a wrong preserve is a mere delay, and a wrong
destroy is undone by placing the next constant to the right of the
wrongly added bounds, restoring the old marker.

Points carry rational positions purely as a presentation device; every
stage first runs a density fill that bisects each adjacent gap and
extends both ends, the finite surrogate for the density and endpoint
axioms.  Classification is deliberately humble: a finite run can only
be consistent with one of the three completions, so verdicts are
"-consistent" reports, never isomorphism claims.
"""

from fractions import Fraction

from .finitestructs import InvariantError, ScriptError
from .oracles import OracleScript, validate_script
from .serial import frac_str

VERDICTS = (
    "prime-consistent",
    "middle-consistent",
    "saturated-consistent",
    "unsettled",
)

STEP_DISCIPLINES = ("cofinal", "descent")

ORDER_MODES = ("cofinal_pi2", "descent_delta2")


class OrderStage:
    """A finite suborder: positioned points, constants, and one marker.

    ``points`` maps point ids to rational positions, ``constants`` lists
    the point ids carrying c_0, c_1, ... in placement order, ``marker``
    names the current upper-bound point when one exists, and ``events``
    is the full event log.  ``scratch`` holds run-local bookkeeping (the
    current stage number, the guess overlay) and is never serialized.
    """

    def __init__(self):
        self.points: dict = {}
        self.constants: list = []
        self.marker = None
        self.events: list = []
        self.scratch: dict = {}
        self._next_pid = 0

    def _add_point(self, pos: Fraction) -> int:
        pid = self._next_pid
        self._next_pid += 1
        self.points[pid] = Fraction(pos)
        return pid

    def _log(self, kind: str, **extra) -> None:
        event = {"s": self.scratch.get("stage", 0), "kind": kind}
        event.update(extra)
        self.events.append(event)

    def top_position(self):
        return max(self.points.values(), default=None)

    def top_is_constant(self) -> bool:
        if not self.points:
            return False
        top = max(self.points, key=lambda pid: self.points[pid])
        return top in set(self.constants)

    def check(self) -> None:
        """Raise InvariantError unless the stage invariants hold."""
        if len(set(self.points.values())) != len(self.points):
            raise InvariantError("point positions collide")
        placed = [self.points[pid] for pid in self.constants]
        if any(b <= a for a, b in zip(placed, placed[1:])):
            raise InvariantError("constant positions are not strictly increasing")
        if self.marker is not None:
            mpos = self.points[self.marker]
            if any(p >= mpos for p in placed):
                raise InvariantError("the marker does not bound the constants")

    def to_obj(self) -> dict:
        return {
            "points": [
                {"id": pid, "pos": frac_str(self.points[pid])} for pid in sorted(self.points)
            ],
            "constants": list(self.constants),
            "marker": self.marker,
            "events": [dict(ev) for ev in self.events],
        }


def density_fill(state: OrderStage) -> OrderStage:
    """Bisect every adjacent gap and extend both ends by one point.

    An empty stage is seeded with a single point.  The fill is the
    stage-by-stage surrogate for density and lack of endpoints, so it
    is deliberately not idempotent.
    """
    if not state.points:
        state._add_point(Fraction(0))
        state._log("density-fill", added=1)
        state.check()
        return state
    ordered = sorted(state.points.values())
    added = 0
    for a, b in zip(ordered, ordered[1:]):
        state._add_point((a + b) / 2)
        added += 1
    state._add_point(ordered[0] - 1)
    state._add_point(ordered[-1] + 1)
    added += 2
    state._log("density-fill", added=added)
    state.check()
    return state


def _place_constant(state: OrderStage, pos: Fraction, repair: bool = False) -> int:
    pid = state._add_point(pos)
    state.constants.append(pid)
    extra = {"constant": len(state.constants) - 1, "point": pid}
    if repair:
        extra["repair"] = "jump-right"
    state._log("place-constant", **extra)
    return pid


def _below_marker_position(state: OrderStage) -> Fraction:
    mpos = state.points[state.marker]
    below = [p for p in state.points.values() if p < mpos]
    return (max(below) + mpos) / 2


def _step_cofinal(state: OrderStage, guess: int) -> None:
    fallen = state.scratch.setdefault("fallen", [])
    if guess == 1:
        if state.marker is not None:
            state._log("destroy-lub", point=state.marker)
            fallen.append(state.marker)
            state.marker = None
        _place_constant(state, state.top_position() + 1)
        return
    if state.marker is None and state.constants:
        state.marker = state._add_point(state.top_position() + 1)
        state._log("create-lub", point=state.marker)
    elif state.marker is not None:
        state._log("preserve", point=state.marker)
    if state.marker is not None:
        _place_constant(state, _below_marker_position(state))
    else:
        _place_constant(state, state.top_position() + 1)


def _step_descent(state: OrderStage, guess: int) -> None:
    fallen = state.scratch.setdefault("fallen", [])
    run = state.scratch.setdefault("run_demoted", [])
    prev = state.scratch.get("prev_guess")
    if not state.scratch.get("descent_started"):
        state.marker = state._add_point(state.top_position() + 1)
        state._log("create-lub", point=state.marker)
        state.scratch["descent_started"] = True
    if guess == 0:
        if prev != 0:
            run.clear()
        old = state.marker
        undercut = state._add_point(_below_marker_position(state))
        state._log("destroy-lub", point=old)
        fallen.append(old)
        run.append(old)
        state.marker = undercut
        state._log("create-lub", point=undercut)
        _place_constant(state, _below_marker_position(state))
    else:
        if prev == 0 and run:
            wrong = state.marker
            restored = run[0]
            for pid in run:
                fallen.remove(pid)
            run.clear()
            state.marker = restored
            state._log("preserve", point=restored, restored=True, unmade=wrong)
            _place_constant(state, _below_marker_position(state), repair=True)
        else:
            state._log("preserve", point=state.marker)
            _place_constant(state, _below_marker_position(state))
    state.scratch["prev_guess"] = guess


def order_step(state: OrderStage, mode: str, guess: int) -> OrderStage:
    """Apply one scripted guess to the stage under the named discipline.

    Cofinal: a believing guess destroys the marker and places the next
    constant above everything; a disbelieving guess creates the marker
    above the constants placed so far (once any exist) or preserves it,
    and tucks the next constant just below it.  Descent: the run opens
    with a marker, a destroy guess undercuts it by a new marker strictly
    closer to the constants, and a preserve guess keeps it; when a
    preserve follows wrong destroys, the wrongly added bounds are passed
    by the next constant and the old marker is restored.
    """
    if mode not in STEP_DISCIPLINES:
        raise ScriptError(f"unknown order step discipline {mode!r}")
    if guess not in (0, 1):
        raise ScriptError("order guesses must be bits")
    if not state.points:
        density_fill(state)
    if mode == "cofinal":
        _step_cofinal(state, guess)
    else:
        _step_descent(state, guess)
    state.check()
    return state


# ---------------------------------------------------------------------------
# scripted runs and classification


def _precheck(script: OracleScript, kind: str, mode: str) -> None:
    if script.kind != kind:
        raise ScriptError(f"mode {mode} is driven by {kind} scripts, not {script.kind}")
    problems = validate_script(script)
    if problems:
        raise ScriptError("; ".join(problems))
    if script.horizon == 0:
        raise ScriptError("order runs need at least one stage")


def run_order_reduction(mode: str, params: dict, script: OracleScript) -> dict:
    """Drive one order build along a script and classify the result.

    ``cofinal_pi2`` consumes an infinitely-often bit script; recurring
    belief keeps the constants on top and a settled disbelief freezes
    one marker.  ``descent_delta2`` consumes an eventually-constant
    bit-valued instruction script; an eventual preserve leaves one
    marker standing and an eventual destroy sends the markers down a
    strictly descending chain.  Every stage runs the density fill and
    then one step, and the per-stage records carry the events, the
    marker position, and whether a constant sits on top.
    """
    if mode not in ORDER_MODES:
        raise ScriptError(f"unknown order mode {mode!r}")
    if params:
        raise ScriptError("order constructions take no parameters")
    discipline = "cofinal" if mode == "cofinal_pi2" else "descent"
    kind = "pi2" if discipline == "cofinal" else "delta2_fun"
    _precheck(script, kind, mode)
    if discipline == "descent":
        bad_bits = any(v not in (0, 1) for v in script.table)
        if bad_bits or script.declared_limit not in (0, 1):
            raise ScriptError("descent runs need bit-valued instruction guesses")
    state = OrderStage()
    stages: list = []
    for s in range(script.horizon):
        state.scratch["stage"] = s
        seen = len(state.events)
        density_fill(state)
        order_step(state, discipline, script.table[s])
        marker_pos = None
        if state.marker is not None:
            marker_pos = frac_str(state.points[state.marker])
        stages.append(
            {
                "s": s,
                "drive": script.table[s],
                "events": [dict(ev) for ev in state.events[seen:]],
                "points": len(state.points),
                "constants": len(state.constants),
                "marker": marker_pos,
                "top_constant": state.top_is_constant(),
            }
        )
    fallen = [frac_str(state.points[pid]) for pid in state.scratch.get("fallen", ())]
    believing = [s for s in range(script.horizon) if script.table[s] == 1]
    final = {
        "marker": stages[-1]["marker"],
        "fallen": fallen,
        "read_stage": believing[-1] if believing else None,
        "destroy_stages": [
            rec["s"]
            for rec in stages
            if any(ev["kind"] == "destroy-lub" for ev in rec["events"])
        ],
        "points": len(state.points),
        "constants": len(state.constants),
        "settled": script.settle_stage < script.horizon,
        "events": len(state.events),
    }
    log = _envelope(mode, params, script.to_obj(), stages, final)
    log["final"]["verdict"] = classify_run(log)
    return log


def _envelope(mode: str, params: dict, script_obj, stages: list, final: dict) -> dict:
    return {
        "format": "limitstage.run.v1",
        "construction": f"ehrenfeucht.{mode}",
        "params": params,
        "script": script_obj,
        "stages": stages,
        "final": final,
    }


def classify_run(log: dict) -> str:
    """Read a finished run's verdict from its own evidence.

    Prime-consistent: at the last believing stage, at or past settle, a
    constant sits on top of the whole order.  Middle-consistent: a
    marker stands at the horizon and nothing was destroyed from settle
    on.  Saturated-consistent: destroys recur past settle and the
    destroyed markers followed by the standing one form a strictly
    descending chain.  Anything else, including a script that never
    settles inside the horizon, is unsettled.
    """
    script_obj = log["script"]
    stages = log["stages"]
    final = log["final"]
    settle = script_obj["settle_stage"]
    horizon = script_obj["horizon"]
    if horizon == 0 or settle >= horizon:
        return "unsettled"
    destroys = final["destroy_stages"]
    marker_stands = final["marker"] is not None
    read = final["read_stage"]
    if read is not None and read >= settle and stages[read]["top_constant"]:
        return "prime-consistent"
    if marker_stands and all(s < settle for s in destroys):
        return "middle-consistent"
    if marker_stands and any(s >= settle for s in destroys) and final["fallen"]:
        chain = [Fraction(text) for text in final["fallen"]]
        chain.append(Fraction(final["marker"]))
        if all(b < a for a, b in zip(chain, chain[1:])):
            return "saturated-consistent"
    return "unsettled"
