"""The generic stagewise embedding engine.

A run builds a copy of a moving target structure by stages.  The copy's
elements are constants ``b_0, b_1, ...``; the machine maintains a finite
injective partial map ``p`` from constants into the stage's target,
decides the copy's atomic diagram monotonically (a decided sentence is
frozen forever), and covers both directions: by stage ``s`` the first
``s`` constants should be mapped and the first ``s`` elements of the
target's enumeration should be images.

When the stage target changes, a look-back policy picks an anchor stage
whose state is restored exactly.  Constants bound after the anchor lose
their images but keep their frozen sentences; they re-enter through
domain coverage, where a small constraint solver finds images that
satisfy every frozen sentence, and constants the solver cannot yet place
stay parked until a later stage.  All of that keeps the per-stage maps
consistent with the frozen diagram, which the machine re-verifies as it
goes.

The policies themselves are pure functions of the stage history; domain
arithmetic (what an atom means, how to solve constraints) comes from a
domain adapter object.
"""

from __future__ import annotations

from .finitestructs import InvariantError, ScriptError
from .oracles import dsigma2_case

POLICIES = (
    "greatest_same_guess",
    "vs_two_set",
    "field_two_set",
    "liminf_condition",
    "span_restore",
)


def compute_anchor(policy: str, history: list, new_key, new_data):
    """Anchor stage for a look-back, plus a flag for off-script transitions.

    ``history`` holds one ``(target_key, stage_data)`` pair per completed
    stage.  The policy is consulted only when the target actually changed;
    returning ``s - 1`` means plain extension into the new target.
    """
    s = len(history)
    if s == 0:
        raise InvariantError("no history to anchor against")
    keys = [h[0] for h in history]
    datas = [h[1] for h in history]

    if policy == "greatest_same_guess":
        for t in range(s - 1, -1, -1):
            if keys[t] == new_key:
                return t, False
        return 0, False

    if policy in ("vs_two_set", "field_two_set"):
        new_case = dsigma2_case(new_data)
        old_case = dsigma2_case(datas[s - 1])
        if new_case == 0:
            # the first component dropped: resume the last outside stage
            for t in range(s - 1, -1, -1):
                if datas[t][0] == 0:
                    return t, False
            return 0, False
        if new_case == 1:
            if old_case == 0:
                return s - 1, False
            # the second component dropped: resume the last believing
            # stage the first component has protected ever since
            held = True
            for t in range(s - 1, -1, -1):
                if held and dsigma2_case(datas[t]) == 1:
                    return t, False
                if datas[t][0] == 0:
                    held = False
            for t in range(s - 1, -1, -1):
                if datas[t][0] == 0:
                    return t, False
            return 0, False
        # new_case == 2: the pair landed in both components
        for t in range(s - 1, -1, -1):
            if dsigma2_case(datas[t]) != 1:
                return t, False
        return 0, False

    if policy == "liminf_condition":
        g = new_data
        interior_min = None
        for t in range(s - 1, -1, -1):
            if datas[t] == g and (interior_min is None or interior_min >= g):
                return t, False
            interior_min = datas[t] if interior_min is None else min(interior_min, datas[t])
        for t in range(s - 1, -1, -1):
            if datas[t] <= g:
                return t, False
        return 0, True

    if policy == "span_restore":
        new_set = set(new_data)
        old_set = set(datas[s - 1])
        if new_set > old_set:
            return s - 1, False
        for t in range(s - 1, -1, -1):
            if tuple(datas[t]) == tuple(new_data):
                return t, False
        return 0, bool(new_data)

    raise ScriptError(f"unknown look-back policy {policy!r}")


class StageMachine:
    """Drives one embedding run; see the module docstring for the model."""

    def __init__(self, domain, target_for, stage_data, policy, horizon):
        if policy not in POLICIES:
            raise ScriptError(f"unknown look-back policy {policy!r}")
        self.domain = domain
        self.target_for = target_for
        self.stage_data = stage_data
        self.policy = policy
        self.horizon = horizon
        self._atom_blocks: list = []

    # -- the global atom stream over constants, filtered by the bound set

    def _covered_prefix(self, count: int, dom: set) -> list:
        """First ``count`` atoms of the global stream whose constants are
        all bound; shorter when the bound constants support fewer atoms
        (a finite relational language runs out of sentences)."""
        out = []
        n = 0
        limit = (max(dom) if dom else 0) + count + 3
        while len(out) < count and n <= limit:
            if n == len(self._atom_blocks):
                self._atom_blocks.append(self.domain.atom_blocks(n))
            for atom in self._atom_blocks[n]:
                if all(c in dom for c in self.domain.atom_constants(atom)):
                    out.append(atom)
                    if len(out) == count:
                        break
            n += 1
        return out

    def run(self) -> list:
        """Execute all stages; returns the per-stage runtime records."""
        p: dict = {}
        decided: dict = {}
        history: list = []
        stages: list = []
        next_constant = 0
        for s in range(self.horizon):
            data = self.stage_data(s)
            target = self.target_for(data)
            anchor = None
            flagged = False
            if s > 0 and target.key != history[-1][0]:
                anchor, flagged = compute_anchor(self.policy, history, target.key, data)
                if anchor != s - 1:
                    p = dict(stages[anchor]["p"])
                for v in p.values():
                    if not target.contains(v):
                        raise InvariantError(
                            f"stage {s}: anchored image left the target {target.key}"
                        )
            # domain coverage: first s constants, as far as the target allows
            missing = [c for c in range(min(s, next_constant)) if c not in p]
            while next_constant < s:
                # brand-new constants carry no frozen sentences yet; they
                # enter through the same placement path as orphans
                missing.append(next_constant)
                next_constant += 1
            if missing:
                placed = self._place(missing, p, decided, target)
                p.update(placed)
            # range coverage: first s enumerated elements become images
            ran = set(p.values())
            for e in target.enum_prefix(s):
                if e not in ran:
                    p[next_constant] = e
                    ran.add(e)
                    next_constant += 1
            # decide the stage's sentence prefix
            dom = set(p)
            new_atoms = []
            for atom in self._covered_prefix(s + 1, dom) if dom else []:
                truth = self.domain.atom_truth_under(atom, p)
                if atom in decided:
                    if decided[atom] != truth:
                        raise InvariantError(f"stage {s}: frozen sentence flipped: {atom}")
                else:
                    decided[atom] = truth
                    new_atoms.append((atom, truth))
            # stage invariants
            if len(set(p.values())) != len(p):
                raise InvariantError(f"stage {s}: the embedding lost injectivity")
            for atom, sign in decided.items():
                if all(c in p for c in self.domain.atom_constants(atom)):
                    if self.domain.atom_truth_under(atom, p) != sign:
                        raise InvariantError(
                            f"stage {s}: bound constants contradict a frozen sentence"
                        )
            stages.append(
                {
                    "s": s,
                    "data": data,
                    "target_key": target.key,
                    "anchor": anchor,
                    "flagged": flagged,
                    "p": dict(p),
                    "parked": [c for c in range(next_constant) if c not in p],
                    "new_atoms": new_atoms,
                }
            )
            history.append((target.key, data))
        return stages

    def _place(self, missing: list, p: dict, decided: dict, target):
        """Images for currently unbound constants, respecting every frozen
        sentence; the longest solvable prefix wins and the rest stay
        parked."""
        for cut in range(len(missing), -1, -1):
            chosen = missing[:cut]
            if not chosen:
                return {}
            result = self.domain.rebind(target, p, chosen, decided)
            if result is not None:
                return dict(zip(chosen, result))
        return {}


def serialize_stages(stages: list, domain, data_obj) -> list:
    """Stage records in their JSON form."""
    out = []
    for st in stages:
        out.append(
            {
                "s": st["s"],
                "guess": data_obj(st["data"]),
                "target": st["target_key"],
                "anchor": st["anchor"],
                "flagged": st["flagged"],
                "p": [[c, domain.elem_obj(v)] for c, v in sorted(st["p"].items())],
                "parked": st["parked"],
                "new_atoms": [domain.atom_obj(a, g) for a, g in st["new_atoms"]],
            }
        )
    return out


def check_extension(stages: list, pairs) -> list:
    """Stage pairs ``(t, s)`` where the later map fails to extend the
    earlier one; an empty answer means the maintained condition held."""
    bad = []
    for t, s in pairs:
        early = stages[t]["p"]
        late = stages[s]["p"]
        for c, v in early.items():
            if late.get(c) != v:
                bad.append((t, s))
                break
    return bad
