"""Diagnosability of timed automata under static observation.

A run is Delta-faulty when strictly more than ``delta`` time units elapse
after its first fault. ``A`` is (Sigma_o, delta)-diagnosable when no
Delta-faulty run and fault-free run produce the same timed word once
projected on ``Sigma_o``. The check explores the region graph of a twin
plant: the fault monitor of ``A`` synchronized on ``Sigma_o`` with the
fault-free part of ``A`` (clocks primed). Both sides let time elapse
together, so a reachable twin state whose left side is past the deadline
gives two runs with equal observations.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product as cartesian
from typing import Iterable

from .constructions import (DELTA_FAULTY, FAULTY, NONFAULTY, Mask, apply_mask,
                            build_fault_monitor, fresh_clock, hide, product,
                            prune, rename_clocks, restrict_nonfaulty)
from .core import (FAULT, TAU, Edge, Run, TAError, TimedAutomaton, fmt, simulate)
from .region import ABOVE, RegionSpace, build_region_graph, concretize, region_successors

logger = logging.getLogger(__name__)


@dataclass
class Witness:
    """A Delta-faulty run and a fault-free run with equal observations."""

    faulty: Run
    nonfaulty: Run
    observable: frozenset

    def observation(self):
        return self.faulty.trace().project(self.observable)

    def to_json(self) -> dict:
        def side(run):
            return {"trace": run.trace().to_json(),
                    "observed": run.trace().project(self.observable).to_json(),
                    "run": run.to_json()}
        return {"faulty": side(self.faulty), "nonfaulty": side(self.nonfaulty)}


@dataclass
class Verdict:
    diagnosable: bool
    delta: int | None
    witness: Witness | None = None
    params: dict = field(default_factory=dict)

    def __bool__(self):
        return self.diagnosable

    @property
    def delta_checked(self):
        return self.delta

    def to_json(self) -> dict:
        out = {"diagnosable": self.diagnosable, "delta": self.delta}
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        out["params"] = dict(self.params)
        return out


# --------------------------------------------------------------------------
# twin plant

def fault_tracker(A: TimedAutomaton) -> TimedAutomaton:
    """Two copies of ``A``: before (1) and after (2) the first fault."""
    edges = []
    for i in (NONFAULTY, FAULTY):
        for e in A.edges:
            j = FAULTY if e.label == FAULT else i
            edges.append(Edge((e.source, i), (e.target, j), e.label, e.guard, e.reset,
                              e.cost, origin=e))
    locs = [(l, i) for i in (NONFAULTY, FAULTY) for l in A.locations]
    T = TimedAutomaton(
        name=f"{A.name}(f)", locations=tuple(locs), initial=(A.initial, NONFAULTY),
        clocks=A.clocks, events=A.events, edges=tuple(edges),
        invariants={(l, i): A.invariant(l) for l, i in locs})
    return prune(T)


def _primed(A: TimedAutomaton) -> dict[str, str]:
    taken = set(A.clocks)
    out = {}
    for x in A.clocks:
        y = x + "'"
        while y in taken:
            y += "'"
        taken.add(y)
        out[x] = y
    return out


def twin_plant(A: TimedAutomaton, observable: Iterable[str], delta: int | None,
               ) -> tuple[TimedAutomaton, str | None]:
    """The twin plant and the name of its fault clock (None without delta).

    Locations are ``((l, copy), l')``. Events outside ``observable`` become
    tau on both sides.
    """
    observable = frozenset(observable)
    extra = set(_primed(A).values())
    if delta is None:
        left, z = fault_tracker(A), None
    else:
        z = fresh_clock(set(A.clocks) | extra)
        left = build_fault_monitor(A, delta, clock=z)
    right = rename_clocks(restrict_nonfaulty(A), _primed(A))
    T = product(hide(left, observable), hide(right, observable),
                name=f"twin({A.name})")
    return T, z


def _is_delta_faulty(space: RegionSpace, z: str, state) -> bool:
    (loc, r) = state
    return loc[0][1] == DELTA_FAULTY and r.ranks[space.index[z]] == ABOVE


def _origin_left(e: Edge) -> Edge | None:
    # hidden edge -> monitor edge -> edge of A (None for the copy switch)
    return e.origin.origin


def _origin_right(e: Edge) -> Edge:
    # hidden edge -> primed edge -> edge of A
    return e.origin.origin


def _split(A: TimedAutomaton, twin_run: Run) -> tuple[Run, Run]:
    left, right = [], []
    for m in twin_run.moves:
        if isinstance(m, Edge):
            eL, eR = m.origin
            if eL is not None:
                a = _origin_left(eL)
                if a is not None:
                    left.append(a)
            if eR is not None:
                right.append(_origin_right(eR))
        else:
            left.append(m)
            right.append(m)
    return simulate(A, left), simulate(A, right)


def _check_alphabet(A: TimedAutomaton, observable) -> frozenset:
    observable = frozenset(observable)
    if not observable <= A.events:
        raise TAError(f"observable events {sorted(observable - A.events)} not in the alphabet")
    return observable


def check_delta_diag(A: TimedAutomaton, observable: Iterable[str], delta: int,
                     with_witness: bool = True) -> Verdict:
    """Decide (observable, delta)-diagnosability, with a witness pair if not."""
    observable = _check_alphabet(A, observable)
    if delta < 0 or int(delta) != delta:
        raise TAError("delta must be a natural number")
    delta = int(delta)
    T, z = twin_plant(A, observable, delta)
    space = RegionSpace.for_automaton(T)
    init = (T.initial, space.zero())
    parent = {init: None}
    todo = deque([init])
    bad = None
    while todo:
        s = todo.popleft()
        if _is_delta_faulty(space, z, s):
            bad = s
            break
        for lab, t in region_successors(T, space, s):
            if t not in parent:
                parent[t] = (s, lab)
                todo.append(t)
    params = {"twin_locations": len(T.locations), "explored_states": len(parent),
              "granularity": f"1/{space.scale}"}
    if bad is None:
        return Verdict(True, delta, None, params)
    witness = None
    if with_witness:
        path = []
        s = bad
        while parent[s] is not None:
            prev, lab = parent[s]
            path.append((lab, s))
            s = prev
        path.reverse()
        twin_run = concretize(T, space, path)
        faulty, nonfaulty = _split(A, twin_run)
        witness = Witness(faulty, nonfaulty, observable)
        assert faulty.time_after_fault() is not None and faulty.time_after_fault() > delta
        assert nonfaulty.fault_time() is None
        assert faulty.trace().project(observable) == nonfaulty.trace().project(observable)
    return Verdict(False, delta, witness, params)


def delta_bound(A: TimedAutomaton, observable: Iterable[str]) -> int:
    """Number of states of the region graph of the clockless-monitor twin, plus one.

    A Delta-ambiguity longer than this pumps a cycle of that graph. Zeno
    cycles are not excluded, so completeness holds modulo Zeno ambiguity.
    """
    observable = _check_alphabet(A, observable)
    T, _ = twin_plant(A, observable, None)
    return len(build_region_graph(T)) + 1


def check_diag(A: TimedAutomaton, observable: Iterable[str]) -> Verdict:
    """Decide observable-diagnosability (some delta exists)."""
    bound = delta_bound(A, observable)
    v = check_delta_diag(A, observable, bound)
    v.params["delta_bound"] = bound
    return v


def min_delta(A: TimedAutomaton, observable: Iterable[str]) -> int | None:
    """Least delta for which ``A`` is diagnosable, None if there is none."""
    bound = delta_bound(A, observable)
    if not check_delta_diag(A, observable, bound, with_witness=False):
        return None
    return _least(lambda d: check_delta_diag(A, observable, d, with_witness=False).diagnosable,
                  0, bound)


def _least(pred, lo: int, hi: int) -> int:
    """Least k in [lo, hi] with pred(k), given pred(hi) and pred monotone."""
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


# --------------------------------------------------------------------------
# static sensor minimization

def min_sensor_set(A: TimedAutomaton, n: int) -> frozenset | None:
    """First ``n``-element observable set (lexicographic) making ``A`` diagnosable."""
    events = sorted(A.events)
    if not 0 <= n <= len(events):
        raise TAError(f"n must lie in 0..{len(events)}")
    for combo in combinations(events, n):
        if check_diag(A, combo).diagnosable:
            return frozenset(combo)
    return None


def min_cardinality(A: TimedAutomaton) -> tuple[int, frozenset] | None:
    """Smallest ``n`` with a diagnosing observable set of that size."""
    n_all = len(A.events)
    if min_sensor_set(A, n_all) is None:
        return None
    n = _least(lambda k: min_sensor_set(A, k) is not None, 0, n_all)
    return n, min_sensor_set(A, n)


def check_mask_diag(A: TimedAutomaton, M: Mask, delta: int | None = None) -> Verdict:
    B = apply_mask(A, M)
    if delta is None:
        return check_diag(B, B.events)
    return check_delta_diag(B, B.events, delta)


def masks(events: Iterable[str], n: int):
    """Every surjective mask onto ``1..n``, in a fixed order.

    Events are taken in sorted order and values tried as 1..n then epsilon,
    so the first mask maps every event to 1.
    """
    events = sorted(events)
    values = list(range(1, n + 1)) + [None]
    for combo in cartesian(values, repeat=len(events)):
        if set(range(1, n + 1)) <= set(combo):
            yield Mask(n, dict(zip(events, combo)))


def min_mask(A: TimedAutomaton, n: int) -> Mask | None:
    if not 1 <= n <= max(1, len(A.events)):
        raise TAError(f"n must lie in 1..{len(A.events)}")
    for M in masks(A.events, n):
        if check_mask_diag(A, M).diagnosable:
            return M
    return None


def min_mask_size(A: TimedAutomaton) -> tuple[int, Mask] | None:
    n_all = len(A.events)
    if n_all == 0 or min_mask(A, n_all) is None:
        return None
    n = _least(lambda k: min_mask(A, k) is not None, 1, n_all)
    return n, min_mask(A, n)
