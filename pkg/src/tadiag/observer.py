"""Dynamic observers and their product with a plant.

An observer is a deterministic, complete timed automaton over the plant's
events whose locations carry the set of events observed there. Events outside
that set leave the observer where it is, without resets; those stay-put moves
are implicit and never stored as edges.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

from .core import (FAULT, TAU, TRUE, Edge, TAError, TimedAutomaton, TimedWord, _lcm,
                   delay, reset, zero)
from .diagnosis import Verdict, check_delta_diag, min_delta
from .modelio import ModelError, parse_model, serialize_ta
from .region import RegionSpace

logger = logging.getLogger(__name__)


class ObserverError(TAError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        head = self.problems[0] if self.problems else "invalid observer"
        more = f" (+{len(self.problems) - 1} more)" if len(self.problems) > 1 else ""
        super().__init__(head + more)


@dataclass(frozen=True)
class Observer:
    automaton: TimedAutomaton
    observe: Mapping = field(default_factory=dict)
    scale: int = 1            # guards use constants that are multiples of 1/scale

    __hash__ = None

    def __post_init__(self):
        obs = {n: frozenset(self.observe.get(n, ())) for n in self.automaton.locations}
        object.__setattr__(self, "observe", obs)
        object.__setattr__(self, "scale", _lcm(int(self.scale), self.automaton.granularity()))
        problems = validate_observer(self)
        if problems:
            raise ObserverError(problems)

    @property
    def clocks(self):
        return self.automaton.clocks

    @property
    def events(self):
        return self.automaton.events

    @property
    def initial(self):
        return self.automaton.initial

    def observed(self, n) -> frozenset:
        return self.observe[n]

    def space(self) -> RegionSpace:
        return RegionSpace(self.clocks, self.automaton.max_constants(), self.scale)

    def step(self, n, v: Mapping, a: str) -> tuple[object, dict, Edge | None]:
        """Move on event ``a`` from ``(n, v)``; unobserved events stay put."""
        if a not in self.observe[n]:
            return n, dict(v), None
        for e in self.automaton.outgoing(n):
            if e.label == a and e.guard.holds(v):
                return e.target, reset(v, e.reset), e
        raise TAError(f"observer blocks on {a!r} at {n}")  # excluded by validation

    def to_text(self) -> str:
        return serialize_ta(self.automaton, observe=self.observe,
                            granularity=Fraction(1, self.scale))


def validate_observer(obs: Observer) -> list[str]:
    """Every violated observer condition, as readable messages (empty if valid)."""
    A = obs.automaton
    problems = []
    for e in A.edges:
        if e.label in (TAU, FAULT):
            problems.append(f"edge {e}: observers cannot have {e.label} edges")
    for l, g in A.invariants.items():
        problems.append(f"location {l}: invariant {g} must be true")
    if problems:
        return problems
    space = RegionSpace(A.clocks, A.max_constants(), obs.scale)
    regions = space.all_regions()
    for n in A.locations:
        O = obs.observe[n]
        for a in sorted(A.events):
            edges = [e for e in A.outgoing(n) if e.label == a]
            if a not in O:
                for e in edges:
                    if e.target != n or e.reset:
                        problems.append(f"location {n}: {a} is not observed, so edge {e} "
                                        "must neither move nor reset")
                continue
            for r in regions:
                on = [e for e in edges if space.satisfies(r, e.guard)]
                if not on:
                    problems.append(f"location {n}, event {a}: incomplete at {space.describe(r)}")
                elif len(on) > 1:
                    problems.append(f"location {n}, event {a}: nondeterministic at "
                                    f"{space.describe(r)} ({on[0].guard} / {on[1].guard})")
    return problems


def make_observer(name: str, events: Iterable[str], locations, initial, observe: Mapping,
                  edges: Iterable[Edge], clocks=(), costs: Mapping | None = None,
                  scale: int = 1) -> Observer:
    A = TimedAutomaton(name=name, locations=tuple(locations), initial=initial,
                       clocks=tuple(clocks), events=frozenset(events), edges=tuple(edges),
                       location_costs=dict(costs or {}))
    return Observer(A, observe, scale)


def always_observe(events: Iterable[str], observed: Iterable[str] | None = None,
                   cost: int = 0) -> Observer:
    """One location observing ``observed`` (default: everything) forever."""
    events = frozenset(events)
    observed = events if observed is None else frozenset(observed)
    edges = [Edge("n0", "n0", a) for a in sorted(observed)]
    return make_observer("always", events, ["n0"], "n0", {"n0": observed}, edges,
                         costs={"n0": cost})


def with_rate_costs(obs: Observer) -> Observer:
    """Copy of ``obs`` whose location costs are the number of observed events."""
    A = obs.automaton.replace(location_costs={n: len(obs.observe[n]) for n in obs.automaton.locations})
    return Observer(A, obs.observe, obs.scale)


def parse_observer(text: str) -> Observer:
    pm = parse_model(text)
    scale = 1 if pm.granularity is None else pm.granularity.denominator
    try:
        return Observer(pm.automaton, pm.observe, scale)
    except ObserverError as exc:
        raise ModelError("; ".join(exc.problems)) from exc


def load_observer(path) -> Observer:
    return parse_observer(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# semantics

def observe(obs: Observer, w: TimedWord) -> TimedWord:
    """Output of the observer on ``w``: only letters observed when they occur."""
    n, v = obs.initial, zero(obs.clocks)
    delays, events = [], []
    pending = Fraction(0)
    for d, a in zip(w.delays, w.events):
        v = delay(v, d)
        pending += d
        emitted = a in obs.observe[n]
        n, v, _ = obs.step(n, v, a)
        if emitted:
            delays.append(pending)
            events.append(a)
            pending = Fraction(0)
    delays.append(pending + w.delays[-1])
    return TimedWord(tuple(delays), tuple(events))


def product_obs(A: TimedAutomaton, obs: Observer) -> TimedAutomaton:
    """``A`` unfolded by the observer: unobserved events become tau.

    Locations are ``(l, n)``. Observed events synchronize with the observer
    edge enabled together (guard conjunction, union of resets); unobserved
    events use the implicit stay-put move. Costs come from the observer:
    ``Cost(n)`` per time unit and the cost of the observer edge taken.
    """
    overlap = set(A.clocks) & set(obs.clocks)
    if overlap:
        raise TAError(f"plant and observer share clocks {sorted(overlap)}")
    missing = A.events - obs.events
    if missing:
        raise TAError(f"observer alphabet lacks {sorted(missing)}")
    O = obs.automaton
    init = (A.initial, O.initial)
    locs, edges, seen = [init], [], {init}
    todo = deque([init])
    while todo:
        l, n = todo.popleft()
        new = []
        for e in A.outgoing(l):
            if e.label in (TAU, FAULT) or e.label not in obs.observe[n]:
                label = e.label if e.label in (TAU, FAULT) else TAU
                new.append(Edge((l, n), (e.target, n), label, e.guard, e.reset, 0,
                                origin=(e, None)))
                continue
            for o in O.outgoing(n):
                if o.label == e.label:
                    new.append(Edge((l, n), (e.target, o.target), e.label, e.guard & o.guard,
                                    e.reset | o.reset, o.cost, origin=(e, o)))
        for e in new:
            edges.append(e)
            if e.target not in seen:
                seen.add(e.target)
                locs.append(e.target)
                todo.append(e.target)
    return TimedAutomaton(
        name=f"{A.name}x{O.name}", locations=tuple(locs), initial=init,
        clocks=A.clocks + O.clocks, events=A.events, edges=tuple(edges),
        invariants={(l, n): A.invariant(l) for l, n in locs},
        location_costs={(l, n): O.cost_of(n) for l, n in locs})


def check_obs_diag(A: TimedAutomaton, obs: Observer, delta: int,
                   with_witness: bool = True) -> Verdict:
    """(Obs, delta)-diagnosability, decided on the product with the observer."""
    v = check_delta_diag(product_obs(A, obs), A.events, delta, with_witness=with_witness)
    v.params["observer_locations"] = len(obs.automaton.locations)
    return v


def min_delta_obs(A: TimedAutomaton, obs: Observer) -> int | None:
    return min_delta(product_obs(A, obs), A.events)
