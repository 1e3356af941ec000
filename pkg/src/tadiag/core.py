"""Timed automata, clock constraints, valuations, timed words and runs.

All time values are :class:`fractions.Fraction`; nothing here ever touches a
float once a value has been accepted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence, Union

TAU = "tau"
FAULT = "fault"
RESERVED_LABELS = frozenset({TAU, FAULT})

RELATIONS = ("<", "<=", "=", ">=", ">")
UPPER_RELATIONS = ("<", "<=")

_IDENT = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_'.]*$")

Location = Hashable
Valuation = Mapping[str, Fraction]


class TAError(ValueError):
    """Raised for ill-formed automata, constraints or words."""


class InvalidRun(TAError):
    """A move sequence that the automaton cannot perform."""


def as_fraction(value) -> Fraction:
    """Convert ints, Fractions and decimal or ``p/q`` strings exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TAError(f"not a time value: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # repr gives the shortest round-tripping decimal, e.g. 0.4 -> 2/5
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise TAError(f"not a rational number: {value!r}") from exc
    raise TAError(f"not a time value: {value!r}")


def fmt(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def fmt_location(loc) -> str:
    if isinstance(loc, tuple):
        return ",".join(fmt_location(p) for p in loc)
    if isinstance(loc, frozenset):
        return "{" + ",".join(sorted(map(str, loc))) + "}"
    return str(loc)


# --------------------------------------------------------------------------
# clock constraints

@dataclass(frozen=True, order=True)
class Atom:
    clock: str
    op: str
    const: Fraction

    def __post_init__(self):
        if self.op == "==":
            object.__setattr__(self, "op", "=")
        if self.op not in RELATIONS:
            raise TAError(f"unknown relation {self.op!r}")
        object.__setattr__(self, "const", as_fraction(self.const))
        if self.const < 0:
            raise TAError(f"negative constant in {self.clock}{self.op}{self.const}")

    def holds(self, value: Fraction) -> bool:
        c = self.const
        if self.op == "<":
            return value < c
        if self.op == "<=":
            return value <= c
        if self.op == "=":
            return value == c
        if self.op == ">=":
            return value >= c
        return value > c

    def __str__(self):
        return f"{self.clock}{self.op}{fmt(self.const)}"


@dataclass(frozen=True)
class Guard:
    """A conjunction of atoms; the empty conjunction is TRUE."""

    atoms: tuple[Atom, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @classmethod
    def of(cls, *atoms: tuple) -> "Guard":
        """``Guard.of(("x", "<=", 2), ("y", ">", 1))``"""
        return cls(tuple(Atom(c, op, k) for c, op, k in atoms))

    @property
    def clocks(self) -> frozenset[str]:
        return frozenset(a.clock for a in self.atoms)

    def holds(self, v: Valuation) -> bool:
        return all(a.holds(v[a.clock]) for a in self.atoms)

    def is_upper_bound(self) -> bool:
        return all(a.op in UPPER_RELATIONS for a in self.atoms)

    def __and__(self, other: "Guard") -> "Guard":
        return Guard(self.atoms + other.atoms)

    def __bool__(self):
        return bool(self.atoms)

    def __str__(self):
        return " and ".join(map(str, self.atoms)) if self.atoms else "true"


TRUE = Guard()


# --------------------------------------------------------------------------
# valuations

def zero(clocks: Iterable[str]) -> dict[str, Fraction]:
    return {x: Fraction(0) for x in clocks}


def delay(v: Valuation, d) -> dict[str, Fraction]:
    d = as_fraction(d)
    if d < 0:
        raise TAError(f"negative delay {fmt(d)}")
    return {x: t + d for x, t in v.items()}


def reset(v: Valuation, clocks: Iterable[str]) -> dict[str, Fraction]:
    clocks = frozenset(clocks)
    unknown = clocks - set(v)
    if unknown:
        raise TAError(f"unknown clocks {sorted(unknown)}")
    return {x: (Fraction(0) if x in clocks else t) for x, t in v.items()}


def satisfies(v: Valuation, g: Guard) -> bool:
    unknown = g.clocks - set(v)
    if unknown:
        raise TAError(f"unknown clocks {sorted(unknown)}")
    return g.holds(v)


# --------------------------------------------------------------------------
# timed words

@dataclass(frozen=True)
class TimedWord:
    """``d0 a0 d1 a1 ... dn``: delays interleaved with letters."""

    delays: tuple[Fraction, ...] = (Fraction(0),)
    events: tuple[str, ...] = ()

    def __post_init__(self):
        ds = tuple(as_fraction(d) for d in self.delays)
        object.__setattr__(self, "delays", ds)
        object.__setattr__(self, "events", tuple(self.events))
        if len(ds) != len(self.events) + 1:
            raise TAError("a timed word needs exactly one more delay than events")
        if any(d < 0 for d in ds):
            raise TAError("negative delay in timed word")

    @classmethod
    def parse(cls, text: str) -> "TimedWord":
        """Read the ``0.4 a 1.0 b 2.7`` notation (missing delays are 0)."""
        delays, events = [], []
        expect_delay = True
        for tok in text.split():
            try:
                d = as_fraction(tok)
                is_num = True
            except TAError:
                is_num = False
            if is_num:
                if not expect_delay:
                    delays[-1] += d
                else:
                    delays.append(d)
                expect_delay = False
            else:
                if expect_delay:
                    delays.append(Fraction(0))
                events.append(tok)
                expect_delay = True
        if expect_delay:
            delays.append(Fraction(0))
        return cls(tuple(delays), tuple(events))

    @classmethod
    def from_json(cls, obj: Mapping) -> "TimedWord":
        return cls(tuple(as_fraction(d) for d in obj["delays"]), tuple(obj["events"]))

    def to_json(self) -> dict:
        return {"delays": [fmt(d) for d in self.delays], "events": list(self.events)}

    @property
    def duration(self) -> Fraction:
        return sum(self.delays, Fraction(0))

    def timestamps(self) -> list[Fraction]:
        out, t = [], Fraction(0)
        for d in self.delays[:-1]:
            t += d
            out.append(t)
        return out

    def untime(self) -> tuple[str, ...]:
        return self.events

    def project(self, keep: Iterable[str]) -> "TimedWord":
        keep = frozenset(keep)
        delays, events = [Fraction(0)], []
        for d, a in zip(self.delays, self.events):
            delays[-1] += d
            if a in keep:
                events.append(a)
                delays.append(Fraction(0))
        delays[-1] += self.delays[-1]
        return TimedWord(tuple(delays), tuple(events))

    def rename(self, mapping: Mapping[str, str | None]) -> "TimedWord":
        """Letterwise relabeling; letters mapped to None are erased."""
        delays, events = [Fraction(0)], []
        for d, a in zip(self.delays, self.events):
            delays[-1] += d
            b = mapping[a]
            if b is not None:
                events.append(b)
                delays.append(Fraction(0))
        delays[-1] += self.delays[-1]
        return TimedWord(tuple(delays), tuple(events))

    def __add__(self, other: "TimedWord") -> "TimedWord":
        seam = self.delays[-1] + other.delays[0]
        return TimedWord(self.delays[:-1] + (seam,) + other.delays[1:],
                         self.events + other.events)

    def __len__(self):
        return len(self.events)

    def __str__(self):
        parts = [fmt(self.delays[0])]
        for a, d in zip(self.events, self.delays[1:]):
            parts += [a, fmt(d)]
        return " ".join(parts)


def project(w: TimedWord, keep: Iterable[str]) -> TimedWord:
    return w.project(keep)


def untime(w: TimedWord) -> tuple[str, ...]:
    return w.untime()


# --------------------------------------------------------------------------
# automata

@dataclass(frozen=True)
class Edge:
    source: Location
    target: Location
    label: str
    guard: Guard = TRUE
    reset: frozenset[str] = frozenset()
    cost: int = 0
    # the edge(s) this one was derived from, for derived automata
    origin: object = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "reset", frozenset(self.reset))

    def __str__(self):
        parts = [f"{fmt_location(self.source)} -> {fmt_location(self.target)} on {self.label}"]
        if self.guard:
            parts.append(f"when {self.guard}")
        if self.reset:
            parts.append("reset " + ",".join(sorted(self.reset)))
        if self.cost:
            parts.append(f"cost {self.cost}")
        return " ".join(parts)


@dataclass(frozen=True, eq=True)
class TimedAutomaton:
    name: str
    locations: tuple
    initial: Location
    clocks: tuple[str, ...]
    events: frozenset[str]
    edges: tuple[Edge, ...]
    invariants: Mapping[Location, Guard] = field(default_factory=dict)
    final: frozenset | None = None
    repeated: frozenset = frozenset()
    location_costs: Mapping[Location, int] = field(default_factory=dict)

    __hash__ = None

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "clocks", tuple(self.clocks))
        object.__setattr__(self, "events", frozenset(self.events))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "invariants",
                           {l: g for l, g in dict(self.invariants).items() if g})
        object.__setattr__(self, "location_costs",
                           {l: c for l, c in dict(self.location_costs).items() if c})
        if self.final is not None:
            object.__setattr__(self, "final", frozenset(self.final))
        object.__setattr__(self, "repeated", frozenset(self.repeated))
        self._check()
        out: dict = {l: [] for l in self.locations}
        for e in self.edges:
            out[e.source].append(e)
        object.__setattr__(self, "_out", {l: tuple(es) for l, es in out.items()})

    def _check(self):
        locs = set(self.locations)
        if len(locs) != len(self.locations):
            raise TAError("duplicate location")
        if self.initial not in locs:
            raise TAError(f"initial location {self.initial!r} is not a location")
        if len(set(self.clocks)) != len(self.clocks):
            raise TAError("duplicate clock")
        clocks = set(self.clocks)
        for a in self.events:
            if a in RESERVED_LABELS:
                raise TAError(f"{a!r} is reserved and cannot be an event")
            if not _IDENT.match(a):
                raise TAError(f"bad event name {a!r}")
        for e in self.edges:
            for l in (e.source, e.target):
                if l not in locs:
                    raise TAError(f"edge {e}: unknown location {l!r}")
            if e.label not in self.events and e.label not in RESERVED_LABELS:
                raise TAError(f"edge {e}: label {e.label!r} not in the alphabet")
            bad = (e.guard.clocks | e.reset) - clocks
            if bad:
                raise TAError(f"edge {e}: unknown clocks {sorted(bad)}")
            if e.cost < 0:
                raise TAError(f"edge {e}: negative cost")
        for l, g in self.invariants.items():
            if l not in locs:
                raise TAError(f"invariant for unknown location {l!r}")
            if g.clocks - clocks:
                raise TAError(f"invariant of {l!r}: unknown clocks {sorted(g.clocks - clocks)}")
            if not g.is_upper_bound():
                raise TAError(f"invariant of {fmt_location(l)} must use only < and <=: {g}")
        for l, c in self.location_costs.items():
            if l not in locs or c < 0:
                raise TAError(f"bad location cost {l!r}: {c}")

    # -- queries

    def invariant(self, loc) -> Guard:
        return self.invariants.get(loc, TRUE)

    def outgoing(self, loc) -> tuple[Edge, ...]:
        return self._out[loc]

    def cost_of(self, loc) -> int:
        return self.location_costs.get(loc, 0)

    @property
    def final_locations(self) -> frozenset:
        return frozenset(self.locations) if self.final is None else self.final

    @property
    def is_priced(self) -> bool:
        return bool(self.location_costs) or any(e.cost for e in self.edges)

    def constants(self) -> list[Fraction]:
        out = [a.const for e in self.edges for a in e.guard.atoms]
        out += [a.const for g in self.invariants.values() for a in g.atoms]
        return out

    def max_constants(self) -> dict[str, Fraction]:
        """Largest constant compared against each clock (0 if none)."""
        k = {x: Fraction(0) for x in self.clocks}
        for g in [e.guard for e in self.edges] + list(self.invariants.values()):
            for a in g.atoms:
                k[a.clock] = max(k[a.clock], a.const)
        return k

    def granularity(self) -> int:
        """Least m such that every constant is a multiple of 1/m."""
        m = 1
        for c in self.constants():
            m = _lcm(m, c.denominator)
        return m

    def replace(self, **changes) -> "TimedAutomaton":
        fields = dict(name=self.name, locations=self.locations, initial=self.initial,
                      clocks=self.clocks, events=self.events, edges=self.edges,
                      invariants=self.invariants, final=self.final,
                      repeated=self.repeated, location_costs=self.location_costs)
        fields.update(changes)
        return TimedAutomaton(**fields)

    def __repr__(self):
        return (f"TimedAutomaton({self.name!r}, {len(self.locations)} locations, "
                f"{len(self.edges)} edges, clocks={list(self.clocks)})")


def _lcm(a: int, b: int) -> int:
    from math import gcd
    return a * b // gcd(a, b)


# --------------------------------------------------------------------------
# runs

@dataclass(frozen=True)
class State:
    loc: Location
    valuation: Mapping[str, Fraction]

    def __str__(self):
        vals = ", ".join(f"{x}={fmt(t)}" for x, t in sorted(self.valuation.items()))
        return f"({fmt_location(self.loc)}, {{{vals}}})"


Move = Union[Fraction, Edge]


@dataclass(frozen=True)
class Run:
    """Alternating states and moves: ``states[i] --moves[i]--> states[i+1]``."""

    states: tuple[State, ...]
    moves: tuple[Move, ...]

    @property
    def last(self) -> State:
        return self.states[-1]

    @property
    def duration(self) -> Fraction:
        return sum((m for m in self.moves if not isinstance(m, Edge)), Fraction(0))

    def edges(self) -> list[Edge]:
        return [m for m in self.moves if isinstance(m, Edge)]

    def word(self) -> TimedWord:
        """The full timed word including tau and fault letters."""
        delays, events = [Fraction(0)], []
        for m in self.moves:
            if isinstance(m, Edge):
                events.append(m.label)
                delays.append(Fraction(0))
            else:
                delays[-1] += m
        return TimedWord(tuple(delays), tuple(events))

    def trace(self) -> TimedWord:
        """tr(run): the word with tau and fault erased."""
        w = self.word()
        return w.project(set(w.events) - RESERVED_LABELS)

    def fault_time(self) -> Fraction | None:
        """Global time of the first fault move, or None."""
        t = Fraction(0)
        for m in self.moves:
            if isinstance(m, Edge):
                if m.label == FAULT:
                    return t
            else:
                t += m
        return None

    def time_after_fault(self) -> Fraction | None:
        t = self.fault_time()
        return None if t is None else self.duration - t

    def to_json(self) -> list[dict]:
        rows = [{"loc": fmt_location(self.states[0].loc),
                 "val": {x: fmt(t) for x, t in sorted(self.states[0].valuation.items())}}]
        for m, s in zip(self.moves, self.states[1:]):
            step = f"edge {m}" if isinstance(m, Edge) else f"delay {fmt(m)}"
            rows.append({"loc": fmt_location(s.loc),
                         "val": {x: fmt(t) for x, t in sorted(s.valuation.items())},
                         "step": step})
        return rows

    def __str__(self):
        out = [str(self.states[0])]
        for m, s in zip(self.moves, self.states[1:]):
            lab = m.label if isinstance(m, Edge) else fmt(m)
            out.append(f"-{lab}-> {s}")
        return " ".join(out)


def simulate(A: TimedAutomaton, moves: Sequence, start: State | None = None) -> Run:
    """Replay ``moves`` (delays and edges of ``A``) checking every step.

    Consecutive delays are allowed. Raises :class:`InvalidRun` on the first
    violated invariant or guard.
    """
    state = start or State(A.initial, zero(A.clocks))
    if not A.invariant(state.loc).holds(state.valuation):
        raise InvalidRun(f"initial state {state} violates its invariant")
    states, norm = [state], []
    for i, m in enumerate(moves):
        if isinstance(m, Edge):
            if m.source != state.loc:
                raise InvalidRun(f"move {i}: edge {m} does not leave {fmt_location(state.loc)}")
            if m not in A.outgoing(state.loc):
                raise InvalidRun(f"move {i}: {m} is not an edge of {A.name}")
            if not m.guard.holds(state.valuation):
                raise InvalidRun(f"move {i}: guard {m.guard} false in {state}")
            v = reset(state.valuation, m.reset)
            if not A.invariant(m.target).holds(v):
                raise InvalidRun(f"move {i}: target invariant violated after {m}")
            state = State(m.target, v)
            norm.append(m)
        else:
            d = as_fraction(m)
            v = delay(state.valuation, d)
            # invariants are upper bounds: checking the end point suffices
            if not A.invariant(state.loc).holds(v):
                raise InvalidRun(f"move {i}: delay {fmt(d)} violates invariant "
                                 f"{A.invariant(state.loc)} in {fmt_location(state.loc)}")
            state = State(state.loc, v)
            norm.append(d)
        states.append(state)
    return Run(tuple(states), tuple(norm))


def validate_run(A: TimedAutomaton, run: Run) -> bool:
    """True iff replaying the run's moves reproduces its states exactly."""
    try:
        replay = simulate(A, run.moves, run.states[0])
    except InvalidRun:
        return False
    return all(a.loc == b.loc and dict(a.valuation) == dict(b.valuation)
               for a, b in zip(replay.states, run.states)) and len(replay.states) == len(run.states)


def random_run(A: TimedAutomaton, rng, steps: int, step: Fraction = Fraction(1, 2),
               max_delay: int = 4) -> Run:
    """Sample a run alternating grid delays and enabled edges.

    Delays are multiples of ``step`` no larger than ``max_delay``; a delay that
    would break the invariant is shortened to the largest one that does not.
    """
    state = State(A.initial, zero(A.clocks))
    moves: list = []
    for _ in range(steps):
        choices = [k * step for k in range(int(max_delay / step) + 1)]
        rng.shuffle(choices)
        for d in choices:
            if A.invariant(state.loc).holds(delay(state.valuation, d)):
                break
        else:
            d = Fraction(0)
        if d:
            moves.append(d)
            state = State(state.loc, delay(state.valuation, d))
        enabled = [e for e in A.outgoing(state.loc)
                   if e.guard.holds(state.valuation)
                   and A.invariant(e.target).holds(reset(state.valuation, e.reset))]
        if not enabled:
            continue
        e = rng.choice(enabled)
        moves.append(e)
        state = State(e.target, reset(state.valuation, e.reset))
    return simulate(A, moves)
