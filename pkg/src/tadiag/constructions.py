"""Constructions on timed automata: product, masks, fault monitor, pruning."""
from __future__ import annotations

import logging
import warnings
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .core import (FAULT, TAU, TRUE, Atom, Edge, Guard, TAError, TimedAutomaton,
                   TimedWord, fmt_location)

logger = logging.getLogger(__name__)

NONFAULTY, FAULTY, DELTA_FAULTY = 1, 2, 3


def fresh_clock(taken: Iterable[str], base: str = "z") -> str:
    taken = set(taken)
    name = base
    while name in taken:
        name += "_"
    return name


def prune(A: TimedAutomaton) -> TimedAutomaton:
    """Drop locations unreachable in the location graph (guards ignored)."""
    seen = {A.initial}
    todo = deque([A.initial])
    while todo:
        l = todo.popleft()
        for e in A.outgoing(l):
            if e.target not in seen:
                seen.add(e.target)
                todo.append(e.target)
    if len(seen) == len(A.locations):
        return A
    return _restrict_to(A, seen)


def _restrict_to(A: TimedAutomaton, keep) -> TimedAutomaton:
    keep = set(keep)
    return A.replace(
        locations=tuple(l for l in A.locations if l in keep),
        edges=tuple(e for e in A.edges if e.source in keep and e.target in keep),
        invariants={l: g for l, g in A.invariants.items() if l in keep},
        final=None if A.final is None else A.final & keep,
        repeated=A.repeated & keep,
        location_costs={l: c for l, c in A.location_costs.items() if l in keep},
    )


def product(A1: TimedAutomaton, A2: TimedAutomaton, name: str | None = None) -> TimedAutomaton:
    """Synchronized product; shared events synchronize, the rest interleave.

    ``tau`` and ``fault`` never synchronize. Only location pairs reachable in
    the location graph are built. Location costs add up; each product edge
    carries ``origin=(e1, e2)`` with ``None`` for the idle side.
    """
    common = set(A1.clocks) & set(A2.clocks)
    if common:
        raise TAError(f"product: clock sets overlap on {sorted(common)}")
    shared = A1.events & A2.events
    init = (A1.initial, A2.initial)
    locs, edges = [init], []
    seen = {init}
    todo = deque([init])

    def visit(l):
        if l not in seen:
            seen.add(l)
            locs.append(l)
            todo.append(l)

    while todo:
        l1, l2 = todo.popleft()
        for e1 in A1.outgoing(l1):
            if e1.label in shared:
                for e2 in A2.outgoing(l2):
                    if e2.label == e1.label:
                        tgt = (e1.target, e2.target)
                        edges.append(Edge((l1, l2), tgt, e1.label, e1.guard & e2.guard,
                                          e1.reset | e2.reset, e1.cost + e2.cost,
                                          origin=(e1, e2)))
                        visit(tgt)
            else:
                tgt = (e1.target, l2)
                edges.append(Edge((l1, l2), tgt, e1.label, e1.guard, e1.reset, e1.cost,
                                  origin=(e1, None)))
                visit(tgt)
        for e2 in A2.outgoing(l2):
            if e2.label not in shared:
                tgt = (l1, e2.target)
                edges.append(Edge((l1, l2), tgt, e2.label, e2.guard, e2.reset, e2.cost,
                                  origin=(None, e2)))
                visit(tgt)

    invariants = {(a, b): A1.invariant(a) & A2.invariant(b) for a, b in locs}
    final = None
    if A1.final is not None or A2.final is not None:
        final = frozenset(p for p in locs
                          if p[0] in A1.final_locations and p[1] in A2.final_locations)
    return TimedAutomaton(
        name=name or f"{A1.name}x{A2.name}",
        locations=tuple(locs),
        initial=init,
        clocks=A1.clocks + A2.clocks,
        events=A1.events | A2.events,
        edges=tuple(edges),
        invariants=invariants,
        final=final,
        repeated=frozenset(p for p in locs if p[0] in A1.repeated or p[1] in A2.repeated),
        location_costs={p: A1.cost_of(p[0]) + A2.cost_of(p[1]) for p in locs},
    )


def relabel(A: TimedAutomaton, fn: Callable[[str], str], events: Iterable[str],
            name: str | None = None) -> TimedAutomaton:
    """Rename every edge label with ``fn``; ``events`` is the new alphabet."""
    edges = tuple(Edge(e.source, e.target, fn(e.label), e.guard, e.reset, e.cost, origin=e)
                  for e in A.edges)
    return A.replace(name=name or A.name, events=frozenset(events), edges=edges)


def hide(A: TimedAutomaton, visible: Iterable[str]) -> TimedAutomaton:
    """Relabel every label outside ``visible`` (fault included) as tau."""
    visible = frozenset(visible)
    return relabel(A, lambda a: a if a in visible else TAU, A.events & visible)


def rename_clocks(A: TimedAutomaton, mapping: Mapping[str, str]) -> TimedAutomaton:
    def g(guard: Guard) -> Guard:
        return Guard(tuple(Atom(mapping.get(a.clock, a.clock), a.op, a.const)
                           for a in guard.atoms))

    edges = tuple(Edge(e.source, e.target, e.label, g(e.guard),
                       frozenset(mapping.get(x, x) for x in e.reset), e.cost, origin=e)
                  for e in A.edges)
    return A.replace(clocks=tuple(mapping.get(x, x) for x in A.clocks), edges=edges,
                     invariants={l: g(inv) for l, inv in A.invariants.items()})


def restrict_nonfaulty(A: TimedAutomaton) -> TimedAutomaton:
    """Delete every fault edge and prune what became unreachable."""
    return prune(A.replace(edges=tuple(e for e in A.edges if e.label != FAULT)))


def build_fault_monitor(A: TimedAutomaton, delta: int, clock: str | None = None,
                        prune_unreachable: bool = True) -> TimedAutomaton:
    """Three copies of ``A`` tracking time since the first fault.

    Locations are pairs ``(l, copy)``: copy 1 before any fault, copy 2 during
    the ``delta`` time units following the first fault (clock ``z`` reset by
    the fault, invariant ``z<=delta``), copy 3 afterwards. Edges copied from
    ``A`` keep ``origin`` pointing to the original edge; the copy-2 to copy-3
    switch has ``origin=None``.
    """
    if delta < 0:
        raise TAError("delta must be nonnegative")
    z = clock or fresh_clock(A.clocks)
    if z in A.clocks:
        raise TAError(f"clock {z!r} already used by {A.name}")
    zle = Guard((Atom(z, "<=", delta),))
    locs = [(l, i) for i in (1, 2, 3) for l in A.locations]
    inv = {}
    for l in A.locations:
        inv[(l, NONFAULTY)] = A.invariant(l)
        inv[(l, FAULTY)] = A.invariant(l) & zle
        inv[(l, DELTA_FAULTY)] = A.invariant(l)
    edges = []
    for i in (1, 2, 3):
        for e in A.edges:
            if e.label == FAULT:
                if i == NONFAULTY:
                    edges.append(Edge((e.source, 1), (e.target, 2), FAULT, e.guard,
                                      e.reset | {z}, e.cost, origin=e))
                else:
                    edges.append(Edge((e.source, i), (e.target, i), FAULT, e.guard,
                                      e.reset, e.cost, origin=e))
            else:
                edges.append(Edge((e.source, i), (e.target, i), e.label, e.guard,
                                  e.reset, e.cost, origin=e))
    for l in A.locations:
        edges.append(Edge((l, 2), (l, 3), TAU, Guard((Atom(z, "=", delta),)), origin=None))
    M = TimedAutomaton(
        name=f"{A.name}({delta})",
        locations=tuple(locs),
        initial=(A.initial, 1),
        clocks=A.clocks + (z,),
        events=A.events,
        edges=tuple(edges),
        invariants=inv,
        final=None if A.final is None else frozenset((l, i) for l, i in locs if l in A.final),
        repeated=frozenset((l, i) for l, i in locs if l in A.repeated),
        location_costs={(l, i): A.cost_of(l) for l, i in locs},
    )
    return prune(M) if prune_unreachable else M


def copy_index(loc) -> int:
    """Copy number (1, 2 or 3) of a fault-monitor location."""
    return loc[1]


# --------------------------------------------------------------------------
# masks

@dataclass(frozen=True)
class Mask:
    """A relabeling of events onto ``1..n``; ``None`` stands for epsilon."""

    n: int
    mapping: Mapping[str, int | None]

    def __post_init__(self):
        object.__setattr__(self, "mapping", dict(self.mapping))
        if self.n < 0:
            raise TAError("mask size must be nonnegative")
        for a, k in self.mapping.items():
            if k is not None and not 1 <= k <= self.n:
                raise TAError(f"mask value {k} for {a!r} outside 1..{self.n}")

    @property
    def is_surjective(self) -> bool:
        return set(range(1, self.n + 1)) <= set(self.mapping.values())

    def normalized(self) -> "Mask":
        """Compact the image to ``1..n'`` keeping the order of classes."""
        if self.is_surjective:
            return self
        used = sorted({k for k in self.mapping.values() if k is not None})
        warnings.warn(f"mask is not surjective onto 1..{self.n}; compacting to 1..{len(used)}",
                      stacklevel=2)
        ren = {k: i + 1 for i, k in enumerate(used)}
        return Mask(len(used), {a: (None if k is None else ren[k])
                                for a, k in self.mapping.items()})

    def symbol(self, a: str) -> str | None:
        k = self.mapping[a]
        return None if k is None else str(k)

    @property
    def alphabet(self) -> frozenset[str]:
        return frozenset(str(k) for k in range(1, self.n + 1))

    def word(self, w: TimedWord) -> TimedWord:
        missing = set(w.events) - set(self.mapping)
        if missing:
            raise TAError(f"mask undefined on {sorted(missing)}")
        return w.rename({a: self.symbol(a) for a in set(w.events)})

    def refines(self, other: "Mask") -> bool:
        """True if self distinguishes at least what ``other`` does."""
        events = list(self.mapping)
        for a in events:
            if self.mapping[a] is None and other.mapping[a] is not None:
                return False
            for b in events:
                if (self.mapping[a] is not None and self.mapping[a] == self.mapping[b]
                        and other.mapping[a] != other.mapping[b]):
                    return False
        return True

    def to_json(self) -> dict:
        return {"n": self.n, "mask": {a: self.mapping[a] for a in sorted(self.mapping)}}

    def __str__(self):
        return ", ".join(f"{a}->{'eps' if k is None else k}" for a, k in sorted(self.mapping.items()))


def identity_mask(events: Iterable[str]) -> Mask:
    evs = sorted(events)
    return Mask(len(evs), {a: i + 1 for i, a in enumerate(evs)})


def mask_word(M: Mask, w: TimedWord) -> TimedWord:
    return M.word(w)


def apply_mask(A: TimedAutomaton, M: Mask) -> TimedAutomaton:
    """Relabel events through the mask; epsilon-mapped events become tau."""
    missing = A.events - set(M.mapping)
    if missing:
        raise TAError(f"mask undefined on {sorted(missing)}")
    M = M.normalized()

    def lab(a: str) -> str:
        if a in (TAU, FAULT):
            return a
        s = M.symbol(a)
        return TAU if s is None else s

    return relabel(A, lab, M.alphabet, name=f"{A.name}[mask]")


def describe(A: TimedAutomaton) -> str:
    lines = [f"automaton {A.name}: {len(A.locations)} locations, {len(A.edges)} edges"]
    for e in A.edges:
        lines.append("  " + str(e))
    for l, g in A.invariants.items():
        lines.append(f"  inv {fmt_location(l)}: {g}")
    return "\n".join(lines)
