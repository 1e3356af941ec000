"""Regions of clock valuations and the region graph of a timed automaton.

A :class:`RegionSpace` fixes the clocks, a per-clock maximal constant and a
scale ``m``; valuations are read in units of ``1/m`` so that every region
boundary is an integer. A region is stored as two tuples, one entry per
clock: the integer part and the rank of the fractional part (0 for an
integral value, 1..k for the k distinct positive fractional parts in
increasing order, -1 once the clock exceeds its maximal constant).
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import chain, combinations
from math import floor
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

from .core import (TAU, Atom, Edge, Guard, TAError, TimedAutomaton, fmt,
                   fmt_location, simulate, Run, _lcm)

logger = logging.getLogger(__name__)

ABOVE = -1


class Region(NamedTuple):
    ints: tuple[int, ...]
    ranks: tuple[int, ...]


def _dense(ranks: Sequence[int]) -> tuple[int, ...]:
    pos = sorted({r for r in ranks if r > 0})
    ren = {r: i + 1 for i, r in enumerate(pos)}
    return tuple(ren.get(r, r) for r in ranks)


class RegionSpace:
    """Regions over ``clocks`` with maximal constants ``bounds`` (real units)."""

    def __init__(self, clocks: Sequence[str], bounds: Mapping[str, Fraction] | None = None,
                 scale: int = 1):
        self.clocks = tuple(clocks)
        self.scale = int(scale)
        self.index = {x: i for i, x in enumerate(self.clocks)}
        bounds = bounds or {}
        kb = []
        for x in self.clocks:
            b = Fraction(bounds.get(x, 0)) * self.scale
            if b.denominator != 1:
                raise TAError(f"bound of {x} is not a multiple of 1/{self.scale}")
            kb.append(int(b))
        self.bounds = tuple(kb)

    @classmethod
    def for_automaton(cls, A: TimedAutomaton, scale: int | None = None,
                      extra: Mapping[str, Fraction] | None = None) -> "RegionSpace":
        m = A.granularity()
        if scale is not None:
            m = _lcm(m, scale)
        bounds = A.max_constants()
        for x, b in (extra or {}).items():
            bounds[x] = max(bounds.get(x, 0), Fraction(b))
        return cls(A.clocks, bounds, m)

    def __repr__(self):
        return f"RegionSpace({list(self.clocks)}, bounds={list(self.bounds)}, scale={self.scale})"

    # -- construction

    def zero(self) -> Region:
        n = len(self.clocks)
        return Region((0,) * n, (0,) * n)

    def region_of(self, v: Mapping[str, Fraction]) -> Region:
        ints, fracs = [], []
        for x, b in zip(self.clocks, self.bounds):
            u = Fraction(v[x]) * self.scale
            if u < 0:
                raise TAError(f"negative clock value {x}={u}")
            if u > b:
                ints.append(b + 1)
                fracs.append(None)
            else:
                n = floor(u)
                ints.append(n)
                fracs.append(u - n)
        pos = sorted({f for f in fracs if f})
        rank = {f: i + 1 for i, f in enumerate(pos)}
        ranks = tuple(ABOVE if f is None else (rank[f] if f else 0) for f in fracs)
        return Region(tuple(ints), ranks)

    def time_successor(self, r: Region) -> Region | None:
        """The next region reached by letting time elapse; None if maximal."""
        ints, ranks = list(r.ints), list(r.ranks)
        bounded = [i for i, k in enumerate(ranks) if k != ABOVE]
        if not bounded:
            return None
        integral = [i for i in bounded if ranks[i] == 0]
        if integral:
            for i in bounded:
                if ranks[i] > 0:
                    ranks[i] += 1
            for i in integral:
                if ints[i] == self.bounds[i]:
                    ints[i], ranks[i] = self.bounds[i] + 1, ABOVE
                else:
                    ranks[i] = 1
        else:
            top = max(ranks[i] for i in bounded)
            for i in bounded:
                if ranks[i] == top:
                    ints[i] += 1
                    ranks[i] = 0
        return Region(tuple(ints), _dense(ranks))

    def reset(self, r: Region, clocks: Iterable[str]) -> Region:
        ints, ranks = list(r.ints), list(r.ranks)
        for x in clocks:
            i = self.index[x]
            ints[i], ranks[i] = 0, 0
        return Region(tuple(ints), _dense(ranks))

    def is_maximal(self, r: Region) -> bool:
        return all(k == ABOVE for k in r.ranks)

    # -- constraints

    def _scaled(self, a: Atom) -> int:
        c = a.const * self.scale
        if c.denominator != 1:
            raise TAError(f"constant of {a} is finer than granularity 1/{self.scale}")
        return int(c)

    def satisfies_atom(self, r: Region, a: Atom) -> bool:
        i = self.index[a.clock]
        c = self._scaled(a)
        if c > self.bounds[i]:
            raise TAError(f"constant of {a} exceeds the bound of {a.clock}")
        n, k = r.ints[i], r.ranks[i]
        op = a.op
        if k == ABOVE:
            return op in (">", ">=")
        if k == 0:
            return Atom(a.clock, op, c).holds(Fraction(n))
        # n < value < n+1
        if op in ("<", "<="):
            return n + 1 <= c
        if op in (">", ">="):
            return n >= c
        return False

    def satisfies(self, r: Region, g: Guard) -> bool:
        return all(self.satisfies_atom(r, a) for a in g.atoms)

    # -- concrete points

    def sample(self, r: Region) -> dict[str, Fraction]:
        """A valuation inside ``r`` (fractional parts spread evenly)."""
        k = max((x for x in r.ranks if x > 0), default=0)
        out = {}
        for x, n, rk, b in zip(self.clocks, r.ints, r.ranks, self.bounds):
            if rk == ABOVE:
                u = Fraction(b + 1)
            else:
                u = n + Fraction(rk, k + 1)
            out[x] = u / self.scale
        return out

    def contains(self, r: Region, v: Mapping[str, Fraction]) -> bool:
        return self.region_of(v) == r

    def delay_to_successor(self, v: Mapping[str, Fraction]) -> Fraction | None:
        """A delay taking ``v`` exactly into the time successor of its region."""
        fracs = []
        has_integral = False
        for x, b in zip(self.clocks, self.bounds):
            u = Fraction(v[x]) * self.scale
            if u > b:
                continue
            f = u - floor(u)
            if f:
                fracs.append(f)
            else:
                has_integral = True
        if not fracs and not has_integral:
            return None
        top = max(fracs, default=Fraction(0))
        d = (1 - top) / 2 if has_integral else 1 - top
        return d / self.scale

    # -- views

    def subspace(self, clocks: Sequence[str]) -> "RegionSpace":
        sp = RegionSpace.__new__(RegionSpace)
        sp.clocks = tuple(clocks)
        sp.scale = self.scale
        sp.index = {x: i for i, x in enumerate(sp.clocks)}
        sp.bounds = tuple(self.bounds[self.index[x]] for x in sp.clocks)
        return sp

    def project(self, r: Region, sub: "RegionSpace") -> Region:
        idx = [self.index[x] for x in sub.clocks]
        return Region(tuple(r.ints[i] for i in idx), _dense([r.ranks[i] for i in idx]))

    def all_regions(self) -> list[Region]:
        """Every region of the space, in breadth-first order from zero."""
        subsets = [frozenset(c) for c in chain.from_iterable(
            combinations(self.clocks, k) for k in range(1, len(self.clocks) + 1))]
        start = self.zero()
        seen, order = {start}, [start]
        todo = deque([start])
        while todo:
            r = todo.popleft()
            nxt = [self.time_successor(r)] + [self.reset(r, s) for s in subsets]
            for s in nxt:
                if s is not None and s not in seen:
                    seen.add(s)
                    order.append(s)
                    todo.append(s)
        return order

    def _const(self, n: int) -> str:
        return fmt(Fraction(n, self.scale))

    def to_guard(self, r: Region) -> Guard:
        """The constraint defining ``r``; needs at most one nonintegral clock."""
        if sum(1 for k in r.ranks if k > 0) > 1:
            raise TAError("region with several fractional clocks needs diagonal constraints")
        atoms = []
        for x, n, k, b in zip(self.clocks, r.ints, r.ranks, self.bounds):
            if k == ABOVE:
                atoms.append(Atom(x, ">", Fraction(b, self.scale)))
            elif k == 0:
                atoms.append(Atom(x, "=", Fraction(n, self.scale)))
            else:
                atoms.append(Atom(x, ">", Fraction(n, self.scale)))
                atoms.append(Atom(x, "<", Fraction(n + 1, self.scale)))
        return Guard(tuple(atoms))

    def describe(self, r: Region) -> str:
        if not self.clocks:
            return "true"
        parts = []
        for x, n, k, b in zip(self.clocks, r.ints, r.ranks, self.bounds):
            if k == ABOVE:
                parts.append(f"{x}>{self._const(b)}")
            elif k == 0:
                parts.append(f"{x}={self._const(n)}")
            else:
                parts.append(f"{self._const(n)}<{x}<{self._const(n + 1)}")
        groups: dict[int, list[str]] = {}
        for x, k in zip(self.clocks, r.ranks):
            if k > 0:
                groups.setdefault(k, []).append(x)
        chain_ = [groups[k] for k in sorted(groups)]
        if sum(len(g) for g in chain_) > 1:
            txt = "<".join("=".join(f"frac({x})" for x in g) for g in chain_)
            parts.append(txt)
        return ", ".join(parts)


# module-level forms of the region operations

def region_of(v: Mapping[str, Fraction], K, scale: int = 1) -> tuple[RegionSpace, Region]:
    """Region of ``v`` with maximal constant ``K`` (an int or per-clock map)."""
    bounds = K if isinstance(K, Mapping) else {x: K for x in v}
    sp = RegionSpace(sorted(v), bounds, scale)
    return sp, sp.region_of(v)


def time_successor(space: RegionSpace, r: Region) -> Region | None:
    return space.time_successor(r)


def discrete_successor(space: RegionSpace, r: Region, edge: Edge) -> Region:
    if not space.satisfies(r, edge.guard):
        raise TAError(f"guard {edge.guard} does not hold in region {space.describe(r)}")
    return space.reset(r, edge.reset)


# --------------------------------------------------------------------------
# region graph

RState = tuple  # (location, Region)


def region_successors(A: TimedAutomaton, space: RegionSpace, state: RState
                      ) -> Iterator[tuple[object, RState]]:
    """Time-successor (labelled ``tau``) and discrete successors of a state."""
    loc, r = state
    nxt = space.time_successor(r)
    if nxt is not None and space.satisfies(nxt, A.invariant(loc)):
        yield TAU, (loc, nxt)
    for e in A.outgoing(loc):
        if space.satisfies(r, e.guard):
            r2 = space.reset(r, e.reset)
            if space.satisfies(r2, A.invariant(e.target)):
                yield e, (e.target, r2)


@dataclass
class RegionGraph:
    automaton: TimedAutomaton
    space: RegionSpace
    states: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)      # (src, label, dst); label is TAU or an Edge
    succ: list = field(default_factory=list)
    annotations: dict = field(default_factory=dict)

    initial = 0

    def __len__(self):
        return len(self.states)

    def is_final(self, i: int) -> bool:
        return self.states[i][0] in self.automaton.final_locations

    def is_repeated(self, i: int) -> bool:
        return self.states[i][0] in self.automaton.repeated

    def label(self, i: int) -> str:
        loc, r = self.states[i]
        return f"{fmt_location(loc)} | {self.space.describe(r)}"

    def paths(self, length: int) -> Iterator[list]:
        """All paths from the initial state with exactly ``length`` edges,
        as lists of ``(label, target index)``."""
        def go(i, depth, acc):
            if depth == length:
                yield list(acc)
                return
            for lab, j in self.succ[i]:
                acc.append((lab, j))
                yield from go(j, depth + 1, acc)
                acc.pop()
        yield from go(self.initial, 0, [])

    def concretize(self, path: Sequence[tuple]) -> Run:
        """A timed run of the automaton following the region path."""
        return concretize(self.automaton, self.space, [(lab, self.states[j]) for lab, j in path])

    def trace_path(self, run: Run) -> list[tuple]:
        """The region path followed by a concrete run (raises if absent)."""
        return run_to_path(self, run)


def build_region_graph(A: TimedAutomaton, scale: int | None = None,
                       space: RegionSpace | None = None,
                       max_states: int | None = None) -> RegionGraph:
    space = space or RegionSpace.for_automaton(A, scale)
    init = (A.initial, space.zero())
    if not space.satisfies(init[1], A.invariant(A.initial)):
        raise TAError("the initial state violates its invariant")
    g = RegionGraph(A, space)
    g.states.append(init)
    g.index[init] = 0
    g.succ.append([])
    todo = deque([0])
    while todo:
        i = todo.popleft()
        for lab, s in region_successors(A, space, g.states[i]):
            j = g.index.get(s)
            if j is None:
                j = len(g.states)
                if max_states is not None and j >= max_states:
                    raise TAError(f"region graph exceeds {max_states} states")
                g.index[s] = j
                g.states.append(s)
                g.succ.append([])
                todo.append(j)
            g.edges.append((i, lab, j))
            g.succ[i].append((lab, j))
    logger.debug("region graph of %s: %d states, %d edges", A.name, len(g.states), len(g.edges))
    return g


def concretize(A: TimedAutomaton, space: RegionSpace, path: Sequence[tuple]) -> Run:
    """Turn ``[(label, (loc, region)), ...]`` from the initial state into a run.

    Each tau step delays just enough to enter the successor region, so every
    intermediate valuation lies in the region named by the path.
    """
    v = {x: Fraction(0) for x in A.clocks}
    r = space.zero()
    moves: list = []
    pending = Fraction(0)
    for lab, (loc, target) in path:
        if lab == TAU:
            d = space.delay_to_successor(v)
            if d is None:
                raise TAError("tau step from a maximal region")
            v = {x: t + d for x, t in v.items()}
            pending += d
        else:
            if pending:
                moves.append(pending)
                pending = Fraction(0)
            moves.append(lab)
            v = {x: (Fraction(0) if x in lab.reset else t) for x, t in v.items()}
        r = space.region_of(v)
        if r != target:
            raise TAError(f"concretization left the path: {space.describe(r)} "
                          f"instead of {space.describe(target)}")
    if pending:
        moves.append(pending)
    return simulate(A, moves)


def run_to_path(g: RegionGraph, run: Run) -> list[tuple]:
    """Map a concrete run onto a region-graph path ``[(label, index), ...]``."""
    sp = g.space
    state = (run.states[0].loc, sp.region_of(run.states[0].valuation))
    i = g.index[state]
    out = []
    for m, s in zip(run.moves, run.states[1:]):
        target = (s.loc, sp.region_of(s.valuation))
        if isinstance(m, Edge):
            step = [(lab, j) for lab, j in g.succ[i] if lab == m and g.states[j] == target]
            if not step:
                raise TAError(f"edge {m} has no region-graph counterpart")
            out.append(step[0])
            i = step[0][1]
        else:
            while g.states[i] != target:
                step = [(lab, j) for lab, j in g.succ[i] if lab == TAU]
                if not step:
                    raise TAError("delay leaves the region graph")
                out.append(step[0])
                i = step[0][1]
    return out


def size_bound(A: TimedAutomaton) -> int:
    """|L| * |X|! * 2^|X| * K^|X| with K the largest constant of A."""
    from math import factorial
    K = max((c for c in A.constants()), default=0)
    n = len(A.clocks)
    return int(len(A.locations) * factorial(n) * 2 ** n * Fraction(K) ** n)


def classical_size_bound(A: TimedAutomaton) -> int:
    """|L| * |X|! * 4^|X| * (K+1)^|X|, valid for any number of clocks."""
    from math import factorial
    m = A.granularity()
    K = max((c * m for c in A.constants()), default=0)
    n = len(A.clocks)
    return int(len(A.locations) * factorial(n) * 4 ** n * (K + 1) ** n)


def to_dot(g: RegionGraph) -> str:
    lines = ["digraph RG {", "  rankdir=LR;", "  node [shape=box, fontsize=10];"]
    for i in range(len(g.states)):
        shape = ', peripheries=2' if i == g.initial else ''
        extra = g.annotations.get(i)
        lab = g.label(i) + (f"\\n{','.join(sorted(extra))}" if extra else "")
        lines.append(f'  s{i} [label="{_esc(lab)}"{shape}];')
    for i, lab, j in g.edges:
        if lab == TAU:
            lines.append(f'  s{i} -> s{j} [style=dashed, label="tau"];')
        else:
            lines.append(f'  s{i} -> s{j} [label="{_esc(lab.label)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _esc(s: str) -> str:
    return s.replace('"', r'\"')
