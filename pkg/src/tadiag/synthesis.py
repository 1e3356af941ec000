"""Synthesis of the most permissive dynamic observer for a resource.

A resource ``mu = (Y, K, 1/m)`` fixes the observer's clocks, their largest
constant and the granularity of its guards. The construction follows the
usual game reduction:

1. the fault monitor ``A(delta)`` runs alongside the choice of the currently
   observed event set ``S``; in the product region graph an event is visible
   only if it belongs to ``S``, everything else is internal;
2. visible moves are labelled by the minimal guard (region of ``Y``) they
   happen in and the event; subset construction over internal moves yields
   a deterministic automaton whose states are the observer's knowledge;
3. the environment picks the next visible move, the observer answers with
   the clocks to reset and the next set to observe; a knowledge state mixing
   a non-faulty state with one more than ``delta`` past a fault is bad;
4. the winning region of this safety game is the template of all diagnosing
   observers; ``instantiate`` picks one.
"""
from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import chain, combinations
from typing import Callable, Iterable, Sequence

from .constructions import DELTA_FAULTY, NONFAULTY, build_fault_monitor, fresh_clock
from .core import TAU, TRUE, Edge, Guard, TAError, TimedAutomaton, _lcm
from .observer import Observer, make_observer
from .region import ABOVE, Region, RegionSpace

logger = logging.getLogger(__name__)


def _subsets(items: Iterable) -> list[frozenset]:
    """All subsets, by size then lexicographically."""
    items = sorted(items)
    return [frozenset(c) for c in chain.from_iterable(
        combinations(items, k) for k in range(len(items) + 1))]


def _key(s: frozenset) -> tuple:
    return (len(s), tuple(sorted(s)))


@dataclass(frozen=True)
class Resource:
    """Observer clocks, their largest constant and the guard granularity."""

    clocks: tuple = ()
    max_const: Fraction = Fraction(0)
    granularity: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "clocks", tuple(self.clocks))
        object.__setattr__(self, "max_const", Fraction(self.max_const))
        g = Fraction(self.granularity)
        if g <= 0 or g.numerator != 1:
            raise TAError("granularity must be of the form 1/m")
        object.__setattr__(self, "granularity", g)
        if self.max_const < 0 or (self.max_const / g).denominator != 1:
            raise TAError("the largest constant must be a nonnegative multiple of the granularity")

    @property
    def scale(self) -> int:
        return self.granularity.denominator

    def space(self) -> RegionSpace:
        return RegionSpace(self.clocks, {y: self.max_const for y in self.clocks}, self.scale)


def minimal_regions(mu: Resource) -> list[Region]:
    """The regions of granularity ``mu`` over its clocks, in canonical order."""
    sp = mu.space()
    return sorted(sp.all_regions(), key=lambda r: _region_order(sp, r))


def _region_order(sp: RegionSpace, r: Region):
    # order by the scaled position of a sample point
    v = sp.sample(r)
    return tuple(v[x] for x in sp.clocks) + tuple(r.ranks)


def minimal_guards(mu: Resource) -> list[Guard]:
    """One guard per region of granularity ``mu``.

    With more than one clock some regions need diagonal constraints, which
    guards cannot express; those raise :class:`TAError`.
    """
    sp = mu.space()
    return [sp.to_guard(r) for r in minimal_regions(mu)]


def build_universal(events: Iterable[str], mu: Resource) -> TimedAutomaton:
    """Automaton with a location per event subset and every observer move."""
    events = sorted(events)
    locs = _subsets(events)
    guards = minimal_guards(mu)
    resets = _subsets(mu.clocks)
    edges = [Edge(S, S2, a, g, R)
             for S in locs for g in guards for a in events for R in resets for S2 in locs]
    return TimedAutomaton(name="U", locations=tuple(locs), initial=frozenset(events),
                          clocks=mu.clocks, events=frozenset(events), edges=tuple(edges))


# --------------------------------------------------------------------------
# projected region automaton and its determinization

@dataclass(frozen=True)
class Move:
    """A visible move: the guard region on ``Y``, the event, the observer's answer."""

    guard: Region
    event: str
    reset: frozenset = frozenset()
    next_obs: frozenset = frozenset()


class ProjectedRegionAutomaton:
    """Region graph of ``A(delta)`` with the observed-set component.

    States are ``(q, S, r)``: monitor location, observed set and region over
    the plant clocks, the fault clock and ``Y``. Internal steps are time
    successors, tau and fault edges, and edges on events outside ``S``; the
    observer does not move on those. A visible step on ``a in S`` is labelled
    by ``Move(g, a, Y', S')`` and resets ``Y'`` on top of the plant's resets.
    """

    def __init__(self, A: TimedAutomaton, delta: int, mu: Resource):
        clash = set(A.clocks) & set(mu.clocks)
        if clash:
            raise TAError(f"observer clocks {sorted(clash)} clash with plant clocks")
        self.A, self.delta, self.mu = A, int(delta), mu
        self.events = frozenset(A.events)
        self.z = fresh_clock(set(A.clocks) | set(mu.clocks))
        self.monitor = build_fault_monitor(A, delta, clock=self.z)
        M = self.monitor
        scale = _lcm(M.granularity(), mu.scale)
        bounds = M.max_constants()
        bounds.update({y: mu.max_const for y in mu.clocks})
        self.space = RegionSpace(M.clocks + mu.clocks, bounds, scale)
        self.yspace = mu.space()
        self._ysub = self.space.subspace(mu.clocks)
        self._guard_cache: dict = {}

    # -- labels
    def guard_of(self, r: Region) -> Region:
        """The unique minimal guard (region of ``mu``) containing ``r``'s ``Y`` part."""
        ry = self.space.project(r, self._ysub)
        g = self._guard_cache.get(ry)
        if g is None:
            v = self._ysub.sample(ry)
            g = self.yspace.region_of(v)
            # the finer region must lie inside a single minimal guard
            assert self._ysub.scale % self.yspace.scale == 0
            self._guard_cache[ry] = g
        return g

    def initial_states(self) -> list[tuple]:
        r0 = self.space.zero()
        return [(self.monitor.initial, S, r0) for S in _subsets(self.events)]

    def internal(self, state) -> list[tuple]:
        q, S, r = state
        sp, M = self.space, self.monitor
        out = []
        nxt = sp.time_successor(r)
        if nxt is not None and sp.satisfies(nxt, M.invariant(q)):
            out.append((q, S, nxt))
        for e in M.outgoing(q):
            if e.label in S or not sp.satisfies(r, e.guard):
                continue
            r2 = sp.reset(r, e.reset)
            if sp.satisfies(r2, M.invariant(e.target)):
                out.append((e.target, S, r2))
        return out

    def visible(self, state) -> list[tuple[tuple, tuple]]:
        """``((g, a), (q', r'))`` before the observer's answer is applied."""
        q, S, r = state
        sp, M = self.space, self.monitor
        out = []
        for e in M.outgoing(q):
            if e.label not in S or not sp.satisfies(r, e.guard):
                continue
            r2 = sp.reset(r, e.reset)
            if sp.satisfies(r2, M.invariant(e.target)):
                out.append(((self.guard_of(r), e.label), (e.target, r2)))
        return out

    def answer(self, post: Iterable[tuple], reset: frozenset, next_obs: frozenset) -> list[tuple]:
        return [(q, next_obs, self.space.reset(r, reset)) for q, r in post]

    def moves(self, state) -> list[tuple[Move, tuple]]:
        """Every visible transition with every observer answer."""
        out = []
        for (g, a), post in self.visible(state):
            for R in _subsets(self.mu.clocks):
                for S2 in _subsets(self.events):
                    out.append((Move(g, a, R, S2), self.answer([post], R, S2)[0]))
        return out

    def closure(self, states: Iterable[tuple]) -> frozenset:
        seen = set(states)
        todo = list(seen)
        while todo:
            for t in self.internal(todo.pop()):
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        return frozenset(seen)

    def is_bad(self, states: frozenset) -> bool:
        iz = self.space.index[self.z]
        nonfaulty = late = False
        for q, _, r in states:
            c = q[1]
            if c == NONFAULTY:
                nonfaulty = True
            elif c == DELTA_FAULTY and r.ranks[iz] == ABOVE:
                late = True
            if nonfaulty and late:
                return True
        return False


class Determinized:
    """Subset construction of a :class:`ProjectedRegionAutomaton`, built lazily.

    A state is a tau-closed set of states sharing the same observed set.
    """

    def __init__(self, P: ProjectedRegionAutomaton):
        self.P = P

    def initial(self, S0: frozenset) -> frozenset:
        return self.P.closure([(self.P.monitor.initial, frozenset(S0), self.P.space.zero())])

    def observed(self, D: frozenset) -> frozenset:
        return next(iter(D))[1]

    def visible(self, D: frozenset) -> dict:
        """``{(g, a): post}`` with ``post`` the plant-side targets."""
        out: dict = {}
        for s in D:
            for lab, t in self.P.visible(s):
                out.setdefault(lab, set()).add(t)
        return {k: frozenset(v) for k, v in sorted(out.items(), key=lambda kv: _lab_order(kv[0]))}

    def answer(self, post: frozenset, reset: frozenset, next_obs: frozenset) -> frozenset:
        return self.P.closure(self.P.answer(post, reset, next_obs))

    def step(self, D: frozenset, move: Move) -> frozenset | None:
        post = self.visible(D).get((move.guard, move.event))
        if post is None:
            return None
        return self.answer(post, move.reset, move.next_obs)


def _lab_order(lab):
    g, a = lab
    return (a, g.ints, g.ranks)


# --------------------------------------------------------------------------
# safety games

PLAYER0, PLAYER1 = 0, 1


@dataclass
class GameGraph:
    """Bipartite game: Player 1 (environment) owns round nodes, Player 0 squares.

    ``succ[i]`` lists ``(label, j)``. ``info[i]`` is the payload: for a round
    node its knowledge set, for a square node a :class:`SquareInfo`.
    """

    owner: list = field(default_factory=list)
    succ: list = field(default_factory=list)
    bad: set = field(default_factory=set)
    info: list = field(default_factory=list)
    initial: int = 0
    meta: dict = field(default_factory=dict)

    def add(self, owner: int, info=None, bad: bool = False) -> int:
        self.owner.append(owner)
        self.succ.append([])
        self.info.append(info)
        if bad:
            self.bad.add(len(self.owner) - 1)
        return len(self.owner) - 1

    def __len__(self):
        return len(self.owner)

    @property
    def rounds(self) -> list[int]:
        return [i for i, o in enumerate(self.owner) if o == PLAYER1]

    @property
    def squares(self) -> list[int]:
        return [i for i, o in enumerate(self.owner) if o == PLAYER0]

    def edge_count(self) -> int:
        return sum(len(s) for s in self.succ)


@dataclass(frozen=True)
class SquareInfo:
    observed: frozenset | None      # observed set before the move (None: start)
    guard: Region | None
    event: str | None
    post: frozenset = frozenset()


def build_game(A: TimedAutomaton, delta: int, mu: Resource,
               max_nodes: int | None = None) -> GameGraph:
    P = ProjectedRegionAutomaton(A, delta, mu)
    det = Determinized(P)
    G = GameGraph()
    G.meta.update(automaton=P, delta=int(delta), resource=mu)
    answers = [(R, S) for S in _subsets(P.events) for R in _subsets(mu.clocks)]
    G.initial = G.add(PLAYER0, SquareInfo(None, None, None))
    rounds: dict = {}
    todo: deque = deque()

    def round_node(D: frozenset) -> int:
        i = rounds.get(D)
        if i is None:
            i = G.add(PLAYER1, D, P.is_bad(D))
            rounds[D] = i
            todo.append(i)
            if max_nodes is not None and len(G) > max_nodes:
                raise TAError(f"game exceeds {max_nodes} nodes")
        return i

    for S0 in _subsets(P.events):
        G.succ[G.initial].append(((frozenset(), S0), round_node(det.initial(S0))))
    while todo:
        i = todo.popleft()
        D = G.info[i]
        if i in G.bad:
            continue  # the play is lost already; no need to expand
        S = det.observed(D)
        for (g, a), post in det.visible(D).items():
            j = G.add(PLAYER0, SquareInfo(S, g, a, post))
            G.succ[i].append(((g, a), j))
            for R, S2 in answers:
                G.succ[j].append(((R, S2), round_node(det.answer(post, R, S2))))
    logger.info("game for %s: %d rounds, %d squares, %d bad", A.name,
                len(G.rounds), len(G.squares), len(G.bad))
    return G


def solve_safety(G: GameGraph) -> set[int]:
    """Player 0's winning region for avoiding ``G.bad``.

    Complement of the Player-1 attractor of the bad nodes: a round node is
    attracted if it is bad or has an attracted successor, a square node once
    all its successors are attracted.
    """
    pred: list[list[int]] = [[] for _ in G.owner]
    for i, ss in enumerate(G.succ):
        for _, j in ss:
            pred[j].append(i)
    count = [len(ss) for ss in G.succ]
    attr = set(G.bad)
    todo = deque(G.bad)
    while todo:
        j = todo.popleft()
        for i in pred[j]:
            if i in attr:
                continue
            if G.owner[i] == PLAYER1:
                attr.add(i)
                todo.append(i)
            else:
                count[i] -= 1
                if count[i] == 0:
                    attr.add(i)
                    todo.append(i)
    # a square node without choices is lost as well
    for i, ss in enumerate(G.succ):
        if G.owner[i] == PLAYER0 and not ss and i not in attr:
            attr |= _attractor_from(G, pred, count, attr, i)
    return set(range(len(G))) - attr


def _attractor_from(G, pred, count, attr, start) -> set:
    new = {start}
    todo = deque([start])
    while todo:
        j = todo.popleft()
        for i in pred[j]:
            if i in attr or i in new:
                continue
            if G.owner[i] == PLAYER1:
                new.add(i)
                todo.append(i)
            else:
                count[i] -= 1
                if count[i] == 0:
                    new.add(i)
                    todo.append(i)
    return new


# --------------------------------------------------------------------------
# templates and observers

@dataclass
class ObserverTemplate:
    """The winning part of the game: every diagnosing observer lives here."""

    game: GameGraph
    nodes: set
    initial: int | None

    @property
    def empty(self) -> bool:
        return self.initial is None

    def __bool__(self):
        return not self.empty

    def choices(self, j: int) -> list:
        """Winning answers at square ``j``: ``[((reset, next_obs), round)]``."""
        return [(c, k) for c, k in self.game.succ[j] if k in self.nodes]

    def rounds(self) -> list[int]:
        return sorted(i for i in self.nodes if self.game.owner[i] == PLAYER1)

    def squares(self) -> list[int]:
        return sorted(i for i in self.nodes if self.game.owner[i] == PLAYER0)

    def to_json(self) -> dict:
        G = self.game
        P: ProjectedRegionAutomaton = G.meta["automaton"]
        if self.empty:
            return {"empty": True, "rounds": [], "initial": [], "edges": []}
        ids = {i: n for n, i in enumerate(self.rounds())}
        rounds = [{"id": ids[i], "observe": sorted(Dobs(G.info[i])), "states": len(G.info[i])}
                  for i in self.rounds()]
        init = [{"resets": sorted(R), "nextObs": sorted(S), "to": ids[k]}
                for (R, S), k in self.choices(self.initial)]
        edges = []
        for i in self.rounds():
            for (g, a), j in G.succ[i]:
                for (R, S), k in self.choices(j):
                    edges.append({"from": ids[i], "guard": P.yspace.describe(g), "event": a,
                                  "resets": sorted(R), "nextObs": sorted(S), "to": ids[k]})
        return {"empty": False, "rounds": rounds, "initial": init, "edges": edges,
                "delta": G.meta["delta"]}


def Dobs(D: frozenset) -> frozenset:
    return next(iter(D))[1]


def extract_template(G: GameGraph, W: set) -> ObserverTemplate:
    if G.initial not in W:
        return ObserverTemplate(G, set(), None)
    keep = {G.initial}
    todo = deque([G.initial])
    while todo:
        i = todo.popleft()
        for _, j in G.succ[i]:
            if j in W and j not in keep:
                keep.add(j)
                todo.append(j)
    return ObserverTemplate(G, keep, G.initial)


def synthesize(A: TimedAutomaton, delta: int, mu: Resource,
               max_nodes: int | None = None) -> ObserverTemplate:
    G = build_game(A, delta, mu, max_nodes)
    return extract_template(G, solve_safety(G))


Policy = Callable[[SquareInfo, list], tuple]


def least_policy(info: SquareInfo, choices: list) -> tuple:
    """Smallest next observed set, then fewest resets (lexicographic ties)."""
    return min(choices, key=lambda c: (_key(c[0][1]), _key(c[0][0])))


def random_policy(rng: random.Random) -> Policy:
    def pick(info: SquareInfo, choices: list) -> tuple:
        return rng.choice(choices)
    return pick


def instantiate(template: ObserverTemplate, policy: Policy = least_policy,
                name: str = "obs") -> Observer:
    """One observer from the template, fixing an answer at every square."""
    if template.empty:
        raise TAError("the template is empty: no observer of this resource diagnoses the plant")
    G = template.game
    P: ProjectedRegionAutomaton = G.meta["automaton"]
    mu: Resource = G.meta["resource"]
    ysp = P.yspace

    def choose(j):
        options = template.choices(j)
        c = policy(G.info[j], options)
        if c not in options:
            raise TAError(f"policy chose {c[0]} outside the winning answers")
        return c

    (_, _), start = choose(template.initial)
    names: dict = {}
    order: list = []
    todo = deque([start])
    names[start] = "n0"
    order.append(start)
    edges = []
    guards = minimal_regions(mu)
    while todo:
        i = todo.popleft()
        S = Dobs(G.info[i])
        taken = set()
        for (g, a), j in G.succ[i]:
            (R, _S2), k = choose(j)
            if k not in names:
                names[k] = f"n{len(names)}"
                order.append(k)
                todo.append(k)
            edges.append(Edge(names[i], names[k], a, ysp.to_guard(g), frozenset(R)))
            taken.add((g, a))
        # moves the plant cannot make here: keep the observer in place
        for a in sorted(S):
            for g in guards:
                if (g, a) not in taken:
                    edges.append(Edge(names[i], names[i], a, ysp.to_guard(g)))
    observe = {names[i]: Dobs(G.info[i]) for i in order}
    return make_observer(name, P.events, [names[i] for i in order], "n0", observe, edges,
                         clocks=mu.clocks, scale=mu.scale)


def game_size_bound(P: ProjectedRegionAutomaton) -> int:
    """Double-exponential bound on the number of knowledge states."""
    from .region import classical_size_bound
    n = classical_size_bound(P.monitor.replace(clocks=P.space.clocks)) * 2 ** len(P.events)
    return 2 ** n


def template_to_dot(t: ObserverTemplate) -> str:
    lines = ["digraph template {", "  rankdir=LR;"]
    if t.empty:
        lines.append('  empty [shape=plaintext, label="empty template"];')
        return "\n".join(lines + ["}"])
    G = t.game
    P = G.meta["automaton"]
    for i in sorted(t.nodes):
        if G.owner[i] == PLAYER1:
            obs = ",".join(sorted(Dobs(G.info[i]))) or "-"
            lines.append(f'  v{i} [shape=circle, label="{{{obs}}}"];')
        else:
            lines.append(f'  v{i} [shape=box, label=""];')
        for lab, j in G.succ[i]:
            if j not in t.nodes:
                continue
            if G.owner[i] == PLAYER1:
                g, a = lab
                txt = f"{P.yspace.describe(g)}, {a}"
            else:
                R, S = lab
                txt = f"reset {{{','.join(sorted(R))}}}, obs {{{','.join(sorted(S))}}}"
            lines.append(f'  v{i} -> v{j} [label="{txt}"];')
    return "\n".join(lines + ["}"])


def game_to_dot(G: GameGraph) -> str:
    return template_to_dot(ObserverTemplate(G, set(range(len(G))), G.initial))
