"""Priced runs and mean cost of priced timed automata.

The long-run mean cost (cost per time unit) is obtained on the corner-point
abstraction: each region is refined by the corners of its closure, time moves
diagonally from corner to corner, and the optimal mean cost is the best
weight/time ratio of a reachable cycle. Weights and times are integers in
units of ``1/scale``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import TAU, Edge, Run, TAError, TimedAutomaton, fmt, fmt_location
from .region import ABOVE, Region, RegionSpace

logger = logging.getLogger(__name__)


class ZenoCycleError(TAError):
    """A cycle without elapsed time accumulates positive cost."""


class NoTimeCycleError(TAError):
    """No reachable cycle lets time elapse, so the mean cost is undefined."""


def run_cost(run: Run, A: TimedAutomaton) -> tuple[Fraction, Fraction]:
    """``(cost, duration)``: location rates times delays plus edge costs."""
    cost = Fraction(0)
    for m, s in zip(run.moves, run.states):
        if isinstance(m, Edge):
            cost += m.cost
        else:
            cost += A.cost_of(s.loc) * m
    return cost, run.duration


def mean_cost(run: Run, A: TimedAutomaton) -> Fraction | None:
    """Cost per time unit; None for runs of duration 0."""
    c, d = run_cost(run, A)
    return None if d == 0 else c / d


# --------------------------------------------------------------------------
# corner-point abstraction

def corners(space: RegionSpace, r: Region) -> list[tuple]:
    """Integer points (scaled) of the closure of ``r``; ``None`` above the bound.

    Corner ``j`` raises the ``j`` clock classes with the largest fractional
    parts to the next integer, so consecutive corners lie along the diagonal.
    """
    k = max((q for q in r.ranks if q > 0), default=0)
    out = []
    for j in range(k + 1):
        c = []
        for n, q in zip(r.ints, r.ranks):
            if q == ABOVE:
                c.append(None)
            elif q > k - j:
                c.append(n + 1)
            else:
                c.append(n)
        out.append(tuple(c))
    return out


def _project(space: RegionSpace, r: Region, c: tuple) -> tuple:
    return tuple(None if q == ABOVE else v for v, q in zip(c, r.ranks))


@dataclass
class CornerPointGraph:
    automaton: TimedAutomaton
    space: RegionSpace
    nodes: list = field(default_factory=list)          # (loc, region, corner)
    index: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)          # (u, v, weight, time, label)

    def __len__(self):
        return len(self.nodes)

    def label(self, i: int) -> str:
        loc, r, c = self.nodes[i]
        pt = ",".join("*" if v is None else fmt(Fraction(v, self.space.scale)) for v in c)
        return f"{fmt_location(loc)} | {self.space.describe(r)} | ({pt})"


def corner_point_graph(A: TimedAutomaton, scale: int | None = None,
                       max_nodes: int | None = None) -> CornerPointGraph:
    """Reachable corner-point graph; weights scaled so that ratios are costs per time unit."""
    sp = RegionSpace.for_automaton(A, scale)
    m = sp.scale
    g = CornerPointGraph(A, sp)
    r0 = sp.zero()
    start = (A.initial, r0, corners(sp, r0)[0])
    g.nodes.append(start)
    g.index[start] = 0
    todo = [0]

    def node(s) -> int:
        i = g.index.get(s)
        if i is None:
            i = len(g.nodes)
            if max_nodes is not None and i >= max_nodes:
                raise TAError(f"corner-point graph exceeds {max_nodes} nodes")
            g.index[s] = i
            g.nodes.append(s)
            todo.append(i)
        return i

    while todo:
        i = todo.pop()
        loc, r, c = g.nodes[i]
        cs = corners(sp, r)
        # time elapsing inside an open region: from the lowest to the highest corner
        if not any(q == 0 for q in r.ranks) and c == cs[0]:
            g.edges.append((i, node((loc, r, cs[-1])), A.cost_of(loc), 1, TAU))
        nxt = sp.time_successor(r)
        if nxt is not None and sp.satisfies(nxt, A.invariant(loc)):
            c2 = _project(sp, nxt, c)
            if c2 in corners(sp, nxt):
                g.edges.append((i, node((loc, nxt, c2)), 0, 0, TAU))
        for e in A.outgoing(loc):
            if not sp.satisfies(r, e.guard):
                continue
            r2 = sp.reset(r, e.reset)
            if not sp.satisfies(r2, A.invariant(e.target)):
                continue
            c2 = tuple(0 if x in e.reset else v for x, v in zip(sp.clocks, c))
            assert c2 in corners(sp, r2)
            g.edges.append((i, node((e.target, r2, c2)), m * e.cost, 0, e))
    # maximal regions are absorbing; their time loop is the diagonal self-loop above
    logger.debug("corner-point graph of %s: %d nodes, %d edges", A.name, len(g.nodes), len(g.edges))
    return g


# --------------------------------------------------------------------------
# optimal cycle ratio

def _positive_cycle(n: int, edges: Sequence[tuple], weight) -> list[int] | None:
    """Indices of the edges of some cycle with positive total ``weight``, or None.

    Bellman-Ford for longest paths from a virtual source joined to every node.
    """
    dist = [0] * n
    pred: list = [None] * n
    changed = -1
    for _ in range(n):
        changed = -1
        for k, e in enumerate(edges):
            u, v = e[0], e[1]
            d = dist[u] + weight(e)
            if d > dist[v]:
                dist[v] = d
                pred[v] = k
                changed = v
        if changed < 0:
            return None
    # walk back n steps to land on a cycle of the predecessor graph
    v = changed
    for _ in range(n):
        v = edges[pred[v]][0]
    cycle, u = [], v
    while True:
        k = pred[u]
        cycle.append(k)
        u = edges[k][0]
        if u == v:
            break
    cycle.reverse()
    return cycle


def _sccs_nontrivial(n: int, edges: Sequence[tuple]) -> list[int]:
    """Edges lying inside a strongly connected component (those can be on a cycle)."""
    import networkx as nx
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    G.add_edges_from((e[0], e[1]) for e in edges)
    comp = {}
    for k, scc in enumerate(nx.strongly_connected_components(G)):
        for v in scc:
            comp[v] = k
    return [i for i, e in enumerate(edges) if comp[e[0]] == comp[e[1]]]


def max_ratio_cycle(n: int, edges: Sequence[tuple]) -> tuple[Fraction, list[int]]:
    """Maximum of ``sum(weight)/sum(time)`` over cycles with positive time.

    ``edges`` are ``(u, v, weight, time, ...)`` with integer weights and
    nonnegative integer times. Returns the ratio and the edge indices of an
    optimal cycle. Raises :class:`ZenoCycleError` if a zero-time cycle has
    positive weight and :class:`NoTimeCycleError` if no cycle takes time.
    """
    keep = _sccs_nontrivial(n, edges)
    sub = [edges[i] for i in keep]
    zeno = _positive_cycle(n, [e for e in sub if e[3] == 0], lambda e: e[2])
    if zeno is not None:
        raise ZenoCycleError("a cycle taking no time has positive cost")
    lam = Fraction(-sum(abs(e[2]) for e in sub) - 1)
    best = None
    while True:
        p, q = lam.numerator, lam.denominator
        cyc = _positive_cycle(n, sub, lambda e: q * e[2] - p * e[3])
        if cyc is None:
            break
        w = sum(sub[k][2] for k in cyc)
        t = sum(sub[k][3] for k in cyc)
        assert t > 0
        lam, best = Fraction(w, t), cyc
    if best is None:
        raise NoTimeCycleError("no reachable cycle lets time elapse")
    return lam, [keep[k] for k in best]


def _mean_cost(A: TimedAutomaton, maximize: bool, scale=None):
    g = corner_point_graph(A, scale)
    edges = g.edges if maximize else [(u, v, -w, t, l) for u, v, w, t, l in g.edges]
    val, cyc = max_ratio_cycle(len(g), edges)
    return (val if maximize else -val), [g.edges[k] for k in cyc], g


def max_mean_cost(A: TimedAutomaton, scale: int | None = None) -> Fraction:
    """Largest long-run cost per time unit over time-divergent runs."""
    return _mean_cost(A, True, scale)[0]


def min_mean_cost(A: TimedAutomaton, scale: int | None = None) -> Fraction:
    """Smallest long-run cost per time unit over time-divergent runs."""
    return _mean_cost(A, False, scale)[0]


def mean_cost_cycle(A: TimedAutomaton, maximize: bool = True, scale: int | None = None):
    """``(value, cycle)`` with the cycle as readable steps of the corner graph."""
    val, cyc, g = _mean_cost(A, maximize, scale)
    steps = []
    for u, v, w, t, lab in cyc:
        step = "delay" if not isinstance(lab, Edge) else f"edge {lab.label}"
        if not isinstance(lab, Edge) and t == 0:
            step = "region"
        steps.append({"from": g.label(u), "step": step,
                      "cost": fmt(Fraction(w, g.space.scale)),
                      "time": fmt(Fraction(t, g.space.scale))})
    return val, steps


def observer_cost(A: TimedAutomaton, obs) -> Fraction:
    """Maximal mean cost of running ``obs`` on ``A`` (costs taken from the observer)."""
    from .observer import product_obs
    return max_mean_cost(product_obs(A, obs))
