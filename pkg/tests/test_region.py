import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from conftest import load
from tadiag.core import TAU, Atom, Edge, TAError, TimedAutomaton, random_run
from tadiag.modelio import parse_guard
from tadiag.region import (ABOVE, RegionSpace, build_region_graph, classical_size_bound,
                           discrete_successor, region_of, run_to_path, size_bound,
                           time_successor, to_dot)

ONE_CLOCK = ["fig1", "two_modes", "rate_or_jump", "ab_swap", "undiag", "faultfree", "const_rate"]


def test_region_of_examples():
    sp, r = region_of({"x": F(0), "y": F(0)}, 2)
    assert r.ints == (0, 0) and r.ranks == (0, 0)
    sp, r = region_of({"x": F(3, 2), "y": F(3, 2)}, 2)
    assert r.ints == (1, 1) and r.ranks == (1, 1)
    sp, r = region_of({"x": F(5, 2)}, 2)
    assert r.ranks == (ABOVE,)
    assert sp.describe(r) == "x>2"


def test_time_successor_chain():
    sp = RegionSpace(["x"], {"x": 1})
    names = []
    r = sp.zero()
    while r is not None:
        names.append(sp.describe(r))
        r = time_successor(sp, r)
    assert names == ["x=0", "0<x<1", "x=1", "x>1"]


def test_discrete_successor():
    sp = RegionSpace(["x", "y"], {"x": 2, "y": 2})
    r = sp.region_of({"x": F(1), "y": F(0)})
    e = Edge("p", "q", "a", parse_guard("x<=2"), frozenset({"x"}))
    assert sp.describe(discrete_successor(sp, r, e)) == "x=0, y=0"
    r = sp.region_of({"x": F(1, 2), "y": F(3, 2)})
    e = Edge("p", "q", "a", reset=frozenset({"y"}))
    assert sp.describe(discrete_successor(sp, r, e)) == "0<x<1, y=0"
    r = sp.region_of({"x": F(3), "y": F(0)})
    with pytest.raises(TAError):
        discrete_successor(sp, r, Edge("p", "q", "a", parse_guard("x<=2")))


def test_fractional_order_is_described():
    sp = RegionSpace(["x", "y"], {"x": 2, "y": 2})
    r = sp.region_of({"x": F(1, 4), "y": F(3, 2)})
    assert sp.describe(r) == "0<x<1, 1<y<2, frac(x)<frac(y)"


def test_single_clock_no_edges():
    A = TimedAutomaton("A", ("l",), "l", ("x",), frozenset(), ())
    g = build_region_graph(A, space=RegionSpace(["x"], {"x": 1}))
    assert len(g) == 4
    assert all(lab == TAU for _, lab, _ in g.edges)


def test_clockless_graph_is_location_graph():
    A = TimedAutomaton("A", ("p", "q"), "p", (), {"a"}, (Edge("p", "q", "a"), Edge("q", "p", "a")))
    g = build_region_graph(A)
    assert len(g) == 2 and len(g.edges) == 2
    assert all(lab != TAU for _, lab, _ in g.edges)


def test_graph_is_deterministic_in_time(fig1):
    g = build_region_graph(fig1)
    for i, succ in enumerate(g.succ):
        assert sum(1 for lab, _ in succ if lab == TAU) <= 1


def test_invariants_prune(fig1):
    g = build_region_graph(fig1)
    for loc, r in g.states:
        assert g.space.satisfies(r, fig1.invariant(loc))


def test_granularity_scaling():
    sp = RegionSpace(["y"], {"y": 1}, scale=2)
    assert [sp.describe(r) for r in sp.all_regions()] == [
        "y=0", "0<y<1/2", "y=1/2", "1/2<y<1", "y=1", "y>1"]


def test_dot_export(fig1):
    text = to_dot(build_region_graph(fig1))
    assert text.startswith("digraph") and "style=dashed" in text and "l0 | x=0" in text


# -- properties

def _atoms(K, clocks):
    for x in clocks:
        for c in range(K + 1):
            for op in ("<", "<=", "=", ">=", ">"):
                yield Atom(x, op, c)


def test_partition_on_random_valuations():
    rng = random.Random(0)
    K, clocks = 2, ["x", "y"]
    sp = RegionSpace(clocks, {x: K for x in clocks})
    atoms = list(_atoms(K, clocks))
    signature = {}
    for _ in range(10_000):
        v = {x: F(rng.randint(0, 2 * (K + 1)), 2) for x in clocks}
        r = sp.region_of(v)
        sig = tuple(a.holds(v[a.clock]) for a in atoms)
        assert signature.setdefault(r, sig) == sig
        assert all(sp.satisfies_atom(r, a) == s for a, s in zip(atoms, sig))


@settings(max_examples=300)
@given(st.lists(st.fractions(0, 4, max_denominator=6), min_size=3, max_size=3),
       st.fractions(0, 2, max_denominator=6).filter(lambda d: d > 0))
def test_time_successor_is_reached_by_delay(vals, _):
    sp = RegionSpace(["x", "y", "z"], {"x": 2, "y": 3, "z": 1})
    v = dict(zip(sp.clocks, vals))
    r = sp.region_of(v)
    nxt = sp.time_successor(r)
    d = sp.delay_to_successor(v)
    if nxt is None:
        assert d is None
    else:
        assert sp.region_of({x: t + d for x, t in v.items()}) == nxt
        # nothing in between
        mid = {x: t + d / 2 for x, t in v.items()}
        assert sp.region_of(mid) in (r, nxt)


@pytest.mark.parametrize("name", ONE_CLOCK)
def test_random_runs_follow_region_paths(name):
    A = load(name)
    g = build_region_graph(A)
    rng = random.Random(5)
    for _ in range(100):
        run = random_run(A, rng, 6)
        path = run_to_path(g, run)
        assert [lab for lab, _ in path if lab != TAU] == run.edges()


@pytest.mark.parametrize("name", ONE_CLOCK)
def test_region_paths_concretize(name):
    A = load(name)
    g = build_region_graph(A)
    for L in range(9):
        for p in g.paths(L):
            run = g.concretize(p)
            assert run.edges() == [lab for lab, _ in p if lab != TAU]


@pytest.mark.parametrize("name", ONE_CLOCK)
def test_classical_and_shifted_bounds_hold(name):
    from math import factorial
    A = load(name)
    n = len(build_region_graph(A))
    assert n <= classical_size_bound(A)
    K = max(A.constants(), default=0)
    k = len(A.clocks)
    assert n <= len(A.locations) * factorial(k) * 2 ** k * (K + 1) ** k
