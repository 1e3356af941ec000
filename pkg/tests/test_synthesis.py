import random
import time
from collections import deque
from fractions import Fraction as F

import pytest

from conftest import load
from oracle import brute_winning, joint_bfs, random_game
from tadiag.core import TAError, TRUE, random_run
from tadiag.observer import check_obs_diag, observe
from tadiag.synthesis import (PLAYER0, PLAYER1, Determinized, GameGraph, Move,
                              ProjectedRegionAutomaton, Resource, build_game, build_universal,
                              extract_template, game_size_bound, game_to_dot, instantiate,
                              least_policy, minimal_guards, minimal_regions, random_policy,
                              solve_safety, synthesize, template_to_dot)

MU = Resource(("y",), 2, 1)
ALL = ["fig1", "ab_swap", "undiag", "faultfree"]


@pytest.fixture(scope="module")
def fig1_game(fig1):
    t0 = time.perf_counter()
    G = build_game(fig1, 3, MU)
    elapsed = time.perf_counter() - t0
    return G, elapsed


@pytest.fixture(scope="module")
def fig1_template(fig1_game):
    G, _ = fig1_game
    return extract_template(G, solve_safety(G))


# -- resources and guards

def test_resource_validation():
    with pytest.raises(TAError):
        Resource(("y",), 1, F(2, 3))
    with pytest.raises(TAError):
        Resource(("y",), F(1, 3), F(1, 2))
    assert Resource(("y",), F(3, 2), F(1, 2)).scale == 2


def test_minimal_guards_one_clock():
    gs = [str(g) for g in minimal_guards(MU)]
    assert gs == ["y=0", "y>0 and y<1", "y=1", "y>1 and y<2", "y=2", "y>2"]


def test_minimal_guards_no_clock():
    assert minimal_guards(Resource((), 0, 1)) == [TRUE]


def test_minimal_guards_half_granularity():
    gs = [str(g) for g in minimal_guards(Resource(("y",), 1, F(1, 2)))]
    assert gs == ["y=0", "y>0 and y<1/2", "y=1/2", "y>1/2 and y<1", "y=1", "y>1"]


def test_minimal_guards_partition_the_line():
    sp = MU.space()
    regions = minimal_regions(MU)
    guards = minimal_guards(MU)
    for k in range(0, 60):
        v = {"y": F(k, 7)}
        hits = [g for g in guards if g.holds(v)]
        assert len(hits) == 1
        assert sp.to_guard(sp.region_of(v)) == hits[0]
    assert len(regions) == len(set(regions))


@pytest.mark.parametrize("events, mu, locs, edges", [
    ("ab", Resource((), 0, 1), 4, 4 * 1 * 2 * 1 * 4),
    ("a", Resource(("y",), 1, 1), 2, 2 * 4 * 1 * 2 * 2),
    ("", Resource((), 0, 1), 1, 0),
])
def test_universal_automaton_size(events, mu, locs, edges):
    U = build_universal(events, mu)
    assert len(U.locations) == locs
    assert len(U.edges) == edges
    assert U.initial == frozenset(events)


# -- projected region automaton

def test_guard_of_matches_y_part(fig1):
    P = ProjectedRegionAutomaton(fig1, 3, MU)
    det = Determinized(P)
    seen = set()
    todo = deque(det.initial(frozenset(s)) for s in ({"a"}, {"a", "b", "c"}))
    while todo and len(seen) < 60:
        D = todo.popleft()
        if D in seen:
            continue
        seen.add(D)
        for s in D:
            for (g, a), _ in P.visible(s):
                v = P.space.sample(s[2])
                assert P.yspace.region_of({"y": v["y"]}) == g
        for (g, a), post in det.visible(D).items():
            todo.append(det.answer(post, frozenset(), frozenset({"a", "b", "c"})))


def test_observer_clock_clash(fig1):
    with pytest.raises(TAError, match="clash"):
        ProjectedRegionAutomaton(fig1, 3, Resource(("x",), 1, 1))


@pytest.mark.parametrize("name", ALL)
def test_determinization_matches_subset_simulation(name):
    """Breadth-first over words of length <= 8: the lazy DFA and a direct
    subset simulation of the projected automaton reach the same sets."""
    P = ProjectedRegionAutomaton(load(name), 3, Resource(("y",), 2, 1))
    assert joint_bfs(P, 8) > 0
    det = Determinized(P)
    D = det.initial(frozenset("a"))
    assert det.step(D, Move(None, "nope")) in (None, frozenset())


# -- safety games

def _bipartite(owners, edges, bad=()):
    G = GameGraph()
    for o in owners:
        G.add(o)
    for i, j in edges:
        G.succ[i].append(((i, j), j))
    G.bad = set(bad)
    return G


def test_safety_without_bad_nodes_is_everything():
    G = _bipartite([PLAYER0, PLAYER1, PLAYER0, PLAYER1], [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert solve_safety(G) == {0, 1, 2, 3}


def test_safety_square_forced_into_bad():
    G = _bipartite([PLAYER0, PLAYER1, PLAYER1], [(0, 1), (0, 2)], bad=[1, 2])
    assert solve_safety(G) == set()


def test_safety_square_avoids_bad_round_cannot():
    # 0 -> {1 bad, 2}; 2 -> {3 (square)}; 3 -> {1} only; 2 loses through 3
    G = _bipartite([PLAYER0, PLAYER1, PLAYER1, PLAYER0, PLAYER1],
                   [(0, 1), (0, 2), (2, 3), (3, 1), (0, 4)], bad=[1])
    assert solve_safety(G) == {0, 4}


def test_safety_dead_square_is_losing():
    G = _bipartite([PLAYER0, PLAYER1, PLAYER0], [(0, 1), (1, 2)])
    assert solve_safety(G) == set()


def _is_closed(G, W):
    for i in W:
        if i in G.bad:
            return False
        succ = [j for _, j in G.succ[i]]
        if G.owner[i] == PLAYER1 and any(j not in W for j in succ):
            return False
        if G.owner[i] == PLAYER0 and not any(j in W for j in succ):
            return False
    return True


def _greatest_closed(G):
    W = set(range(len(G))) - G.bad
    while True:
        drop = {i for i in W if not _is_closed_at(G, W, i)}
        if not drop:
            return W
        W -= drop


def _is_closed_at(G, W, i):
    succ = [j for _, j in G.succ[i]]
    if G.owner[i] == PLAYER1:
        return all(j in W for j in succ)
    return any(j in W for j in succ)


@pytest.mark.parametrize("seed", range(20))
def test_safety_matches_brute_force(seed):
    rng = random.Random(seed)
    G = random_game(rng, rng.randint(3, 12), p_bad=0.25)
    W = solve_safety(G)
    assert W == brute_winning(G)
    assert _is_closed(G, W)
    assert W == _greatest_closed(G)


@pytest.mark.parametrize("name", ["ab_swap", "undiag", "faultfree"])
def test_safety_is_greatest_closed_set_on_fixtures(name):
    G = build_game(load(name), 2, Resource((), 0, 1))
    W = solve_safety(G)
    assert _is_closed(G, W)
    assert W == _greatest_closed(G)


# -- templates and observers

def test_faultfree_game_has_no_bad_and_template_is_everything():
    G = build_game(load("faultfree"), 1, MU)
    assert not G.bad
    t = extract_template(G, solve_safety(G))
    assert t.nodes == set(range(len(G)))
    obs = instantiate(t)
    assert obs.observed("n0") == frozenset()
    assert all(obs.observed(n) == frozenset() for n in obs.automaton.locations)


def test_undiagnosable_template_is_empty():
    t = synthesize(load("undiag"), 3, MU)
    assert t.empty and not t
    assert t.to_json() == {"empty": True, "rounds": [], "initial": [], "edges": []}
    with pytest.raises(TAError, match="empty"):
        instantiate(t)
    assert "empty template" in template_to_dot(t)


def test_fig1_game_size(fig1_game):
    G, elapsed = fig1_game
    assert elapsed < 60
    assert len(G.rounds) <= game_size_bound(G.meta["automaton"])
    assert G.bad and G.initial not in G.bad


def test_fig1_template_nonempty(fig1_template):
    t = fig1_template
    assert not t.empty
    assert all(c[1] in t.nodes for j in t.squares() for c in t.choices(j))
    # every winning round avoids the bad nodes
    assert not (t.nodes & t.game.bad)


def test_fig1_clockless_resource(fig1):
    # static observation of every event diagnoses, so no clock is required
    t = synthesize(fig1, 3, Resource((), 0, 1))
    assert not t.empty
    obs = instantiate(t)
    assert check_obs_diag(fig1, obs, 3).diagnosable
    assert not check_obs_diag(fig1, obs, 2, with_witness=False).diagnosable


@pytest.mark.parametrize("seed", range(10))
def test_random_instantiations_diagnose(fig1, fig1_template, seed):
    obs = instantiate(fig1_template, random_policy(random.Random(seed)))
    assert check_obs_diag(fig1, obs, 3, with_witness=False).diagnosable


def test_least_instantiation_diagnoses(fig1, fig1_template):
    obs = instantiate(fig1_template, least_policy)
    assert check_obs_diag(fig1, obs, 3).diagnosable


def _example_policy(space):
    def pick(info, choices):
        if info.event is None:
            want = {"a"}
        elif info.event == "a":
            y = space.sample(info.guard)["y"]
            want = {"b"} if y <= 2 else {"c"}
        else:
            want = {info.event}
        for c in choices:
            if c[0] == (frozenset(), frozenset(want)):
                return c
        raise AssertionError(f"answer {want} not winning at {info}")
    return pick


def test_hand_written_observer_is_in_template(fig1, fig1_template, obs2):
    obs = instantiate(fig1_template, _example_policy(MU.space()))
    assert check_obs_diag(fig1, obs, 3).diagnosable
    assert obs.observed("n0") == {"a"}
    rng = random.Random(5)
    for _ in range(200):
        w = random_run(fig1, rng, 6, step=F(1, 4)).trace()
        assert observe(obs, w) == observe(obs2, w)


def test_template_json_shape(fig1_template):
    js = fig1_template.to_json()
    assert js["empty"] is False and js["delta"] == 3
    ids = {r["id"] for r in js["rounds"]}
    assert {e["to"] for e in js["edges"]} <= ids
    assert {e["from"] for e in js["edges"]} <= ids
    assert {i["to"] for i in js["initial"]} <= ids
    assert all(set(e) == {"from", "guard", "event", "resets", "nextObs", "to"}
               for e in js["edges"])
    assert {tuple(i["nextObs"]) for i in js["initial"]} >= {("a",)}


def test_dot_exports(fig1_game, fig1_template):
    G, _ = fig1_game
    d = template_to_dot(fig1_template)
    assert d.startswith("digraph") and d.rstrip().endswith("}")
    g = game_to_dot(build_game(load("faultfree"), 1, Resource((), 0, 1)))
    assert g.startswith("digraph") and "->" in g


def test_max_nodes_guard(fig1):
    with pytest.raises(TAError, match="exceeds"):
        build_game(fig1, 3, MU, max_nodes=50)
