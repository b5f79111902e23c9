from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbsched.balance import solve_balanced, verify_constraints
from bbsched.schedule import (LCM_CAP, CyclicSchedule, Multigraph,
                              ScheduleError, build_multigraph,
                              compile_balanced, compile_from_occupancies,
                              deserialize_schedule, edge_color_bipartite,
                              edge_color_heuristic, order_frames,
                              orient_frames, rationalize, serialize_schedule)
from bbsched.topology import (bfs_distances, from_edge_list, grid,
                              is_bipartite, make_topology)

F = Fraction


def path3():
    return grid((1, 3))


def assert_matchings(frames):
    for f in frames:
        nodes = [n for e in f for n in e]
        assert len(nodes) == len(set(nodes)), f


def frame_edge_counter(frames):
    c = Counter()
    for f in frames:
        for e in f:
            u, v = e if isinstance(e, tuple) else (e[0], e[1])
            c[(min(u, v), max(u, v))] += 1
    return c


# ---------------------------------------------------------------------------
# rationalize

def test_rationalize_passthrough():
    assert rationalize({(0, 1): F(1, 2)}, 64)[(0, 1)] == F(1, 2)


def test_rationalize_floors():
    assert rationalize({(0, 1): F(8, 15)}, 8)[(0, 1)] == F(1, 2)
    assert rationalize({(0, 1): F(7, 15)}, 8)[(0, 1)] == F(3, 8)


def test_rationalize_keeps_zero_and_keys():
    out = rationalize({(0, 1): F(0), (1, 2): F(1, 3)}, 4)
    assert out[(0, 1)] == 0 and set(out) == {(0, 1), (1, 2)}


def test_rationalize_never_rounds_up():
    for num in range(0, 16):
        o = rationalize({(0, 1): F(num, 15)}, 8)[(0, 1)]
        assert o <= F(num, 15) and (o.denominator in (1, 2, 4, 8))


# ---------------------------------------------------------------------------
# multigraph

def test_multigraph_path3():
    m = build_multigraph({(0, 1): F(1, 2), (1, 2): F(1, 2)}, path3())
    assert m.l == 2 and m.d_m == 2
    assert dict(m.edges) == {(0, 1): 1, (1, 2): 1}


def test_multigraph_mixed_denominators():
    m = build_multigraph({(0, 1): F(1, 2), (1, 2): F(1, 3)}, path3())
    assert m.l == 6
    assert dict(m.edges) == {(0, 1): 3, (1, 2): 2}


def test_multigraph_merges_directions():
    m = build_multigraph({(0, 1): F(1, 4), (1, 0): F(1, 4)}, grid((1, 2)))
    assert dict(m.edges) == {(0, 1): 2} and m.l == 4 and m.d_m == 2


def test_multigraph_4x4_direct_build():
    t = grid((4, 4))
    _, sol = compile_balanced(t)
    m = build_multigraph(sol.occupancies, t)
    assert m.d_m == 8 and m.l == 8


def test_multigraph_4x4_lp_vertex():
    # the solver's own optimum is sparser than the classic eight-frame one
    t = grid((4, 4))
    occ = rationalize(solve_balanced(t).occupancies, 8)
    m = build_multigraph(occ, t)
    assert m.l == 8 and m.d_m == 7


def test_multigraph_rejects_non_edge_and_overload():
    with pytest.raises(ScheduleError):
        build_multigraph({(0, 2): F(1, 2)}, path3())
    with pytest.raises(ScheduleError, match="busy"):
        build_multigraph({(0, 1): F(2, 3), (1, 2): F(2, 3)}, path3())


def test_multigraph_lcm_cap():
    primes = [3, 5, 7, 11, 13, 17, 19, 23, 29]
    t = grid((1, 10))
    occ = {(i, i + 1): F(1, primes[i]) for i in range(9)}
    with pytest.raises(ScheduleError, match="rationalize"):
        build_multigraph(occ, t)


def test_multigraph_d_m_bounded_by_l():
    t = grid((2, 2))
    occ = {(0, 1): F(1, 2), (0, 2): F(1, 2), (1, 3): F(1, 2), (2, 3): F(1, 4)}
    m = build_multigraph(occ, t)
    assert m.d_m <= m.l


# ---------------------------------------------------------------------------
# coloring

def test_bipartite_color_path3():
    t = path3()
    m = build_multigraph({(0, 1): F(1, 2), (1, 2): F(1, 2)}, t)
    _, colors = is_bipartite(t)
    frames = edge_color_bipartite(m, colors)
    assert sorted(map(sorted, frames)) == [[(0, 1)], [(1, 2)]]


def test_bipartite_color_parallel_edges():
    t = grid((1, 2))
    m = build_multigraph({(0, 1): F(3, 4)}, t)
    _, colors = is_bipartite(t)
    frames = edge_color_bipartite(m, colors)
    assert len(frames) == 3 and all(f == ((0, 1),) for f in frames)


def test_bipartite_color_4x4_uses_exactly_dm():
    t = grid((4, 4))
    _, sol = compile_balanced(t)
    m = build_multigraph(sol.occupancies, t)
    _, colors = is_bipartite(t)
    frames = edge_color_bipartite(m, colors)
    assert len(frames) == m.d_m == 8
    assert_matchings(frames)
    assert frame_edge_counter(frames) == Counter(dict(m.edges))


def test_heuristic_triangle():
    t = make_topology(3, [(0, 1), (1, 2), (0, 2)])
    m = build_multigraph({e: F(1, 2) for e in t.edges}, t)
    frames = edge_color_heuristic(m)
    assert m.d_m == 2 and len(frames) == 3  # odd cycle needs d_m + 1
    assert_matchings(frames)


def test_heuristic_16k3(t16k3):
    m = build_multigraph({e: F(1, 3) for e in t16k3.edges}, t16k3)
    frames = edge_color_heuristic(m)
    assert m.d_m == 3 and len(frames) <= 4
    assert_matchings(frames)
    assert frame_edge_counter(frames) == Counter(dict(m.edges))


def test_heuristic_on_bipartite_stays_near_dm():
    t = grid((2, 3))
    m = build_multigraph({e: F(1, 3) for e in t.edges}, t)
    frames = edge_color_heuristic(m)
    assert len(frames) <= m.d_m + 1
    assert_matchings(frames)


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 9), st.data())
def test_heuristic_simple_graphs_vizing_bound(n, data):
    pool = [(u, v) for u in range(n) for v in range(u + 1, n)]
    tree = [(0, v) for v in range(1, n)]
    extra = data.draw(st.lists(st.sampled_from(pool), max_size=12))
    edges = sorted(set(tree) | set(extra))
    t = make_topology(n, edges)
    den = 2 * max(len(t.adj[v]) for v in range(n))
    m = build_multigraph({e: F(1, den) for e in t.edges}, t)
    frames = edge_color_heuristic(m)
    assert len(frames) <= m.d_m + 1
    assert_matchings(frames)
    assert frame_edge_counter(frames) == Counter(dict(m.edges))


def test_heuristic_multigraph_shannon_caveat():
    # doubled triangle: optimum is 6 = 3*d_m/2, beyond the simple-graph bound
    m = Multigraph(3, (((0, 1), 2), ((0, 2), 2), ((1, 2), 2)), 6, 4)
    frames = edge_color_heuristic(m)
    assert len(frames) == 6
    assert_matchings(frames)


# ---------------------------------------------------------------------------
# orientation and ordering

def test_orient_frames():
    t = path3()
    dist = bfs_distances(t)
    out = orient_frames([((1, 2),), ((0, 1),)], dist)
    assert out == [((1, 2),), ((0, 1),)]
    out = orient_frames([((2, 1),)], dist)
    assert out == [((1, 2),)]


def test_orient_tie_goes_low_to_high():
    t = grid((2, 2))
    dist = bfs_distances(t)  # nodes 1 and 2 both at distance 1
    assert orient_frames([((2, 1),)], dist) == [((1, 2),)]


def test_order_frames_path3():
    t = path3()
    sched = compile_from_occupancies(t, {(0, 1): F(1, 2), (1, 2): F(1, 2)})
    assert sched.frames == (((0, 1),), ((1, 2),))


def stage_pipeline(t, occ):
    # the compile steps without the broadcast-reachability gate, for
    # exercising them on supports that cannot feed every node
    m = build_multigraph(occ, t)
    flag, colors = is_bipartite(t)
    frames = edge_color_bipartite(m, colors) if flag else edge_color_heuristic(m)
    return order_frames(orient_frames(frames, bfs_distances(t)), t), m


def test_order_frames_root_sends_first():
    t = grid((4, 4))
    occ = rationalize(solve_balanced(t).occupancies, 8)
    sched, _ = stage_pipeline(t, occ)
    assert any(e[0] == 0 for e in sched.frames[0])


def test_order_frames_permutes_only():
    t = grid((4, 4))
    occ = rationalize(solve_balanced(t).occupancies, 8)
    m = build_multigraph(occ, t)
    _, colors = is_bipartite(t)
    frames = orient_frames(edge_color_bipartite(m, colors), bfs_distances(t))
    sched = order_frames(frames, t)
    assert sorted(map(sorted, sched.frames)) == sorted(map(sorted, frames))


# ---------------------------------------------------------------------------
# full pipeline from occupancies

def test_pipeline_4x4_lp_vertex():
    t = grid((4, 4))
    occ = rationalize(solve_balanced(t).occupancies, 8)
    sched, _ = stage_pipeline(t, occ)
    assert sched.period == 7  # this optimum's multigraph has d_m = 7
    assert_matchings(sched.frames)
    dist = bfs_distances(t)
    for f in sched.frames:
        for (u, v) in f:
            assert (dist[u], u) < (dist[v], v)


def test_pipeline_period_never_exceeds_l():
    for t in [path3(), grid((2, 2)), grid((4, 4)), grid((2, 2, 4))]:
        occ = rationalize(solve_balanced(t).occupancies, 8)
        sched, m = stage_pipeline(t, occ)
        assert sched.period <= m.l


def test_pipeline_frequency_covers_occupancy():
    # per-cycle transfer count on each edge >= rationalized occupancy share
    t = grid((4, 4))
    occ = rationalize(solve_balanced(t).occupancies, 8)
    sched, _ = stage_pipeline(t, occ)
    counts = frame_edge_counter(sched.frames)
    for (i, j), o in occ.items():
        pair = (min(i, j), max(i, j))
        both = occ.get((i, j), F(0)) + occ.get((j, i), F(0))
        assert F(counts.get(pair, 0), sched.period) >= both


def test_pipeline_nonbipartite_support(t16k3):
    occ = {(u, v): F(1, 3) for (u, v) in t16k3.edges}
    sched, _ = stage_pipeline(t16k3, occ)
    assert sched.period <= 4
    assert_matchings(sched.frames)


def test_compile_rejects_unreachable_quantization():
    # flooring the 4x4 optimum at 8 drops the 1/15 arcs that feed the
    # far corner pair, leaving them exchanging with each other only
    t = grid((4, 4))
    occ = solve_balanced(t).occupancies
    with pytest.raises(ScheduleError, match="nodes 14, 15.*max_den=8"):
        compile_from_occupancies(t, occ, max_den=8)
    sched = compile_from_occupancies(t, occ)  # exact compile is fine
    assert sched.period == 15


def test_compile_rejects_rootless_support():
    # circular occupancies balance the intakes without any root outflow
    occ = {(1, 2): F(1, 2), (2, 1): F(1, 2)}
    with pytest.raises(ScheduleError, match="nodes 1, 2") as e:
        compile_from_occupancies(path3(), occ)
    assert "max_den" not in str(e.value)


# ---------------------------------------------------------------------------
# direct build

def test_compile_balanced_micro():
    sched, sol = compile_balanced(path3())
    assert sched.period == 2 and sol.C == F(1, 2)
    sched, sol = compile_balanced(grid((1, 2)))
    assert sched.period == 1 and sol.C == 1
    star = make_topology(4, [(0, 1), (0, 2), (0, 3)])
    sched, sol = compile_balanced(star)
    assert sched.period == 3 and sol.C == F(1, 3)


def test_compile_balanced_4x4():
    t = grid((4, 4))
    sched, sol = compile_balanced(t)
    assert sched.period == 8 and sol.C == F(1, 2)
    assert_matchings(sched.frames)
    assert not verify_constraints(t, sol.occupancies, C=sol.C)
    # every non-root node appears as a receiver
    receivers = {v for f in sched.frames for (_, v) in f}
    assert receivers == set(range(1, 16))


def test_compile_balanced_cycle4_unlabeled():
    t = make_topology(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
    sched, sol = compile_balanced(t)
    assert sol.C == F(1, 2)
    assert not verify_constraints(t, sol.occupancies, C=sol.C)


def test_compile_balanced_16k3(t16k3):
    sched, sol = compile_balanced(t16k3)
    assert sol.C == F(1, 2) and sched.period == 2
    assert not verify_constraints(t16k3, sol.occupancies, C=sol.C)


def test_compile_balanced_rejects_rates():
    t = make_topology(2, [(0, 1)], rates={(0, 1): F(1, 2)})
    with pytest.raises(ScheduleError, match="rates"):
        compile_balanced(t)


def test_compile_balanced_realized_solution_is_consistent():
    for dims in [(1, 3), (4, 4), (2, 2, 4)]:
        t = grid(dims)
        sched, sol = compile_balanced(t)
        counts = Counter()
        for f in sched.frames:
            for e in f:
                counts[e] += 1
        assert {e: F(n, sched.period) for e, n in counts.items()} == \
            {e: o for e, o in sol.occupancies.items() if o}


# ---------------------------------------------------------------------------
# serialization

def test_serialize_roundtrip():
    for t in [path3(), grid((4, 4))]:
        sched, _ = compile_balanced(t)
        back = deserialize_schedule(serialize_schedule(sched))
        assert back == sched


def test_serialize_is_deterministic():
    a = serialize_schedule(compile_balanced(grid((4, 4)))[0])
    b = serialize_schedule(compile_balanced(grid((4, 4)))[0])
    assert a == b


def test_serialize_size():
    sched, _ = compile_balanced(grid((4, 4)))
    body = serialize_schedule(sched).strip().splitlines()[4:]
    assert len(body) <= 64  # 8 frames x at most 8 matching edges


def test_serialize_path3_body():
    sched, _ = compile_balanced(path3())
    text = serialize_schedule(sched)
    assert text.splitlines()[0] == "bbs-schedule v1"
    assert len(text.strip().splitlines()) == 4 + 2


def test_deserialize_errors_carry_line_numbers():
    with pytest.raises(ScheduleError, match="line 1"):
        deserialize_schedule("not-a-schedule\np 3\n")
    good = serialize_schedule(compile_balanced(path3())[0])
    with pytest.raises(ScheduleError, match="line 5"):
        deserialize_schedule(good.replace("0 0 1", "0 0 x", 1))
    with pytest.raises(ScheduleError, match="line 5"):
        deserialize_schedule(good.replace("0 0 1", "7 0 1", 1))
    # declaring idle frames beyond the body is legal and round-trips
    padded = deserialize_schedule(good.replace("frames 2", "frames 3", 1))
    assert padded.period == 3 and padded.frames[2] == ()
