from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quenchcoal.genealogy import (
    AncestralPath, GenealogyPath, SampleConfig, annealed_pair_times, discrete_ancestral_graph,
    paths_from_csv, paths_to_csv, quenched_replicates, rescale, time_change, trace_lineages,
)
from quenchcoal.oracle import expected_pair_coalescence_steps
from quenchcoal.partitions import Partition
from quenchcoal.population import OffspringStep, Pedigree, moran, wright_fisher
from quenchcoal.rng import substream


def fixed(N, steps):
    return Pedigree.from_steps(N, [OffspringStep(N, *map(list, zip(*s))) if s else
                                   OffspringStep(N, [], [], []) for s in steps])


def path_from_rows(n, rows, depth):
    """rows: (step, [(mask, individual), ...]) with blocks in canonical order."""
    R = len(rows)
    masks = np.zeros((R, n), np.uint64)
    inds = np.full((R, n), -1, np.int64)
    nb = np.zeros(R, np.int64)
    paired = np.zeros(R, bool)
    for r, (_, blocks) in enumerate(rows):
        nb[r] = len(blocks)
        for j, (m, x) in enumerate(blocks):
            masks[r, j], inds[r, j] = m, x
        paired[r] = len({x for _, x in blocks}) < len(blocks)
    steps = np.array([s for s, _ in rows], np.int64)
    return AncestralPath(n, steps, masks, inds, np.zeros((R, n), np.int64), nb, paired, depth)


def test_sample_config_validation():
    with pytest.raises(ValueError):
        SampleConfig([1, 1])
    with pytest.raises(ValueError):
        SampleConfig([3])
    with pytest.raises(ValueError):
        SampleConfig([0, 5]).check(5)


def test_no_children_keeps_singletons():
    ped = fixed(4, [[]] * 10)
    path = trace_lineages(ped, SampleConfig([0, 1, 2]), 1)
    assert len(path) == 1 and path.depth == 10
    assert path.state_at(10)[0].partition == Partition.singletons(3)
    assert rescale(path, 0.1).jumps == ((0.0, Partition.singletons(3)),)


def test_selfed_parent_collision_is_half():
    ped = fixed(3, [[(0, 2, 2), (1, 2, 2)]])
    hits = sum(trace_lineages(ped, SampleConfig([0, 1]), substream(4, i)).absorbed for i in range(4000))
    assert abs(hits / 4000 - 0.5) < 4 * np.sqrt(0.25 / 4000)


def test_full_selfing_pair_coalesces_after_geometric_events():
    # both lineages land in individual 2, which is then a selfed child every step
    steps = [[(0, 2, 2), (1, 2, 2)]] + [[(2, 2, 2)]] * 60
    ped = fixed(3, steps)
    counts = []
    for i in range(3000):
        path = trace_lineages(ped, SampleConfig([0, 1]), substream(5, i))
        assert path.absorbed
        assert not any(path.paired[r] and path.nb[r] == 2 and len(set(path.inds[r, :2])) == 2
                       for r in range(len(path)))
        counts.append(int(path.steps[-1]))
    counts = np.array(counts)
    # Geometric(1/2) events counted from the first step
    assert abs(counts.mean() - 2) < 4 * counts.std() / np.sqrt(len(counts))


def test_time_change_examples():
    pair = [(1, 7), (2, 7), (4, 9)]
    base = [(1, 3), (2, 4), (4, 9)]
    disperse = path_from_rows(3, [(0, [(1, 0), (2, 1), (4, 2)]), (2, base), (3, pair),
                                  (6, [(1, 5), (2, 6), (4, 9)])], 8)
    tc = time_change(disperse)
    for k in (3, 4, 5):
        assert tc.state_at(k) == disperse.state_at(2)
    assert tc.state_at(6) == disperse.state_at(6)
    coal = path_from_rows(3, [(0, [(1, 0), (2, 1), (4, 2)]), (2, base), (3, pair), (6, [(3, 7), (4, 9)])], 8)
    g = rescale(time_change(coal), 0.5)
    assert [t for t, _ in g.jumps] == [0.0, 3.0]
    assert g.jumps[1][1] == Partition.parse("{1,2|3}")
    # without the time change the pair shows up as merged from step 3
    raw = rescale(coal, 0.5)
    assert raw.jumps[1] == (1.5, Partition.parse("{1,2|3}"))


def test_rescale_arithmetic_and_errors():
    p = path_from_rows(2, [(0, [(1, 0), (2, 1)]), (200, [(3, 4)])], 200)
    g = rescale(p, 0.01)
    assert g.jumps == ((0.0, Partition.singletons(2)), (2.0, Partition.one_block(2)))
    assert g.coalescence_time() == 2.0 and g.absorbed
    for bad in (0, 1.5, -1):
        with pytest.raises(ValueError):
            rescale(p, bad)


def test_genealogy_path_validation_and_csv():
    with pytest.raises(ValueError):
        GenealogyPath(((0.5, Partition.singletons(2)),), 1.0)
    with pytest.raises(ValueError):
        GenealogyPath(((0.0, Partition.singletons(2)), (0.0, Partition.one_block(2))), 1.0)
    paths = quenched_replicates(Pedigree(10, moran(10, 0.5), seed=1), SampleConfig([0, 1, 2]), 3, 2)
    text = paths_to_csv(paths)
    assert text.splitlines()[0] == "locus,time,partition"
    assert [p.jumps for p in paths_from_csv(text)] == [p.jumps for p in paths]


@given(st.integers(0, 2**31), st.sampled_from([0.0, 0.5, 0.9, 1.0]), st.sampled_from(["moran", "wf"]),
       st.integers(2, 5))
def test_trace_invariants(seed, alpha, kind, n):
    N = 6
    params = moran(N, alpha) if kind == "moran" else wright_fisher(N, alpha)
    ped = Pedigree(N, params, seed=seed, chunk_steps=64)
    ped.ensure_depth(64)
    sample = SampleConfig.random(N, n, substream(seed, "s"))
    path = trace_lineages(ped, sample, substream(seed, "t"))
    assert not path.paired[0]
    assert np.all(np.diff(path.steps) > 0) and path.depth <= ped.depth
    prev = None
    for r in range(len(path)):
        state, inds = path.row_state(r)
        assert bool(path.paired[r]) == (len(set(inds)) < len(inds))
        assert len(state.pairs) == len(inds) - len(set(inds))
        if prev is not None:
            assert prev.is_finer_than(state.partition)
        prev = state.partition
    tc = time_change(path)
    assert not tc.paired.any()
    for r in np.flatnonzero(~path.paired):
        assert tc.state_at(int(path.steps[r])) == path.row_state(r)


def test_replicates_determinism_and_keyed_loci():
    ped = Pedigree(30, moran(30, 0.8), seed=9)
    sample = SampleConfig([0, 5, 9])
    a = quenched_replicates(ped, sample, 6, 3)
    b = quenched_replicates(ped, sample, 6, 3)
    assert [p.jumps for p in a] == [p.jumps for p in b]
    assert len(quenched_replicates(ped, sample, 1, 3)) == 1
    with pytest.raises(ValueError):
        quenched_replicates(ped, sample, 0, 3)


def test_truncation_flagged():
    ped = Pedigree(50, moran(50, 0.5), seed=2)
    paths = quenched_replicates(ped, SampleConfig([0, 1]), 5, 1, horizon_steps=3)
    assert all(p.truncated and not p.absorbed for p in paths)
    assert all(p.horizon == pytest.approx(3 / 2500) for p in paths)


def test_annealed_recovery_matches_oracle_expectation():
    params = moran(3, Fraction(1, 3))
    t = annealed_pair_times(params, 4000, 8, c_N=1.0, horizon_steps=10**6)
    exact = float(expected_pair_coalescence_steps(params))
    assert abs(t.mean() - exact) <= 3 * t.std(ddof=1) / np.sqrt(len(t))


def test_moran_rescaled_pair_time_mean_half():
    # limited outcrossing, alpha = 1 - 1/N
    t = annealed_pair_times(moran(100, 0.99), 10000, 21)
    assert np.isfinite(t).all()
    assert abs(t.mean() - 0.5) <= 3 * t.std(ddof=1) / np.sqrt(len(t))


def test_pure_outcrossing_pairs_never_coalesce():
    # alpha = 0: a cohabiting pair always disperses, so after the time change
    # only direct hits count and the pair rate is 1 rather than 2
    t = annealed_pair_times(moran(60), 3000, 22)
    assert abs(t.mean() - 1.0) <= 3 * t.std(ddof=1) / np.sqrt(len(t))


def test_discrete_graph_small_cases():
    ped = fixed(5, [[]] * 5)
    g = discrete_ancestral_graph(ped, SampleConfig([0, 1, 2]))
    assert g.n_events == 0 and g.truncated
    ped = fixed(5, [[(1, 3, 4)], []])
    g = discrete_ancestral_graph(ped, SampleConfig([0, 1, 2]))
    assert [type(e).__name__ for _, e in g.events] == ["Fragmentation"]
    assert g.events[0][1].node == 2 and list(g.node_count()) == [4]


def test_discrete_graph_merges_shared_ancestors():
    ped = fixed(5, [[(0, 3, 3), (1, 3, 4)]])
    g = discrete_ancestral_graph(ped, SampleConfig([0, 1]))
    kinds = [type(e).__name__ for _, e in g.events]
    assert kinds == ["Fragmentation", "Coalescence"]
    assert g.states()[-1][1] == 2


def test_discrete_graph_fragmentation_rate():
    N, lam, n, T = 200, 2.0, 4, 0.5
    c_N = 1 / N**2
    frags, exposure = 0, 0.0
    for i in range(40):
        ped = Pedigree(N, moran(N, 1 - lam / N), seed=1000 + i)
        g = discrete_ancestral_graph(ped, SampleConfig(range(n)), c_N=c_N, max_depth=int(T / c_N))
        states = g.states()
        end = g.horizon
        for (t0, l, _, _), (t1, _, _, _) in zip(states, states[1:] + [(end, 0, 0, None)]):
            exposure += l * (t1 - t0)
        frags += sum(type(e).__name__ == "Fragmentation" for _, e in g.events)
    expected = lam * exposure
    assert abs(frags - expected) <= 3 * np.sqrt(expected)
