from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from quenchcoal import limit as L
from quenchcoal.partitions import MergeSpec, Partition, set_partitions
from quenchcoal.rng import substream

PSI = L.preset(L.Psi(0.5))
ARG = L.preset(L.ARG())


def test_measure_validation():
    with pytest.raises(ValueError):
        L.XiMeasure(1.0, ((1.0, (0.2, 0.5)),))
    with pytest.raises(ValueError):
        L.XiMeasure(1.0, ((1.0, (0.7, 0.6)),))
    with pytest.raises(ValueError):
        L.XiMeasure(-1.0)
    with pytest.raises(ValueError):
        L.XiMeasure(0.0, (), (1.5, 1.0))
    assert L.XiMeasure(1.0, ((0.0, (0.5,)),)).atoms == ()


def test_presets():
    arg = L.preset(L.ARG(3.0))
    assert arg.kingman_mass == 2 and arg.atoms == ()
    assert L.preset(L.Psi(1.0, 7.0)).atoms == ((0.5, (0.5, 0.5)),)
    assert L.preset(L.Psi(0.0)) == L.XiMeasure(2.0)
    for bad in (L.Psi(1.5), L.Beta(2.0, 1.0), L.ARG(-1.0), L.SwMixture(((0.0, 1, 1.0),))):
        with pytest.raises(ValueError):
            L.preset(bad)
    sw = L.preset(L.SwMixture(((0.5, 2, 1.0),)))
    assert sw.atoms == ((0.25, (0.25, 0.25)),) and sw.kingman_mass == pytest.approx(2 * (1 - 0.125))
    mixed = L.preset(L.Mixed(((L.ARG(), 1.0), (L.Psi(0.5), 2.0))))
    assert mixed.kingman_mass == 6.0 and mixed.atoms == ((0.25, (0.25, 0.25)),)


def test_xi_rate_examples():
    assert L.xi_rate(4, [2], 2, ARG) == 2
    for psi in (0.25, 0.5, 1.0):
        assert L.xi_rate(2, [2], 0, L.preset(L.Psi(psi))) == pytest.approx(2 + psi**2 / 2, abs=1e-14)
    with pytest.raises(ValueError):
        L.xi_rate(3, [2, 1], 0, ARG)
    with pytest.raises(ValueError):
        L.xi_rate(4, [2], 1, ARG)
    assert L.xi_rate(3, [], 3, ARG) == -6


@pytest.mark.parametrize("r", [0.0, 0.5, 1.0])
def test_beta_pair_rate_is_mass(r):
    # the rate at which a given pair merges equals the mass rho E[z^2/2]
    xi = L.preset(L.Beta(r, 1.3))
    a = 2 - r
    assert L.xi_rate(2, [2], 0, xi) - 2 == pytest.approx(1.3 * a * (a + 1) / 12, rel=1e-9)
    assert xi.total_mass - 2 == pytest.approx(1.3 * a * (a + 1) / 12, rel=1e-12)


@pytest.mark.parametrize("xi", [ARG, PSI, L.preset(L.Beta(0.5, 1.0))])
def test_exit_rate_matches_generator(xi):
    for b in range(2, 6):
        states, Q = L.rate_matrix(b, xi)
        i = states.index(Partition.singletons(b))
        off = Q[i].sum() - Q[i, i]
        assert off == pytest.approx(L.exit_rate(b, xi), rel=1e-12)
        assert -Q[i, i] == pytest.approx(off, rel=1e-12)


def test_consistency_of_mixed_and_sw_presets():
    for kind in (L.Mixed(((L.ARG(), 1.0), (L.Beta(0.3, 2.0), 0.5))), L.SwMixture(((1.0, 2, 0.5), (0.3, 4, 1.0)))):
        xi = L.preset(kind)
        for b in range(2, 6):
            assert L.consistency_defect(b, xi) < 1e-9


@given(st.permutations(range(1, 6)), st.sampled_from(list(set_partitions(5))))
def test_rates_are_exchangeable(perm, target):
    src = Partition.singletons(5)
    relabeled = Partition([[perm[i - 1] for i in block] for block in target.blocks])
    xi = L.preset(L.Psi(0.7))
    assert L.transition_rate(src, target, xi) == pytest.approx(L.transition_rate(src, relabeled, xi), abs=1e-15)


def test_simulate_graph_edge_cases():
    assert L.simulate_graph(1, ARG, 5.0, rng=1).n_events == 0
    with pytest.raises(ValueError):
        L.simulate_graph(3, ARG, 1.0, horizon=0, rng=1)
    with pytest.raises(ValueError):
        L.simulate_graph(0, ARG, 1.0, rng=1)


def test_kingman_pair_absorption_time():
    t = np.array([L.simulate_graph(2, ARG, 0.0, rng=substream(3, i)).times[-1] for i in range(10000)])
    assert abs(t.mean() - 0.5) <= 3 * t.std(ddof=1) / 100


def test_large_lambda_graph_absorbs_before_30():
    g = L.simulate_graph(20, ARG, 100.0, frag_cutoff=10, horizon=30, rng=4)
    assert g.absorbed and g.times[-1] < 30
    assert g.node_count()[-1] == 1


def test_lambda_zero_first_jump_frequencies():
    xi, b, runs = PSI, 4, 10000
    expected = {}
    for ks, s, mult in L.merger_types(b):
        expected[(ks, s)] = mult * L.xi_rate(b, ks, s, xi) / L.exit_rate(b, xi)
    seen = dict.fromkeys(expected, 0)
    for i in range(runs):
        g = L.simulate_graph(b, xi, 0.0, rng=substream(5, i))
        spec = g.events[0][1].spec
        ks = tuple(sorted((len(gr) for gr in spec.merged_groups()), reverse=True))
        seen[(ks, b - sum(ks))] += 1
    for key, p in expected.items():
        se = np.sqrt(p * (1 - p) / runs)
        assert abs(seen[key] / runs - p) <= 3 * se + 1e-12, key


@given(st.integers(0, 2**31), st.sampled_from([0.0, 1.0, 5.0]))
def test_walks_coarsen_and_absorb(seed, lam):
    g = L.simulate_graph(5, PSI, lam, frag_cutoff=3.0, rng=seed)
    path = L.walk_graph(g, seed + 1)
    chain = path.chain()
    for a, b in zip(chain, chain[1:]):
        assert a.is_finer_than(b) and a != b
    if g.absorbed:
        assert path.absorbed and path.final == Partition.one_block(5)
    if lam == 0:
        assert list(path.jumps[1:]) == g.coalescence_sequence()


def test_graph_csv_roundtrip():
    g = L.simulate_graph(4, PSI, 2.0, rng=7)
    text = "event_index,time,kind,detail\n" + g.to_csv()
    back = L.AncestralGraph.from_csv(text, 4, g.horizon, g.frag_cutoff)
    assert [(t, str(e)) for t, e in back.events] == [(t, str(e)) for t, e in g.events]
    assert back.status == g.status
    with pytest.raises(ValueError):
        L.AncestralGraph.from_events(2, [(0.1, L.Fragmentation(3))], 1.0)
    with pytest.raises(ValueError):
        L.AncestralGraph.from_events(2, [(0.1, L.Coalescence(MergeSpec.identity(3)))], 1.0)


@pytest.mark.parametrize("xi", [ARG, PSI, L.preset(L.Beta(0.5, 2.0))])
def test_efc_coupling_is_pointwise(xi):
    for i in range(50):
        a, b = L.efc_coupled_walks(6, xi, 2.0, rng=substream(8, i))
        assert a.jumps == b.jumps


def test_efc_lambda_zero_matches_graph_law():
    # without fragmentation the coupled paths are Kingman paths: mean pair time 1/2
    t = np.array([L.efc_coupled_walks(2, ARG, 0.0, rng=substream(9, i))[0].coalescence_time() for i in range(4000)])
    assert abs(t.mean() - 0.5) <= 3 * t.std(ddof=1) / np.sqrt(len(t))


def test_stream_and_frozen_agree_in_law():
    n, lam, reps = 4, 2.0, 3000
    xi = PSI
    s_tau, s_prod = [], []
    f_tau, f_prod = [], []
    for i in range(reps):
        tau, tm, ab = L.stream_sfs(n, xi, lam, 2, rng=substream(10, i))
        s_tau.append(tau[0])
        s_prod.append(tm[0] * tm[1])
        g = L.simulate_graph(n, xi, lam, rng=substream(11, i))
        p1, p2 = L.walk_graph(g, substream(12, i)), L.walk_graph(g, substream(13, i))
        from quenchcoal.statistics import branch_lengths
        f_tau.append(branch_lengths(p1).tau)
        f_prod.append(p1.tmrca * p2.tmrca)
    s_tau, f_tau = np.array(s_tau), np.array(f_tau)
    se = np.sqrt(s_tau.var(axis=0) / reps + f_tau.var(axis=0) / reps)
    assert np.all(np.abs(s_tau.mean(axis=0) - f_tau.mean(axis=0)) <= 4 * se)
    sp, fp = np.array(s_prod), np.array(f_prod)
    assert abs(sp.mean() - fp.mean()) <= 4 * np.sqrt(sp.var() / reps + fp.var() / reps)
    assert stats.ks_2samp(s_tau.sum(axis=1), f_tau.sum(axis=1)).pvalue > 1e-3


def test_stream_sfs_lambda_zero_identical_loci():
    tau, tm, ab = L.stream_sfs(6, PSI, 0.0, 20, rng=3)
    assert ab.all() and np.all(tau == tau[0]) and np.all(tm == tm[0])


def test_node_count_matches_replayed_states():
    for i in range(20):
        g = L.simulate_graph(5, PSI, 3.0, rng=substream(14, i))
        assert np.array_equal(g.node_count(), [s[1] for s in g.states()[1:]])
