from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quenchcoal import limit as L
from quenchcoal.genealogy import GenealogyPath
from quenchcoal.partitions import Partition
from quenchcoal.rng import substream
from quenchcoal.statistics import (
    SfsVector, branch_lengths, integrate_block_sizes, kingman_sfs, ks_critical, ks_statistic, ks_two_sample, partition_tv_distance,
    quenched_sfs, sfs_csv, sfs_from_tau,
)


def path(*jumps, horizon=10.0):
    return GenealogyPath(tuple((t, Partition.parse(p)) for t, p in jumps), horizon)


def test_branch_length_examples():
    v = branch_lengths(path((0, "{1|2}"), (0.7, "{1,2}")))
    assert np.allclose(v.tau, [1.4]) and not v.truncated
    t1, t2 = 0.3, 1.1
    v = branch_lengths(path((0, "{1|2|3}"), (t1, "{1,2|3}"), (t2, "{1,2,3}")))
    assert np.allclose(v.tau, [3 * t1 + (t2 - t1), t2 - t1])


def test_truncated_path_integrates_to_horizon():
    v = branch_lengths(path((0, "{1|2|3}"), (1.0, "{1,2|3}"), horizon=4.0))
    assert v.truncated and np.allclose(v.tau, [3 + 3, 3])
    with pytest.raises(ValueError):
        branch_lengths(path((0, "{1|2}"), (1.0, "{1,2}")), 3)


def test_quenched_sfs_single_and_errors():
    v = branch_lengths(path((0, "{1|2|3}"), (0.5, "{1,3|2}"), (2.0, "{1,2,3}")))
    res = quenched_sfs([v])
    assert np.allclose(res.normalized, v.normalized) and np.all(res.stderr == 0)
    with pytest.raises(ValueError):
        quenched_sfs([])
    with pytest.raises(ValueError):
        quenched_sfs([v, SfsVector(2, [1.0])])


def test_average_then_normalize_and_truncation_count():
    a = SfsVector(3, [2.0, 0.0])
    b = SfsVector(3, [1.0, 1.0])
    c = SfsVector(3, [9.0, 9.0], truncated=True)
    res = quenched_sfs([a, b, c])
    assert res.loci_used == 2 and res.loci_truncated == 1
    assert np.allclose(res.normalized, [0.75, 0.25])  # not the mean of (1, 0) and (0.5, 0.5)


@given(st.lists(st.lists(st.floats(0, 5), min_size=4, max_size=4), min_size=1, max_size=30),
       st.floats(0.01, 100))
def test_normalization_and_scale_invariance(rows, c):
    tau = np.array(rows)
    res = sfs_from_tau(tau)
    if tau.sum() > 0:
        assert res.normalized.sum() == pytest.approx(1, abs=1e-12)
        assert np.allclose(sfs_from_tau(tau * c).normalized, res.normalized)
    assert np.all(res.tau_mean >= 0)


def test_branch_lengths_additive_under_concatenation():
    whole = path((0, "{1|2|3|4}"), (1.0, "{1,2|3|4}"), (2.5, "{1,2|3,4}"), (3.0, "{1,2,3,4}"))
    j = whole.jumps
    head = integrate_block_sizes(j[:2], 1.8, 4)
    tail = integrate_block_sizes(((1.8, j[1][1]),) + j[2:], 3.0, 4)
    assert np.allclose(branch_lengths(whole).tau, head + tail)


def test_kingman_sfs_shape_by_monte_carlo():
    xi = L.preset(L.ARG())
    vecs = [branch_lengths(L.walk_graph(L.simulate_graph(20, xi, 0.0, rng=substream(1, i)), 0))
            for i in range(10000)]
    assert np.max(np.abs(quenched_sfs(vecs).normalized - kingman_sfs(20))) < 0.01


def test_lambda_zero_graph_gives_zero_variance():
    g = L.simulate_graph(8, L.preset(L.ARG()), 0.0, rng=2)
    vecs = [branch_lengths(L.walk_graph(g, substream(3, i))) for i in range(50)]
    tau = np.array([v.tau for v in vecs])
    assert np.all(tau == tau[0])
    assert np.allclose(quenched_sfs(vecs).stderr, 0)


def test_ks_statistic():
    cdf = lambda x: 1 - np.exp(-2 * np.asarray(x))
    crit = ks_critical(10000)
    passes = sum(ks_statistic(substream(4, s).exponential(0.5, 10000), cdf) < crit for s in range(100))
    assert passes >= 99
    assert ks_statistic([0.3] * 50, lambda x: np.clip(np.asarray(x), 0, 1)) >= 0.5
    with pytest.raises(ValueError):
        ks_statistic([], cdf)
    assert ks_two_sample([1, 2, 3], [1, 2, 3]) == 0


def test_partition_tv_distance():
    p, q = Partition.parse("{1|2|3}"), Partition.parse("{1,2|3}")
    assert partition_tv_distance({p: 3, q: 1}, {p: 6, q: 2}) == 0
    assert partition_tv_distance({p: 5}, {q: 2}) == 1
    with pytest.raises(ValueError):
        partition_tv_distance({p: 1}, {Partition.singletons(2): 1})
    parts = [Partition.parse(s) for s in ("{1|2|3}", "{1,2|3}", "{1,3|2}", "{1|2,3}", "{1,2,3}")]
    probs = [0.4, 0.2, 0.15, 0.15, 0.1]
    draw = lambda s: Counter(parts[i] for i in substream(5, s).choice(5, 10000, p=probs))
    assert partition_tv_distance(draw(1), draw(2)) < 0.05


def test_sfs_csv_header_and_rows():
    res = sfs_from_tau(np.array([[1.0, 2.0, 3.0]]))
    text = sfs_csv([(1.0, 0, res), (0.0, 3, res)])
    lines = text.splitlines()
    assert lines[0] == "lambda,graph_id,r,tau_mean,sfs_normalized,stderr"
    assert len(lines) == 1 + 2 * 3 and lines[4].startswith("0.0,3,1,")
