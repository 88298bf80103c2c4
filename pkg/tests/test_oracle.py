from fractions import Fraction

import pytest

from quenchcoal.oracle import (
    enumerate_one_step, expected_pair_coalescence_steps, oracle_moments, oracle_report, paired_law,
    pair_transition_probs, singleton_law,
)
from quenchcoal.partitions import MarkedPartition, Partition
from quenchcoal.population import ModelParams, SargasyanWakeley, moran, wright_fisher

THIRD = Fraction(1, 3)

# exact one-step (c2, c3, d) at selfing probability 1/3
FROZEN = {
    ("moran", 3): (Fraction(1, 9), 0, Fraction(2, 9)),
    ("moran", 4): (Fraction(1, 16), 0, Fraction(1, 6)),
    ("wright-fisher", 3): (Fraction(1, 6), Fraction(1, 36), Fraction(2, 3)),
    ("wright-fisher", 4): (Fraction(1, 8), Fraction(1, 64), Fraction(2, 3)),
}


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_frozen_moments(key):
    make = moran if key[0] == "moran" else wright_fisher
    assert oracle_moments(make(key[1], THIRD), 3) == FROZEN[key]


def test_moran_n2_pair_coalescence_is_quarter():
    law = enumerate_one_step(moran(2, THIRD), MarkedPartition(Partition.singletons(2)), (0, 1))
    assert law.prob(lambda s: len(s.partition) == 1) == Fraction(1, 4)


@pytest.mark.parametrize("params", [moran(4, THIRD), wright_fisher(3, Fraction(1, 2))])
def test_laws_sum_to_one_exactly(params):
    assert singleton_law(params, 3).total() == 1
    assert paired_law(params).total() == 1
    law = enumerate_one_step(params, MarkedPartition(Partition.singletons(3), [(2, 3)]), (0, 1, 1))
    assert law.total() == 1


def test_fixed_selfing_pair_without_children_is_point_mass():
    params = ModelParams(3, 1, SargasyanWakeley([((0, 2), 1)]))
    xi = MarkedPartition(Partition.singletons(2), [(1, 2)])
    law = enumerate_one_step(params, xi, (1, 1))
    assert dict(law) == {xi: 1}


def test_moran_has_no_triple_or_double_mergers():
    law = singleton_law(moran(5, THIRD), 4)
    for state, p in law:
        if p:
            assert max(state.partition.block_sizes()) <= 2
            assert len(state.partition) + state.num_pairs >= 3


def test_float_fallback_at_six():
    c2, c3, d = oracle_moments(moran(6, 0.5), 3)
    assert isinstance(c2, float)
    assert abs(c2 - 1 / 36) < 1e-12 and c3 == 0 and abs(d - 0.5 / 6) < 1e-12


def test_refusals_and_bad_placements():
    with pytest.raises(ValueError):
        singleton_law(moran(7), 2)
    xi = MarkedPartition(Partition.singletons(2))
    with pytest.raises(ValueError):
        enumerate_one_step(moran(3), xi, (0, 0))
    with pytest.raises(ValueError):
        enumerate_one_step(moran(3), MarkedPartition(Partition.singletons(2), [(1, 2)]), (0, 1))
    with pytest.raises(ValueError):
        oracle_moments(moran(3), 4)


def test_pair_chain_and_expected_time():
    assert pair_transition_probs(moran(3, THIRD)) == (
        Fraction(1, 9), Fraction(1, 9), Fraction(1, 18), Fraction(2, 9))
    assert expected_pair_coalescence_steps(moran(3, THIRD)) == Fraction(21, 2)
    assert expected_pair_coalescence_steps(wright_fisher(3, THIRD)) == 6


def test_report_shape():
    rep = oracle_report({"m3": moran(3, THIRD)})
    assert set(rep) == {"m3:c2", "m3:d", "m3:c3"}
    assert all(r["abs_error"] == 0 for r in rep.values())
