"""Exact one-step transition laws of the finite-N model by brute-force enumeration.

Everything here is written directly from the model description and does not
use the closed forms or the samplers in :mod:`quenchcoal.population`, so it
can serve as ground truth for both.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb
from typing import Sequence

from .partitions import MarkedPartition, Partition

MAX_ORACLE_N = 6
EXACT_MAX_N = 5


class OneStepLaw:
    """Distribution of the next marked partition."""

    def __init__(self, entries: dict):
        self.entries = dict(entries)

    def __getitem__(self, state) -> object:
        return self.entries.get(state, 0)

    def __iter__(self):
        return iter(self.entries.items())

    def __len__(self) -> int:
        return len(self.entries)

    def total(self):
        return sum(self.entries.values())

    def prob(self, predicate) -> object:
        return sum(p for s, p in self.entries.items() if predicate(s))

    def __repr__(self) -> str:
        body = ", ".join(f"{s}: {p}" for s, p in sorted(self.entries.items(), key=lambda kv: str(kv[0])))
        return f"OneStepLaw({body})"


def _is_rational(x) -> bool:
    return isinstance(x, (int, Fraction))


def _unit(params):
    exact = params.N <= EXACT_MAX_N and _is_rational(params.alpha) and all(
        _is_rational(w) for _, w in params.law)
    return Fraction(1) if exact else 1.0


def _copies(xi: MarkedPartition) -> list[int]:
    copy = [0] * len(xi.partition)
    for _, j in xi.pairs:
        copy[j - 1] = 1
    return copy


def _check_placement(xi: MarkedPartition, placement: Sequence[int], N: int) -> None:
    b = len(xi.partition)
    if len(placement) != b:
        raise ValueError(f"placement has {len(placement)} entries for {b} blocks")
    if any(not 0 <= x < N for x in placement):
        raise ValueError("placement individual out of range")
    by_ind: dict = {}
    for idx, x in enumerate(placement, start=1):
        by_ind.setdefault(x, []).append(idx)
    for group in by_ind.values():
        if len(group) > 2 or (len(group) == 2 and tuple(group) not in xi.pairs):
            raise ValueError("only paired blocks may share an individual")
    for i, j in xi.pairs:
        if placement[i - 1] != placement[j - 1]:
            raise ValueError("paired blocks must share an individual")


def enumerate_one_step(params, xi: MarkedPartition, placement: Sequence[int]) -> OneStepLaw:
    """Exact law of the marked partition after one step.

    ``placement[j]`` is the individual (0-based) hosting block j+1. Within a
    pair the lower block sits on gene copy 0 and the higher on copy 1; an
    unpaired lineage sits on copy 0 (the copy of a lone lineage is irrelevant
    by symmetry of the parent order).

    Child sets are summed exactly through the hypergeometric law of which
    host individuals are children; potential-parent sets, selfing patterns,
    ordered parent pairs and Mendelian copy bits are enumerated in full.
    """
    N = params.N
    if N > MAX_ORACLE_N:
        raise ValueError(f"oracle enumeration refused for N={N} > {MAX_ORACLE_N}")
    _check_placement(xi, placement, N)
    one = _unit(params)
    alpha = params.alpha * one
    masks = xi.partition.masks
    n = xi.n
    copy = _copies(xi)
    hosts = sorted(set(placement))
    h = len(hosts)
    lineages_of = {x: [j for j, y in enumerate(placement) if y == x] for x in hosts}
    law: dict = {}
    state_cache: dict = {}

    def state_of(dest):
        st = state_cache.get(dest)
        if st is None:
            merged: dict = {}
            for j, key in enumerate(dest):
                merged[key] = merged.get(key, 0) | masks[j]
            keys = list(merged)
            st = MarkedPartition.from_masks([merged[k] for k in keys], n, [k[0] for k in keys])
            state_cache[dest] = st
        return st

    for (k, p), w in params.law:
        w = w * one
        for a in range(0, min(h, k) + 1):
            if k - a > N - h:
                continue
            w_a = w * comb(N - h, k - a) / comb(N, k)
            for A in itertools.combinations(hosts, a):
                moving = [j for x in A for j in lineages_of[x]]
                m = len(moving)
                for Q in itertools.combinations(range(N), p):
                    w_q = w_a / comb(N, p)
                    options = [(alpha / p, (q, q)) for q in Q]
                    if p >= 2:
                        options += [((1 - alpha) / (p * (p - 1)), (q1, q2))
                                    for q1 in Q for q2 in Q if q1 != q2]
                    options = [o for o in options if o[0] != 0]
                    for combo in itertools.product(options, repeat=a):
                        weight = w_q
                        parents_of = {}
                        for x, (pw, pair) in zip(A, combo):
                            weight = weight * pw
                            parents_of[x] = pair
                        if weight == 0:
                            continue
                        counts: dict = {}
                        for bits in itertools.product((0, 1), repeat=m):
                            dest = [(placement[j], copy[j]) for j in range(len(masks))]
                            for j, bit in zip(moving, bits):
                                pa, pb = parents_of[placement[j]]
                                parent = pa if pa == pb else (pa, pb)[copy[j]]
                                dest[j] = (parent, bit)
                            st = state_of(tuple(dest))
                            counts[st] = counts.get(st, 0) + 1
                        scale = weight / (2**m)
                        for st, c in counts.items():
                            law[st] = law.get(st, 0) + scale * c
    return OneStepLaw(law)


def _average(laws: list) -> dict:
    out: dict = {}
    for law in laws:
        for st, pr in law:
            out[st] = out.get(st, 0) + pr
    return {st: pr / len(laws) for st, pr in out.items()}


def singleton_law(params, n: int) -> OneStepLaw:
    """One-step law from n singletons, averaged over all C(N, n) placements."""
    if not 1 <= n <= params.N:
        raise ValueError("need 1 <= n <= N")
    xi = MarkedPartition(Partition.singletons(n))
    laws = [enumerate_one_step(params, xi, pl) for pl in itertools.combinations(range(params.N), n)]
    return OneStepLaw(_average(laws))


def paired_law(params) -> OneStepLaw:
    """One-step law from two lineages sharing one individual, averaged over its N placements."""
    xi = MarkedPartition(Partition.singletons(2), [(1, 2)])
    laws = [enumerate_one_step(params, xi, (x, x)) for x in range(params.N)]
    return OneStepLaw(_average(laws))


def oracle_moments(params, n: int = 3):
    """Exact one-step (c2, c3, d): pairwise coalescence, triple merger, dispersal.

    c2 is the probability that lineages 1 and 2 of an n-sample share a block
    after one step; c3 (only for n = 3, else None) that all three do.
    """
    if n not in (2, 3):
        raise ValueError("n must be 2 or 3")
    law = singleton_law(params, n)
    c2 = law.prob(lambda s: s.partition.block_of(1) == s.partition.block_of(2))
    c3 = law.prob(lambda s: len(s.partition) == 1) if n == 3 else None
    d = paired_law(params).prob(lambda s: len(s.partition) == 2 and not s.pairs)
    return c2, c3, d


def pair_transition_probs(params):
    """Lumped one-step probabilities for two lineages.

    Returns ``(a_coal, a_pair, b_coal, b_disp)``: from two separate
    individuals, coalesce or become paired; from one individual, coalesce or
    disperse.
    """
    law_a = singleton_law(params, 2)
    law_b = paired_law(params)

    def coal(s):
        return len(s.partition) == 1

    return (law_a.prob(coal), law_a.prob(lambda s: bool(s.pairs)),
            law_b.prob(coal), law_b.prob(lambda s: len(s.partition) == 2 and not s.pairs))


def expected_pair_coalescence_steps(params):
    """Exact expected number of steps until two singleton lineages coalesce."""
    ac, ap, bc, bd = pair_transition_probs(params)
    # E_A = 1 + (1 - ac - ap) E_A + ap E_B ; E_B = 1 + bd E_A + (1 - bc - bd) E_B
    leave_b = bc + bd
    if ac + ap == 0:
        raise ValueError("two separate lineages never interact")
    if ap and leave_b == 0:
        raise ValueError("paired lineages never resolve")
    # substitute E_B = (1 + bd E_A) / leave_b
    if ap:
        e_a = (1 + ap / leave_b) / (ac + ap - ap * bd / leave_b)
    else:
        e_a = 1 / ac
    return e_a


def oracle_report(params_by_name: dict) -> dict:
    """Compare oracle moments with the population module's closed forms.

    Maps ``"<name>:<quantity>"`` to ``{expected, computed, abs_error}`` where
    ``expected`` is the closed form and ``computed`` the enumeration.
    """
    from .population import c2_closed_sw, c3_closed_sw, d_n

    report = {}
    for name, params in params_by_name.items():
        c2, c3, d = oracle_moments(params, 3 if params.N >= 3 else 2)
        checks = {"c2": (c2_closed_sw(params), c2), "d": (d_n(params), d)}
        if c3 is not None:
            checks["c3"] = (c3_closed_sw(params), c3)
        for q, (exp, got) in checks.items():
            report[f"{name}:{q}"] = {
                "expected": float(exp),
                "computed": float(got),
                "abs_error": float(abs(exp - got)),
            }
    return report
