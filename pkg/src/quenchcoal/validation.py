"""Reference closed forms and the self-check suite behind ``quenchcoal validate``.

Each check returns a JSON-ready dict with a boolean ``passed``. The suite
runs at reduced scale; the acceptance tests run the same checks at full
scale.
"""
from __future__ import annotations

from fractions import Fraction
from math import comb

import numpy as np

from . import limit as L
from .genealogy import SampleConfig, quenched_replicates
from .oracle import oracle_moments
from .population import Pedigree, c2_closed_sw, c2_general_mc, c3_closed_sw, d_n, moran, wright_fisher
from .rng import substream
from .statistics import ks_critical, ks_statistic


# ---------------------------------------------------------------- psi-model closed forms
# Rates of the atom delta_(psi/2, psi/2) run at event rate 1, from singletons of [l].

def psi_two_mergers(l: int, k1: int, k2: int, psi: float) -> float:
    """Two simultaneous mergers of sizes k1, k2 >= 2."""
    return 2.0 ** (1 - k1 - k2) * psi ** (k1 + k2) * (1 - psi) ** (l - k1 - k2)


def psi_one_merger(l: int, k1: int, psi: float) -> float:
    """A single merger of k1 >= 2 blocks, the other s = l - k1 untouched.

    The s singletons either all miss both intervals or exactly one of them
    sits alone in the interval not used by the merger.
    """
    s = l - k1
    lone = s * (psi / 2) * (1 - psi) ** (s - 1) if s >= 1 else 0.0
    return 2 * (psi / 2) ** k1 * ((1 - psi) ** s + lone)


def psi_one_merger_printed(l: int, k1: int, psi: float) -> tuple:
    """Both printed variants of the single-merger rate (kept for comparison)."""
    s = l - k1
    try:
        first = 2 * (psi / 2) ** k1 * ((psi / 2) * (1 - psi) ** (s - 1) + (1 - psi) ** s)
    except ZeroDivisionError:
        first = float("nan")
    second = 2.0 ** (1 - k1) * (1 - psi) ** s * (2 - psi) / (2 - 2 * psi) if psi < 1 else float("nan")
    return first, second


def psi_no_change(l: int, psi: float) -> float:
    """Probability that an atom event leaves singletons of [l] unchanged."""
    return (1 - psi) ** l + l * (1 - psi) ** (l - 1) * psi + l * (l - 1) / 4 * (1 - psi) ** (l - 2) * psi ** 2


def psi_atom_rate(l: int, ks, psi: float) -> float:
    """xi_rate of the Psi preset with its Kingman part removed."""
    xi = L.preset(L.Psi(psi))
    ks = sorted(ks, reverse=True)
    rate = L.xi_rate(l, ks, l - sum(ks), xi)
    if ks == [2]:
        rate -= xi.kingman_mass
    return rate


def psi_closed_form_errors(max_b: int = 5, psis=(0.25, 0.5, 1.0), printed: bool = False) -> dict:
    """Largest gaps between xi_rate and the closed forms, keyed by form."""
    worst = {"two_mergers": 0.0, "one_merger": 0.0, "no_change": 0.0}
    for psi in psis:
        for l in range(2, max_b + 1):
            for k1 in range(2, l + 1):
                want = psi_one_merger_printed(l, k1, psi)[0] if printed else psi_one_merger(l, k1, psi)
                gap = abs(psi_atom_rate(l, [k1], psi) - want)
                worst["one_merger"] = max(worst["one_merger"], gap if gap == gap else float("inf"))
                for k2 in range(2, min(k1, l - k1) + 1):
                    got = psi_atom_rate(l, [k1, k2], psi)
                    worst["two_mergers"] = max(worst["two_mergers"], abs(got - psi_two_mergers(l, k1, k2, psi)))
            xi = L.preset(L.Psi(psi))
            atom_exit = L.exit_rate(l, xi) - comb(l, 2) * xi.kingman_mass
            worst["no_change"] = max(worst["no_change"], abs(atom_exit - (1 - psi_no_change(l, psi))))
    return worst


# ---------------------------------------------------------------- checks

ORACLE_ALPHA = Fraction(1, 3)


def oracle_models(Ns=(3, 4, 5)) -> dict:
    out = {}
    for N in Ns:
        out[f"moran-N{N}"] = moran(N, ORACLE_ALPHA)
        out[f"wright-fisher-N{N}"] = wright_fisher(N, ORACLE_ALPHA)
    return out


def check_oracle(Ns=(3, 4, 5)) -> dict:
    rows = {}
    ok = True
    for name, params in oracle_models(Ns).items():
        c2, c3, d = oracle_moments(params, 3)
        res = {
            "c2": [str(c2), str(c2_closed_sw(params))],
            "d": [str(d), str(d_n(params))],
            "c3": [str(c3), str(c3_closed_sw(params))],
        }
        good = c2 == c2_closed_sw(params) and d == d_n(params) and c3 == c3_closed_sw(params)
        rows[name] = {"values": res, "passed": bool(good)}
        ok &= good
    return {"passed": bool(ok), "models": rows}


def check_c2_mc(reps: int, seed: int, Ns=(3, 4, 5)) -> dict:
    rows = {}
    ok = True
    for i, (name, params) in enumerate(oracle_models(Ns).items()):
        mean, se = c2_general_mc(params, reps, substream(seed, "c2-mc", i))
        exact = float(c2_closed_sw(params))
        good = abs(mean - exact) <= 3 * se + 1e-12  # zero-variance models differ by rounding only
        rows[name] = {"mc": mean, "se": se, "exact": exact, "passed": bool(good)}
        ok &= good
    return {"passed": bool(ok), "models": rows}


def consistency_presets() -> dict:
    return {
        "ARG": L.preset(L.ARG()),
        "Psi(0.5)": L.preset(L.Psi(0.5)),
        "Beta(0.5,1)": L.preset(L.Beta(0.5, 1.0)),
        "SwMixture": L.preset(L.SwMixture(((0.5, 2, 1.0), (1.0, 3, 0.5)))),
    }


def check_consistency(max_b: int = 6, tol: float = 1e-9) -> dict:
    rows = {}
    for name, xi in consistency_presets().items():
        rows[name] = max(L.consistency_defect(b, xi) for b in range(2, max_b + 1))
    return {"passed": all(v <= tol for v in rows.values()), "max_defect": rows, "tol": tol}


def check_psi_forms(max_b: int = 5, tol: float = 1e-10) -> dict:
    worst = psi_closed_form_errors(max_b)
    return {"passed": all(v <= tol for v in worst.values()), "max_error": worst, "tol": tol}


def check_coupling(seeds: int, seed: int) -> dict:
    bad = 0
    for name, xi in (("ARG", L.preset(L.ARG())), ("Psi(0.5)", L.preset(L.Psi(0.5)))):
        for i in range(seeds):
            a, b = L.efc_coupled_walks(5, xi, 1.0, rng=substream(seed, "coupling", name, i))
            bad += a.jumps != b.jumps
    return {"passed": bad == 0, "mismatches": bad, "runs": 2 * seeds}


def arg_pair_times(lam: float, reps: int, seed: int) -> np.ndarray:
    """Pairwise coalescence times of walks on fresh ARG graphs."""
    xi = L.preset(L.ARG())
    out = np.empty(reps)
    for i in range(reps):
        gen = substream(seed, "arg-pair", repr(lam), i)
        g = L.simulate_graph(2, xi, lam, rng=gen)
        out[i] = L.walk_graph(g, gen).coalescence_time(1, 2)
    return out


def check_arg_exp2(reps: int, seed: int, lams=(0.0, 1.0, 10.0)) -> dict:
    rows = {}
    for lam in lams:
        t = arg_pair_times(lam, reps, seed)
        mean, se = float(t.mean()), float(t.std(ddof=1) / np.sqrt(reps))
        ks = ks_statistic(t, lambda x: 1 - np.exp(-2 * np.asarray(x)))
        crit = ks_critical(reps)
        rows[repr(lam)] = {"mean": mean, "se": se, "ks": ks, "ks_critical": crit,
                           "passed": bool(abs(mean - 0.5) <= 3 * se and ks < crit)}
    return {"passed": all(r["passed"] for r in rows.values()), "lambda": rows}


def check_selfing_degeneracy(seed: int, N: int = 40, n: int = 5, loci: int = 8) -> dict:
    params = moran(N, 1)
    ped = Pedigree(N, params, seed=seed)
    sample = SampleConfig(range(0, 2 * n, 2))
    paths = quenched_replicates(ped, sample, loci, substream(seed, "loci"), projection="haploid")
    absorbed = all(p.absorbed for p in paths)
    chains = {p.chain() for p in paths}
    return {"passed": bool(absorbed and len(chains) == 1), "distinct_chains": len(chains), "loci": loci}


def run_validation(seed: int = 1, scale: float = 1.0) -> dict:
    """Reduced-scale suite: oracle, closed forms and Monte Carlo checks."""
    reps = max(200, int(2000 * scale))
    checks = {
        "oracle_closed_forms": check_oracle((3, 4)),
        "c2_general_mc": check_c2_mc(max(1000, int(20000 * scale)), seed, (3, 4)),
        "rate_consistency": check_consistency(5),
        "psi_closed_forms": check_psi_forms(5),
        "efc_coupling": check_coupling(max(20, int(100 * scale)), seed),
        "arg_pair_time_exp2": check_arg_exp2(reps, seed),
        "selfing_single_tree": check_selfing_degeneracy(seed),
    }
    return {"passed": all(c["passed"] for c in checks.values()), "seed": seed, "checks": checks}
