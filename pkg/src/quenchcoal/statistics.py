"""Branch-length SFS and empirical law comparisons."""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .genealogy import GenealogyPath


@dataclass(frozen=True, eq=False)
class SfsVector:
    """Branch lengths tau[r-1] subtending exactly r of n samples, r = 1..n-1."""

    n: int
    tau: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if tau.shape != (self.n - 1,):
            raise ValueError(f"tau must have n-1 = {self.n - 1} entries")
        if (tau < 0).any():
            raise ValueError("branch lengths must be nonnegative")
        object.__setattr__(self, "tau", tau)

    @property
    def total(self) -> float:
        return float(self.tau.sum())

    @property
    def normalized(self) -> np.ndarray:
        s = self.tau.sum()
        return self.tau / s if s > 0 else np.zeros_like(self.tau)


def integrate_block_sizes(jumps, end: float, n: int) -> np.ndarray:
    """Time each block size is present along ``jumps`` up to ``end``, indexed by size - 1."""
    tau = np.zeros(max(n - 1, 0))
    stops = [t for t, _ in jumps[1:]] + [max(end, jumps[-1][0])]
    for (t0, p), t1 in zip(jumps, stops):
        for size in p.block_sizes():
            if size < n:
                tau[size - 1] += t1 - t0
    return tau


def branch_lengths(path: GenealogyPath, n: int | None = None) -> SfsVector:
    """Integrate block-size counts over the path up to absorption (or its horizon)."""
    n = path.n if n is None else n
    if path.n != n:
        raise ValueError(f"path has {path.n} samples, expected {n}")
    if len(path.jumps[0][1]) != n:
        raise ValueError("path must start at singletons")
    end = path.jumps[-1][0] if path.absorbed else path.horizon
    return SfsVector(n, integrate_block_sizes(path.jumps, end, n), truncated=not path.absorbed)


@dataclass(frozen=True, eq=False)
class QuenchedSfs:
    """Average-then-normalize SFS over loci with jackknife standard errors."""

    n: int
    tau_mean: np.ndarray
    normalized: np.ndarray
    stderr: np.ndarray
    loci_used: int
    loci_truncated: int


def _jackknife(tau: np.ndarray) -> np.ndarray:
    L = tau.shape[0]
    if L < 2:
        return np.zeros(tau.shape[1])
    total = tau.sum(axis=0)
    loo = (total[None, :] - tau) / (L - 1)
    sums = loo.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(sums > 0, loo / sums, 0.0)
    dev = theta - theta.mean(axis=0)
    return np.sqrt((L - 1) / L * (dev ** 2).sum(axis=0))


def sfs_from_tau(tau, absorbed=None) -> QuenchedSfs:
    """:func:`quenched_sfs` on a (loci, n-1) array of branch lengths."""
    tau = np.asarray(tau, dtype=float)
    if tau.ndim != 2 or tau.shape[0] == 0:
        raise ValueError("need a non-empty (loci, n-1) array")
    keep = np.ones(tau.shape[0], bool) if absorbed is None else np.asarray(absorbed, bool)
    used = tau[keep]
    n = tau.shape[1] + 1
    if used.shape[0] == 0:
        nan = np.full(n - 1, np.nan)
        return QuenchedSfs(n, nan, nan, nan, 0, int((~keep).sum()))
    mean = used.mean(axis=0)
    s = mean.sum()
    norm = mean / s if s > 0 else np.zeros_like(mean)
    return QuenchedSfs(n, mean, norm, _jackknife(used), used.shape[0], int((~keep).sum()))


def quenched_sfs(vectors: Sequence[SfsVector]) -> QuenchedSfs:
    """Mean raw tau over non-truncated loci, then normalized; truncated loci are counted."""
    if not vectors:
        raise ValueError("empty list of SFS vectors")
    n = vectors[0].n
    if any(v.n != n for v in vectors):
        raise ValueError("all SFS vectors must share n")
    tau = np.array([v.tau for v in vectors]).reshape(len(vectors), n - 1)
    return sfs_from_tau(tau, [not v.truncated for v in vectors])


def kingman_sfs(n: int) -> np.ndarray:
    """Normalized expected SFS of the Kingman coalescent, proportional to 1/r."""
    inv = 1.0 / np.arange(1, n)
    return inv / inv.sum()


def ks_statistic(samples: Sequence[float], reference_cdf: Callable) -> float:
    """Sup-distance between the empirical CDF of ``samples`` and ``reference_cdf``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    return float(stats.kstest(x, reference_cdf).statistic)


def ks_critical(n: int, alpha: float = 1e-3) -> float:
    """One-sample KS critical value at level alpha."""
    return float(stats.kstwo.ppf(1 - alpha, n))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample")
    return float(stats.ks_2samp(a, b).statistic)


def ks_two_sample_critical(n: int, m: int, alpha: float = 1e-3) -> float:
    """Asymptotic two-sample KS critical value."""
    return float(np.sqrt(-np.log(alpha / 2) / 2) * np.sqrt((n + m) / (n * m)))


def partition_histogram(partitions) -> Counter:
    return Counter(partitions)


def partition_tv_distance(emp_a: dict, emp_b: dict) -> float:
    """Half the L1 distance between two normalized histograms over partitions of one [n]."""
    ns = {p.n for p in emp_a} | {p.n for p in emp_b}
    if len(ns) > 1:
        raise ValueError("histograms are over partitions of different n")
    ta, tb = sum(emp_a.values()), sum(emp_b.values())
    if ta <= 0 or tb <= 0:
        raise ValueError("empty histogram")
    keys = set(emp_a) | set(emp_b)
    return 0.5 * sum(abs(emp_a.get(k, 0) / ta - emp_b.get(k, 0) / tb) for k in keys)


SFS_HEADER = ["lambda", "graph_id", "r", "tau_mean", "sfs_normalized", "stderr"]


def sfs_rows(lam: float, graph_id: int, res: QuenchedSfs) -> list:
    return [[repr(float(lam)), graph_id, r, repr(float(res.tau_mean[r - 1])),
             repr(float(res.normalized[r - 1])), repr(float(res.stderr[r - 1]))]
            for r in range(1, res.n)]


def sfs_csv(blocks) -> str:
    """CSV text for ``[(lambda, graph_id, QuenchedSfs), ...]``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SFS_HEADER)
    for lam, gid, res in blocks:
        w.writerows(sfs_rows(lam, gid, res))
    return buf.getvalue()
