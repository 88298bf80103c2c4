"""Finite-N diploid population with selfing and overlapping generations.

At every step a pair (K, P) is drawn from the demography. K children are
chosen uniformly without replacement and P potential parents uniformly
(independently, so children may be potential parents). Each child selfs with
probability alpha, taking one parent uniformly from the potential parents,
and otherwise takes an ordered pair of distinct potential parents. The order
matters downstream: gene copy 0 of an outcrossed child comes from
``parent_a`` and copy 1 from ``parent_b``.

Individuals are indexed 0..N-1 in the Python API and 1..N in text output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence, Union

import numpy as np

from .rng import as_generator, child_seed, substream

Number = Union[int, float, Fraction]

DEFAULT_CHUNK_STEPS = 4096
# rows * N bound for the random-key subset draws
_KEY_BUDGET = 1 << 22


@dataclass(frozen=True)
class SargasyanWakeley:
    """Finite joint law of (K, P) as ``(((k, p), prob), ...)``."""

    table: tuple

    def __init__(self, table):
        object.__setattr__(self, "table", tuple(((int(k), int(p)), w) for (k, p), w in table))

    def flatten(self) -> "SargasyanWakeley":
        return self


@dataclass(frozen=True)
class Mixture:
    """Finite mixture of demographies, ``((demography, prob), ...)``."""

    components: tuple

    def __init__(self, components):
        object.__setattr__(self, "components", tuple((d, w) for d, w in components))

    def flatten(self) -> SargasyanWakeley:
        merged: dict = {}
        for demo, w in self.components:
            for kp, q in demo.flatten().table:
                merged[kp] = merged.get(kp, 0) + w * q
        return SargasyanWakeley(sorted(merged.items()))


Demography = Union[SargasyanWakeley, Mixture]


@dataclass(frozen=True)
class ModelParams:
    N: int
    selfing_prob: Number
    demography: Demography

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if not 0 <= self.selfing_prob <= 1:
            raise ValueError(f"selfing probability {self.selfing_prob} outside [0, 1]")
        table = self.demography.flatten().table
        if not table:
            raise ValueError("empty demography")
        total = 0
        for (k, p), w in table:
            if not 0 <= k <= self.N:
                raise ValueError(f"k={k} outside 0..{self.N}")
            if not 2 <= p <= self.N:
                raise ValueError(f"p={p} outside 2..{self.N}")
            if w < 0:
                raise ValueError("negative probability")
            total += w
        if abs(total - 1) > 1e-12:
            raise ValueError(f"demography probabilities sum to {total}")

    @property
    def alpha(self) -> Number:
        return self.selfing_prob

    @property
    def law(self) -> tuple:
        """Flattened ``(((k, p), prob), ...)`` with zero-probability entries dropped."""
        return tuple((kp, w) for kp, w in self.demography.flatten().table if w != 0)

    @property
    def mean_K(self) -> Number:
        return sum(k * w for (k, _), w in self.law)

    def with_alpha(self, alpha: Number) -> "ModelParams":
        return ModelParams(self.N, alpha, self.demography)


# ---------------------------------------------------------------- presets

def moran(N: int, alpha: Number = 0) -> ModelParams:
    return ModelParams(N, alpha, SargasyanWakeley([((1, N), 1)]))


def wright_fisher(N: int, alpha: Number = 0) -> ModelParams:
    return ModelParams(N, alpha, SargasyanWakeley([((N, N), 1)]))


def psi_model(N: int, alpha: Number, psi: Number, rho: Number) -> ModelParams:
    """Moran steps mixed with rare sweeps in which floor(psi N) children share two potential parents."""
    big = Fraction(rho) / (N * (N - 1)) if not isinstance(rho, float) else rho / (N * (N - 1))
    if not 0 <= big <= 1:
        raise ValueError("rho too large for N")
    k = int(np.floor(float(psi) * N))
    table = [((1, N), 1 - big)]
    if big:
        table.append(((k, 2), big))
    return ModelParams(N, alpha, SargasyanWakeley(table))


def sw(N: int, alpha: Number, table) -> ModelParams:
    return ModelParams(N, alpha, SargasyanWakeley(table))


def mixture(N: int, alpha: Number, components) -> ModelParams:
    return ModelParams(N, alpha, Mixture(components))


def alpha_for_lambda(params: ModelParams, lam: float, c_N: float | None = None) -> float:
    """Selfing probability making d_N / c_N equal lam."""
    if c_N is None:
        c_N = float(c2_closed_sw(params))
    alpha = 1 - lam * params.N * c_N / float(params.mean_K)
    if not 0 <= alpha <= 1:
        raise ValueError(f"lambda={lam} gives selfing probability {alpha} outside [0, 1]")
    return alpha


# ---------------------------------------------------------------- steps

@dataclass(frozen=True)
class OffspringStep:
    """One reproduction step: children with their parent pairs (a == b for selfing)."""

    N: int
    children: np.ndarray
    parent_a: np.ndarray
    parent_b: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.children, dtype=np.int64)
        pa = np.asarray(self.parent_a, dtype=np.int64)
        pb = np.asarray(self.parent_b, dtype=np.int64)
        if not (ch.shape == pa.shape == pb.shape):
            raise ValueError("children and parents differ in length")
        if len(np.unique(ch)) != len(ch):
            raise ValueError("repeated child")
        for arr in (ch, pa, pb):
            if len(arr) and (arr.min() < 0 or arr.max() >= self.N):
                raise ValueError("individual index out of range")
        order = np.argsort(ch, kind="stable")
        object.__setattr__(self, "children", ch[order])
        object.__setattr__(self, "parent_a", pa[order])
        object.__setattr__(self, "parent_b", pb[order])

    @property
    def K(self) -> int:
        return len(self.children)

    @property
    def selfed(self) -> np.ndarray:
        return self.parent_a == self.parent_b

    @property
    def S(self) -> int:
        return int(self.selfed.sum())

    @property
    def v(self) -> np.ndarray:
        """Selfed children per parent."""
        return np.bincount(self.parent_a[self.selfed], minlength=self.N)

    @property
    def u(self) -> np.ndarray:
        """Outcrossed children per parent."""
        out = ~self.selfed
        return np.bincount(np.concatenate([self.parent_a[out], self.parent_b[out]]), minlength=self.N)

    @property
    def V_tilde(self) -> np.ndarray:
        """Gene copies contributed by each individual (sums to 2K)."""
        return 2 * self.v + self.u

    def parents_of(self, child: int):
        i = np.searchsorted(self.children, child)
        if i < self.K and self.children[i] == child:
            return int(self.parent_a[i]), int(self.parent_b[i])
        return None


def _random_subsets(rng: np.random.Generator, rows: int, N: int, k: int) -> np.ndarray:
    """rows x k array, each row a uniform k-subset of range(N)."""
    if k == N:
        return np.tile(np.arange(N), (rows, 1))
    if k == 1:
        return rng.integers(0, N, size=(rows, 1))
    out = np.empty((rows, k), dtype=np.int64)
    batch = max(1, _KEY_BUDGET // N)
    for start in range(0, rows, batch):
        stop = min(rows, start + batch)
        keys = rng.random((stop - start, N))
        out[start:stop] = np.argpartition(keys, k - 1, axis=1)[:, :k]
    return out


def _generate_steps(params: ModelParams, n_steps: int, rng: np.random.Generator):
    """Records (step, child, parent_a, parent_b) for n_steps steps, sorted by (step, child)."""
    N = params.N
    law = params.law
    alpha = float(params.alpha)
    probs = np.array([float(w) for _, w in law])
    if len(law) == 1:
        comp = np.zeros(n_steps, dtype=np.int64)
    else:
        comp = rng.choice(len(law), size=n_steps, p=probs / probs.sum())
    parts = []
    for c, ((k, p), _) in enumerate(law):
        steps = np.flatnonzero(comp == c)
        m = len(steps)
        if m == 0 or k == 0:
            continue
        children = _random_subsets(rng, m, N, k)
        selfed = rng.random((m, k)) < alpha
        i = rng.integers(0, p, size=(m, k))
        j = rng.integers(0, p - 1, size=(m, k))
        j += j >= i
        j = np.where(selfed, i, j)
        if p < N:
            pot = _random_subsets(rng, m, N, p)
            rows = np.arange(m)[:, None]
            i = pot[rows, i]
            j = pot[rows, j]
        parts.append((np.repeat(steps, k), children.ravel(), i.ravel(), j.ravel()))
    if not parts:
        e = np.empty(0, dtype=np.int64)
        return e, e, e, e
    st, ch, pa, pb = (np.concatenate(x).astype(np.int64) for x in zip(*parts))
    order = np.lexsort((ch, st))
    return st[order], ch[order], pa[order], pb[order]


def sample_step(params: ModelParams, rng) -> OffspringStep:
    st, ch, pa, pb = _generate_steps(params, 1, as_generator(rng))
    return OffspringStep(params.N, ch, pa, pb)


# ---------------------------------------------------------------- pedigree

class Pedigree:
    """Reproduction record indexed by step k = 1, 2, ... backward in time.

    Steps are generated in fixed-size chunks, chunk j from its own substream
    of the pedigree seed, so extending the pedigree never changes steps that
    already exist. A pedigree built from explicit steps has no seed and
    cannot be extended.
    """

    def __init__(self, N: int, params: ModelParams | None = None, seed: int | None = None,
                 chunk_steps: int = DEFAULT_CHUNK_STEPS):
        self.N = int(N)
        self.params = params
        self.seed = seed
        self.chunk_steps = int(chunk_steps)
        self.depth = 0
        self._chunks: list = []
        self._cache = None

    # construction
    @classmethod
    def from_steps(cls, N: int, steps: Sequence[OffspringStep]) -> "Pedigree":
        ped = cls(N)
        st = [np.full(s.K, k, dtype=np.int64) for k, s in enumerate(steps, start=1)]
        arrays = [np.concatenate(x) if x else np.empty(0, dtype=np.int64) for x in (
            st, [s.children for s in steps], [s.parent_a for s in steps], [s.parent_b for s in steps])]
        ped._chunks = [tuple(np.asarray(a, dtype=np.int64) for a in arrays)]
        ped.depth = len(steps)
        return ped

    @property
    def extendable(self) -> bool:
        return self.params is not None and self.seed is not None

    def _generated_steps(self) -> int:
        if not self.extendable:
            return self.depth
        return len(self._chunks) * self.chunk_steps

    def ensure_depth(self, depth: int) -> None:
        """Make at least ``depth`` steps available (no-op for fixed pedigrees)."""
        if depth <= self.depth:
            return
        if not self.extendable:
            return
        while self._generated_steps() < depth:
            j = len(self._chunks)
            rng = substream(self.seed, "pedigree", j)
            st, ch, pa, pb = _generate_steps(self.params, self.chunk_steps, rng)
            self._chunks.append((st + 1 + j * self.chunk_steps, ch, pa, pb))
        self.depth = depth
        self._cache = None

    # access
    def records(self):
        """Arrays (step, child, parent_a, parent_b) for steps 1..depth, sorted by (step, child)."""
        if self._cache is None:
            if self._chunks:
                st, ch, pa, pb = (np.concatenate(x) for x in zip(*self._chunks))
            else:
                st = ch = pa = pb = np.empty(0, dtype=np.int64)
            # small integer keys let numpy use a linear-time radix sort
            keys = ch.astype(np.uint16) if self.N <= 1 << 16 else ch
            order = np.argsort(keys, kind="stable")
            ptr = np.searchsorted(ch[order], np.arange(self.N + 1))
            self._cache = (st, ch, pa, pb, order.astype(np.int64), ptr.astype(np.int64))
        st, ch, pa, pb = self._cache[:4]
        keep = st <= self.depth
        return st[keep], ch[keep], pa[keep], pb[keep]

    def index(self):
        """Records plus a per-child index: ``order`` sorts records by child (then step)
        and ``ptr[h]:ptr[h+1]`` is the slice of ``order`` belonging to individual h.
        Records past ``depth`` may be present and must be filtered by step."""
        self.records()
        return self._cache

    def step(self, k: int) -> OffspringStep:
        if not 1 <= k <= self.depth:
            raise IndexError(f"step {k} outside 1..{self.depth}")
        st, ch, pa, pb = self.records()
        lo, hi = np.searchsorted(st, [k, k + 1])
        return OffspringStep(self.N, ch[lo:hi], pa[lo:hi], pb[lo:hi])

    @property
    def steps(self) -> list[OffspringStep]:
        return [self.step(k) for k in range(1, self.depth + 1)]

    def __len__(self) -> int:
        return self.depth

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pedigree) or self.N != other.N or self.depth != other.depth:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.records(), other.records()))

    # text form
    def to_text(self) -> str:
        st, ch, pa, pb = self.records()
        lines = []
        bounds = np.searchsorted(st, np.arange(1, self.depth + 2))
        for k in range(1, self.depth + 1):
            lo, hi = bounds[k - 1], bounds[k]
            items = [f"{c + 1}:{a + 1},{b + 1}" for c, a, b in zip(ch[lo:hi], pa[lo:hi], pb[lo:hi])]
            lines.append(";".join([str(k)] + items))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, N: int) -> "Pedigree":
        steps = []
        for lineno, line in enumerate(text.strip().splitlines(), start=1):
            fields = line.strip().split(";")
            if int(fields[0]) != lineno:
                raise ValueError(f"line {lineno}: expected step {lineno}, found {fields[0]}")
            ch, pa, pb = [], [], []
            for item in fields[1:]:
                c, ab = item.split(":")
                a, b = ab.split(",")
                ch.append(int(c) - 1)
                pa.append(int(a) - 1)
                pb.append(int(b) - 1)
            steps.append(OffspringStep(N, ch, pa, pb))
        return cls.from_steps(N, steps)


def build_pedigree(params: ModelParams, depth: int, rng, chunk_steps: int = DEFAULT_CHUNK_STEPS) -> Pedigree:
    """Pedigree of ``depth`` i.i.d. steps; extendable later from the same seed."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    seed = rng if isinstance(rng, (int, np.integer)) else child_seed(rng)
    ped = Pedigree(params.N, params, int(seed), chunk_steps)
    ped.ensure_depth(depth)
    return ped


# ---------------------------------------------------------------- closed forms

def c2_closed_sw(params: ModelParams) -> Number:
    """Pairwise one-step coalescence probability for a (K, P) demography."""
    N = params.N
    total = 0
    for (k, p), w in params.law:
        one_child = Fraction(k * (N - k), N * N * (N - 1))
        both = Fraction(k * (k - 1), N * (N - 1)) / (2 * p)
        total += w * (one_child + both)
    return total


def d_n(params: ModelParams) -> Number:
    """Probability that two lineages cohabiting one individual disperse in one step."""
    return (1 - params.alpha) * params.mean_K / params.N


# Mendelian factors of the triple-merger formula: a carried-over parent with
# two newborns (selfed/selfed, selfed/outcrossed, outcrossed/outcrossed) and
# three newborns sharing one parent (0..3 of them outcrossed). Three lineages
# choosing the same one of two copies has probability 2 * (1/2)^3, which the
# "exact" set uses; "printed" keeps the factors without the leading 2.
TRIPLE_CARRYOVER = (Fraction(1, 4), Fraction(1, 8), Fraction(1, 16))
TRIPLE_NEWBORN = {
    "exact": (Fraction(1, 4), Fraction(1, 8), Fraction(1, 16), Fraction(1, 32)),
    "printed": (Fraction(1, 8), Fraction(1, 16), Fraction(1, 32), Fraction(1, 64)),
}


def _newborn_coeffs(mendelian: str):
    try:
        return TRIPLE_NEWBORN[mendelian]
    except KeyError:
        raise ValueError(f"mendelian must be one of {sorted(TRIPLE_NEWBORN)}") from None


def triple_bracket(N: int, K, v, u, mendelian: str = "exact"):
    """Bracketed per-step triple-merger expression (before the 1/C(N,3) factor).

    ``K`` may be a scalar or an array of steps; ``v`` and ``u`` hold per-parent
    selfed and outcrossed child counts with the parent on the last axis.
    """
    a1, a2, a3 = (float(x) for x in TRIPLE_CARRYOVER)
    b1, b2, b3, b4 = (float(x) for x in _newborn_coeffs(mendelian))
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    c2v = v * (v - 1) / 2
    c2u = u * (u - 1) / 2
    carry = (a1 * c2v + a2 * v * u + a3 * c2u).sum(axis=-1)
    newborn = (b1 * c2v * (v - 2) / 3 + b2 * c2v * u + b3 * v * c2u + b4 * c2u * (u - 2) / 3).sum(axis=-1)
    return (N - np.asarray(K, dtype=float)) / N * carry + newborn


def c3_closed_sw(params: ModelParams, mendelian: str = "exact") -> Number:
    """Exact expectation of the triple-merger formula under a (K, P) demography.

    The parent tallies (v_i, u_i) of a fixed individual are multinomial given
    that it is a potential parent, and the carried-over factor is independent
    of them, so the expectation reduces to a finite sum.
    """
    N = params.N
    alpha = params.alpha
    one = Fraction(1) if not isinstance(alpha, float) else 1.0
    a1, a2, a3 = TRIPLE_CARRYOVER
    b1, b2, b3, b4 = _newborn_coeffs(mendelian)
    total = 0 * one
    for (k, p), w in params.law:
        ps = alpha * one / p
        po = (1 - alpha) * one * 2 / p
        pr = 1 - ps - po
        acc = 0 * one
        for v in range(k + 1):
            for u in range(k - v + 1):
                prob = comb(k, v) * comb(k - v, u) * ps**v * po**u * pr ** (k - v - u)
                if prob == 0:
                    continue
                carry = a1 * comb(v, 2) + a2 * v * u + a3 * comb(u, 2)
                newborn = b1 * comb(v, 3) + b2 * comb(v, 2) * u + b3 * v * comb(u, 2) + b4 * comb(u, 3)
                acc += prob * (Fraction(N - k, N) * carry + newborn)
        total += w * Fraction(p, N) * N * acc
    return total / comb(N, 3)


# ---------------------------------------------------------------- Monte Carlo

def _step_tallies(params: ModelParams, n_steps: int, rng):
    st, ch, pa, pb = _generate_steps(params, n_steps, rng)
    N = params.N
    K = np.bincount(st, minlength=n_steps)
    selfed = pa == pb
    v = np.bincount(st[selfed] * N + pa[selfed], minlength=n_steps * N).reshape(n_steps, N)
    out = ~selfed
    u = np.bincount(np.concatenate([st[out] * N + pa[out], st[out] * N + pb[out]]),
                    minlength=n_steps * N).reshape(n_steps, N)
    return K, v, u


def _mc(values_fn, params: ModelParams, reps: int, rng, batch: int):
    if reps < 1:
        raise ValueError("reps must be at least 1")
    rng = as_generator(rng)
    s = s2 = 0.0
    done = 0
    while done < reps:
        m = min(batch, reps - done)
        vals = values_fn(*_step_tallies(params, m, rng))
        s += vals.sum()
        s2 += (vals * vals).sum()
        done += m
    mean = s / reps
    var = max(s2 / reps - mean * mean, 0.0)
    se = np.sqrt(var / (reps - 1)) if reps > 1 else 0.0
    return mean, float(se)


def _batch(params: ModelParams) -> int:
    return max(1, min(8192, _KEY_BUDGET // params.N))


def c2_general_mc(params: ModelParams, reps: int, rng):
    """Monte Carlo estimate (mean, standard error) of the pairwise coalescence probability."""
    N = params.N

    def values(K, v, u):
        vt = 2 * v + u
        S = v.sum(axis=1)
        pair = ((vt * vt - vt).sum(axis=1) / 16 - S / 8) / comb(N, 2)
        return (N - K) * K / (N * N * (N - 1)) + pair

    return _mc(values, params, reps, rng, _batch(params))


def c3_mc(params: ModelParams, reps: int, rng, mendelian: str = "exact"):
    """Monte Carlo estimate (mean, standard error) of the triple-merger probability."""
    N = params.N
    if N < 3:
        raise ValueError("triple mergers need N >= 3")

    def values(K, v, u):
        return triple_bracket(N, K, v, u, mendelian) / comb(N, 3)

    return _mc(values, params, reps, rng, _batch(params))


def empirical_paintbox(params: ModelParams, reps: int, rng) -> np.ndarray:
    """Ranked offspring frequencies V_(i) / 2N, one row per sampled step."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    rng = as_generator(rng)
    rows = []
    done = 0
    batch = _batch(params)
    while done < reps:
        m = min(batch, reps - done)
        _, v, u = _step_tallies(params, m, rng)
        rows.append(-np.sort(-(2 * v + u), axis=1) / (2 * params.N))
        done += m
    return np.concatenate(rows)
