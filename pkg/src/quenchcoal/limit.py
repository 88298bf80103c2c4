"""Limit objects: n-Xi-coalescent rates, the Q-lambda ancestral graph and
coalescing walks on it.

Graphs are stored as lineage segments (see :func:`_kernels.simulate_graph_kernel`);
the node-indexed event view with fragmentation node indices and merge specs
is derived from them by replaying events in canonical order.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial
from typing import Sequence

import numpy as np
from scipy import integrate, special

from . import _kernels as K
from .genealogy import GenealogyPath
from .partitions import MergeSpec, Partition, set_partitions, restrict
from .rng import as_generator

DEFAULT_FRAG_CUTOFF = 10.0
DEFAULT_HORIZON = 50.0


# ---------------------------------------------------------------- Xi measures

@dataclass(frozen=True)
class XiMeasure:
    """Finite measure on the ordered simplex.

    ``kingman_mass`` is the mass at zero (pair rate), each atom is
    ``(weight, paintbox)`` and fires at rate ``weight / <x, x>``; ``beta`` is
    ``(r, rho)`` for rho times the mixture of (z^2/2) delta_(z/2, z/2) over
    z ~ Beta(2 - r, r), which fires at total rate rho.
    """

    kingman_mass: float = 0.0
    atoms: tuple = ()
    beta: tuple | None = None

    def __post_init__(self):
        if not np.isfinite(self.kingman_mass) or self.kingman_mass < 0:
            raise ValueError("kingman_mass must be finite and non-negative")
        clean = []
        for w, box in self.atoms:
            box = tuple(float(x) for x in box)
            if w < 0 or not np.isfinite(w):
                raise ValueError("atom weight must be finite and non-negative")
            if not box or any(x < 0 or x > 1 for x in box):
                raise ValueError("paintbox entries must lie in [0, 1]")
            if any(box[i] < box[i + 1] for i in range(len(box) - 1)):
                raise ValueError("paintbox must be nonincreasing")
            if sum(box) > 1 + 1e-12:
                raise ValueError("paintbox total exceeds 1")
            if w == 0:
                continue
            if sum(x * x for x in box) == 0:
                raise ValueError("atom at the zero paintbox; use kingman_mass")
            clean.append((float(w), box))
        object.__setattr__(self, "atoms", tuple(clean))
        if self.beta is not None:
            r, rho = (float(x) for x in self.beta)
            if not 0 <= r <= 1 or rho < 0:
                raise ValueError("beta component needs r in [0, 1] and rho >= 0")
            object.__setattr__(self, "beta", None if rho == 0 else (r, rho))

    @property
    def total_mass(self) -> float:
        mass = self.kingman_mass + sum(w for w, _ in self.atoms)
        if self.beta is not None:
            r, rho = self.beta
            # rho * E[z^2 / 2] under Beta(2 - r, r)
            a = 2 - r
            mass += rho * a * (a + 1) / (2 * 2 * 3) if r > 0 else rho / 2
        return mass

    def scaled(self, c: float) -> "XiMeasure":
        if c < 0:
            raise ValueError("scale must be non-negative")
        beta = None if self.beta is None else (self.beta[0], c * self.beta[1])
        return XiMeasure(c * self.kingman_mass, tuple((c * w, b) for w, b in self.atoms), beta)

    def __add__(self, other: "XiMeasure") -> "XiMeasure":
        if self.beta is not None and other.beta is not None:
            if self.beta[0] != other.beta[0]:
                raise ValueError("cannot combine two beta components with different r")
            beta = (self.beta[0], self.beta[1] + other.beta[1])
        else:
            beta = self.beta or other.beta
        return XiMeasure(self.kingman_mass + other.kingman_mass, self.atoms + other.atoms, beta)

    def kernel_args(self):
        """Flat arrays consumed by the numba kernels."""
        A = len(self.atoms)
        L = max([len(b) for _, b in self.atoms], default=1)
        rates = np.zeros(A)
        cum = np.zeros((max(A, 1), L))
        lens = np.zeros(max(A, 0), dtype=np.int64)
        for i, (w, box) in enumerate(self.atoms):
            rates[i] = w / sum(x * x for x in box)
            cum[i, :len(box)] = np.cumsum(box)
            lens[i] = len(box)
        beta_rate, beta_r = (0.0, 1.0) if self.beta is None else (self.beta[1], self.beta[0])
        return float(self.kingman_mass), rates, cum, lens, float(beta_rate), float(beta_r)


# presets ---------------------------------------------------------------

@dataclass(frozen=True)
class ARG:
    lam: float = 0.0


@dataclass(frozen=True)
class Psi:
    psi: float
    rho: float = 0.0
    lam: float = 0.0


@dataclass(frozen=True)
class Beta:
    r: float
    rho: float
    lam: float = 0.0


@dataclass(frozen=True)
class SwMixture:
    """mu as ``((x, m, weight), ...)``: weight on x split evenly over m parents."""

    mu: tuple
    lam: float = 0.0


@dataclass(frozen=True)
class Mixed:
    """Linear combination ``((measure_or_preset, scale), ...)``."""

    parts: tuple
    lam: float = 0.0


def _check_lam(lam):
    if lam < 0 or not np.isfinite(lam):
        raise ValueError("lambda must be finite and non-negative")


def preset(kind) -> XiMeasure:
    """Coalescence measure of a named preset (lambda stays on the preset)."""
    _check_lam(kind.lam)
    if isinstance(kind, ARG):
        return XiMeasure(2.0)
    if isinstance(kind, Psi):
        if not 0 <= kind.psi <= 1:
            raise ValueError("psi must lie in [0, 1]")
        if kind.rho < 0:
            raise ValueError("rho must be non-negative")
        half = kind.psi / 2
        atoms = ((kind.psi**2 / 2, (half, half)),) if kind.psi > 0 else ()
        return XiMeasure(2.0, atoms)
    if isinstance(kind, Beta):
        if not 0 <= kind.r <= 1 or kind.rho < 0:
            raise ValueError("Beta preset needs r in [0, 1] and rho >= 0")
        return XiMeasure(2.0, (), (kind.r, kind.rho))
    if isinstance(kind, SwMixture):
        atoms = []
        mass = 0.0
        for x, m, w in kind.mu:
            if not 0 < x <= 1 or int(m) != m or m < 1 or w < 0:
                raise ValueError("SwMixture entries need x in (0, 1], integer m >= 1, weight >= 0")
            m = int(m)
            mass += x * x / m * w
            atoms.append((2 * x * x / m * w, (x / m,) * m))
        if mass > 1 + 1e-12:
            raise ValueError("SwMixture mass exceeds 1")
        return XiMeasure(2 * max(0.0, 1 - mass), tuple(atoms))
    if isinstance(kind, Mixed):
        total = XiMeasure()
        for part, scale in kind.parts:
            meas = part if isinstance(part, XiMeasure) else preset(part)
            total = total + meas.scaled(scale)
        return total
    raise ValueError(f"unknown preset {kind!r}")


# ---------------------------------------------------------------- rates

def _paintbox_sum(box: Sequence[float], ks: Sequence[int], s: int) -> float:
    """Probability that a paintbox throw realizes a given merger of type (ks; s).

    Groups i = 1..r must land in distinct intervals (all members of group i
    in interval j_i, probability x_j^{k_i}); each of the s singletons lands
    outside [0, |x|) or alone in an interval not used by anyone else.
    """
    r = len(ks)
    total = sum(box)
    full = (1 << r) - 1
    out = 0.0
    for lone in range(s + 1):
        # dp[mask][j]: groups in mask placed, j of the `lone` singletons placed,
        # summed over distinct ordered interval choices
        dp = np.zeros((1 << r, lone + 1))
        dp[0, 0] = 1.0
        for x in box:
            if x == 0:
                continue
            new = dp.copy()
            pw = [x**k for k in ks]
            for mask in range(1 << r):
                for j in range(lone + 1):
                    val = dp[mask, j]
                    if val == 0:
                        continue
                    for g in range(r):
                        if not mask >> g & 1:
                            new[mask | 1 << g, j] += val * pw[g]
                    if j < lone:
                        new[mask, j + 1] += val * x * (lone - j)
            dp = new
        out += comb(s, lone) * (1 - total) ** (s - lone) * dp[full, lone]
    return out


def _beta_term(r: float, rho: float, ks: tuple, s: int) -> float:
    if rho == 0:
        return 0.0
    if r == 0:
        return rho * _paintbox_sum((0.5, 0.5), ks, s)

    def f(z):
        return _paintbox_sum((z / 2, z / 2), ks, s)

    val, _ = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(1 - r, r - 1),
                            epsabs=1e-13, epsrel=1e-11, limit=200)
    return rho * val / special.beta(2 - r, r)


def _validate_type(b: int, merge_sizes: Sequence[int], s: int) -> tuple:
    ks = tuple(sorted((int(k) for k in merge_sizes), reverse=True))
    if b < 1 or s < 0:
        raise ValueError("need b >= 1 and s >= 0")
    if any(k < 2 for k in ks):
        raise ValueError("merge sizes must be at least 2")
    if sum(ks) + s != b:
        raise ValueError(f"merge sizes {ks} plus {s} singletons do not sum to b={b}")
    return ks


@lru_cache(maxsize=None)
def _xi_rate_cached(b: int, ks: tuple, s: int, xi: XiMeasure) -> float:
    rate = xi.kingman_mass if (len(ks) == 1 and ks[0] == 2) else 0.0
    for w, box in xi.atoms:
        rate += w / sum(x * x for x in box) * _paintbox_sum(box, ks, s)
    if xi.beta is not None:
        rate += _beta_term(xi.beta[0], xi.beta[1], ks, s)
    return rate


def exit_rate(b: int, xi: XiMeasure) -> float:
    """Total rate of leaving the singletons of [b], summed over merger types."""
    total = 0.0
    for ks, s, mult in merger_types(b):
        total += mult * _xi_rate_cached(b, ks, s, xi)
    return total


def merger_types(b: int):
    """All (ks, s, multiplicity) with at least one merger among b blocks."""
    out = []

    def parts(rem, maxk):
        if rem == 0:
            yield ()
            return
        for k in range(min(rem, maxk), 1, -1):
            for rest in parts(rem - k, k):
                yield (k,) + rest

    for merged in range(2, b + 1):
        for ks in parts(merged, merged):
            s = b - merged
            mult = factorial(b) // factorial(s)
            for k in ks:
                mult //= factorial(k)
            for k in set(ks):
                mult //= factorial(ks.count(k))
            out.append((ks, s, mult))
    return out


def xi_rate(b: int, merge_sizes: Sequence[int], s: int, xi: XiMeasure) -> float:
    """Rate at which b blocks undergo one specific merger with the given group sizes.

    An empty ``merge_sizes`` (so s = b) denotes the identity and returns the
    diagonal generator entry, minus the total exit rate.
    """
    ks = _validate_type(b, merge_sizes, s)
    if not ks:
        return -exit_rate(b, xi)
    return _xi_rate_cached(b, ks, s, xi)


def transition_rate(src: Partition, dst: Partition, xi: XiMeasure) -> float:
    """Generator entry Q(src, dst) of the n-Xi-coalescent on partitions of [n]."""
    if src.n != dst.n:
        raise ValueError("partitions of different sets")
    if not src.is_finer_than(dst):
        return 0.0
    sizes = []
    for d in dst.masks:
        sizes.append(sum(1 for m in src.masks if m & d))
    ks = [k for k in sizes if k >= 2]
    s = sum(1 for k in sizes if k == 1)
    return xi_rate(len(src), ks, s, xi)


def rate_matrix(n: int, xi: XiMeasure):
    """(states, Q) over all partitions of [n]."""
    states = list(set_partitions(n))
    Q = np.zeros((len(states), len(states)))
    for i, a in enumerate(states):
        for j, c in enumerate(states):
            Q[i, j] = transition_rate(a, c, xi)
    return states, Q


def consistency_defect(b: int, xi: XiMeasure) -> float:
    """Max entrywise gap between the restriction push-forward of Q_b and Q_{b-1}."""
    big, Qb = rate_matrix(b, xi)
    small, Qs = rate_matrix(b - 1, xi)
    index = {p: i for i, p in enumerate(small)}
    proj = np.array([index[restrict(p, b - 1)] for p in big])
    worst = 0.0
    for i, src in enumerate(big):
        pushed = np.zeros(len(small))
        np.add.at(pushed, proj, Qb[i])
        worst = max(worst, float(np.max(np.abs(pushed - Qs[proj[i]]))))
    return worst


# ---------------------------------------------------------------- graphs

@dataclass(frozen=True)
class Fragmentation:
    node: int

    def __str__(self):
        return str(self.node)


@dataclass(frozen=True)
class Coalescence:
    spec: MergeSpec

    def __str__(self):
        return str(self.spec)


@dataclass(frozen=True, eq=False)
class AncestralGraph:
    """Event-timed Q-lambda graph stored as lineage segments.

    ``lin_end[x]`` is the event ending lineage x (-1 if alive at the end);
    a fragmentation continues x on ``next_a[x]`` (same node) and
    ``next_b[x]`` (new node), a coalescence continues on ``next_a[x]``.
    Lineages 0..n0-1 are the initial nodes.
    """

    n0: int
    times: np.ndarray
    kinds: np.ndarray
    lin_end: np.ndarray
    next_a: np.ndarray
    next_b: np.ndarray
    horizon: float
    frag_cutoff: float
    status: str = "absorbed"
    _replay: list = field(default_factory=list, repr=False, compare=False)

    @property
    def absorbed(self) -> bool:
        return self.status == "absorbed"

    @property
    def truncated(self) -> bool:
        return self.status == "truncated"

    @property
    def n_events(self) -> int:
        return len(self.times)

    def _replayed(self):
        if not self._replay:
            self._replay.append(_replay(self))
        return self._replay[0]

    @property
    def events(self) -> list:
        """``[(time, Fragmentation(m) | Coalescence(spec)), ...]`` in node-index form."""
        return self._replayed()[0]

    def states(self) -> list:
        """``[(time, l, m, xi), ...]`` starting at (0, n0, 0, singletons)."""
        return self._replayed()[1]

    def node_count(self) -> np.ndarray:
        """l after each event."""
        E = self.n_events
        ends = self.lin_end >= 0
        born = np.full(len(self.lin_end), -1, dtype=np.int64)
        born[self.next_a[ends]] = self.lin_end[ends]
        frag = ends & (self.next_b >= 0)
        born[self.next_b[frag]] = self.lin_end[frag]
        created = np.bincount(born[born >= 0], minlength=E)
        ended = np.bincount(self.lin_end[ends], minlength=E)
        return self.n0 + np.cumsum(created - ended)

    def coalescence_sequence(self) -> list:
        """Partition of the initial nodes by current node, at every coalescence."""
        return self._replayed()[2]

    @classmethod
    def from_events(cls, n0: int, events: Sequence, horizon: float, frag_cutoff: float = np.inf,
                    status: str | None = None) -> "AncestralGraph":
        """Build from node-index events (inverse of :attr:`events`)."""
        order = list(range(n0))
        lin_end, next_a, next_b = [-1] * n0, [-1] * n0, [-1] * n0
        times, kinds = [], []
        last = 0.0

        def new():
            lin_end.append(-1)
            next_a.append(-1)
            next_b.append(-1)
            return len(lin_end) - 1

        for e, (t, ev) in enumerate(events):
            if t < last:
                raise ValueError("event times must be non-decreasing")
            last = t
            times.append(float(t))
            l = len(order)
            if isinstance(ev, Fragmentation):
                if not 1 <= ev.node <= l:
                    raise ValueError(f"fragmentation of node {ev.node} with {l} nodes")
                x = order[ev.node - 1]
                y, z = new(), new()
                lin_end[x], next_a[x], next_b[x] = e, y, z
                order[ev.node - 1] = y
                order.append(z)
                kinds.append(0)
            elif isinstance(ev, Coalescence):
                if ev.spec.b != l:
                    raise ValueError(f"merge spec over {ev.spec.b} nodes with {l} nodes")
                new_order = []
                for group in ev.spec.groups.blocks:
                    if len(group) == 1:
                        new_order.append(order[group[0] - 1])
                        continue
                    w = new()
                    for i in group:
                        x = order[i - 1]
                        lin_end[x], next_a[x] = e, w
                    new_order.append(w)
                order = new_order
                kinds.append(1)
            else:
                raise ValueError(f"unknown event {ev!r}")
        if status is None:
            status = "absorbed" if len(order) == 1 else "truncated"
        arr = lambda a: np.asarray(a, dtype=np.int64)
        return cls(n0, np.asarray(times, dtype=float), arr(kinds), arr(lin_end), arr(next_a),
                   arr(next_b), float(horizon), float(frag_cutoff), status)

    def to_csv(self, max_events: int | None = None, prefix: Sequence = ()) -> str:
        """CSV ``event_index,time,kind,detail`` (optionally preceded by key columns)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for i, (t, ev) in enumerate(self.events):
            if max_events is not None and i >= max_events:
                break
            kind = "fragmentation" if isinstance(ev, Fragmentation) else "coalescence"
            w.writerow([*prefix, i, repr(float(t)), kind, str(ev)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n0: int, horizon: float, frag_cutoff: float = np.inf) -> "AncestralGraph":
        events = []
        for row in csv.reader(io.StringIO(text)):
            if not row or row[0] == "event_index":
                continue
            _, t, kind, detail = row
            ev = Fragmentation(int(detail)) if kind == "fragmentation" else Coalescence(MergeSpec.parse(detail))
            events.append((float(t), ev))
        return cls.from_events(n0, events, horizon, frag_cutoff)


def _replay(g: AncestralGraph):
    n_lin = len(g.lin_end)
    ended = np.argsort(g.lin_end, kind="stable")
    ends = g.lin_end[ended]
    start = np.searchsorted(ends, np.arange(g.n_events + 1))
    order = list(range(g.n0))
    members = [1 << i for i in range(g.n0)]  # initial nodes carried by each current node
    m = 0
    xi = Partition.singletons(g.n0) if g.n0 else None
    events, states, coal = [], [(0.0, g.n0, 0, xi)], []
    pos = {x: i for i, x in enumerate(order)}
    for e in range(g.n_events):
        t = float(g.times[e])
        inputs = ended[start[e]:start[e + 1]]
        if g.kinds[e] == 0:
            x = int(inputs[0])
            idx = pos.pop(x)
            order[idx] = int(g.next_a[x])
            order.append(int(g.next_b[x]))
            pos[order[idx]] = idx
            pos[order[-1]] = len(order) - 1
            members.append(0)
            m = idx + 1
            events.append((t, Fragmentation(idx + 1)))
            states.append((t, len(order), m, xi))
            continue
        groups: dict = {}
        for x in inputs:
            groups.setdefault(int(g.next_a[x]), []).append(pos[int(x)] + 1)
        spec = MergeSpec.from_groups(groups.values(), len(order))
        new_order, new_members = [], []
        new_m = m
        for j, group in enumerate(spec.groups.blocks, start=1):
            if m in group:
                new_m = j
            if len(group) == 1:
                new_order.append(order[group[0] - 1])
                new_members.append(members[group[0] - 1])
            else:
                new_order.append(int(g.next_a[order[group[0] - 1]]))
                mm = 0
                for i in group:
                    mm |= members[i - 1]
                new_members.append(mm)
        order, members, m = new_order, new_members, new_m
        pos = {x: i for i, x in enumerate(order)}
        xi = spec.groups
        events.append((t, Coalescence(spec)))
        states.append((t, len(order), m, xi))
        carried = [mm for mm in members if mm]
        coal.append((t, Partition.from_masks(carried, g.n0)))
    return events, states, coal


_STATUS = {1: "absorbed", 2: "truncated", 3: "stalled"}


def simulate_graph(n: int, xi: XiMeasure, lam: float, frag_cutoff: float = DEFAULT_FRAG_CUTOFF,
                   horizon: float = DEFAULT_HORIZON, rng=None) -> AncestralGraph:
    """Simulate a Q-lambda ancestral graph started from n nodes."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    _check_lam(lam)
    gen = as_generator(rng)
    times, kinds, lin_end, na, nb, _, status = K.simulate_graph_kernel(
        n, float(lam), float(frag_cutoff), float(horizon), *xi.kernel_args(), gen)
    return AncestralGraph(n, times, kinds, lin_end, na, nb, float(horizon), float(frag_cutoff),
                          _STATUS[int(status)])


def _path_from_walk(n, jt, jl, nj, absorbed, horizon) -> GenealogyPath:
    jumps = [(0.0, Partition.singletons(n))]
    for j in range(nj):
        jumps.append((float(jt[j]), Partition.from_labels(jl[j])))
    return GenealogyPath(tuple(jumps), float(horizon), truncated=not absorbed)


def walk_graph(graph: AncestralGraph, rng, n: int | None = None) -> GenealogyPath:
    """Coalescing walks started on the first n (default all) initial nodes."""
    n = graph.n0 if n is None else n
    if not 1 <= n <= graph.n0:
        raise ValueError("n must lie in 1..n0")
    gen = as_generator(rng)
    jt, jl, nj, absorbed = K.walk_kernel(n, graph.times, graph.lin_end, graph.next_a,
                                         graph.next_b, gen)
    return _path_from_walk(n, jt, jl, nj, absorbed, graph.horizon)


def walk_many(graph: AncestralGraph, loci: int, rng) -> list[GenealogyPath]:
    """``loci`` independent walks on one frozen graph."""
    gen = as_generator(rng)
    return [walk_graph(graph, gen) for _ in range(loci)]


def stream_sfs(n: int, xi: XiMeasure, lam: float, loci: int, frag_cutoff: float = DEFAULT_FRAG_CUTOFF,
               horizon: float = DEFAULT_HORIZON, rng=None):
    """Branch lengths of ``loci`` walks on one freshly simulated graph.

    The graph is generated on the fly and never stored, so memory stays
    bounded for large lambda. Returns (tau[loci, n-1], tmrca[loci], absorbed[loci]).
    """
    if n < 1 or loci < 1:
        raise ValueError("n and loci must be positive")
    _check_lam(lam)
    gen = as_generator(rng)
    return K.sfs_kernel(n, loci, float(lam), float(frag_cutoff), float(horizon), *xi.kernel_args(), gen)


# ---------------------------------------------------------------- EFC coupling

def efc_coupled_walks(n: int, xi: XiMeasure, lam: float, horizon: float = DEFAULT_HORIZON, rng=None,
                      frag_cutoff: float = np.inf):
    """Drive a Q-lambda graph with walks and an EFC with tracked blocks from one event stream.

    Graph side: nodes 1..l in canonical order, a fragmenting node m gains
    the new node l+1 and walks at m follow one shared fair bit; after a
    coalescence nodes are renumbered by least merged index. EFC side: tracked
    blocks carry integer labels, a fragmenting block hands a fresh label to
    its split-off part and a merged block keeps its least label. Events are
    indexed through the rank of labels, which is how the two descriptions
    are coupled. Returns both partition paths of the n walks.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_lam(lam)
    gen = as_generator(rng)
    kargs = xi.kernel_args()
    extra = K._scratch(kargs[3])
    # graph side
    l = n
    walks_g = list(range(1, n + 1))
    # EFC side
    labels = list(range(1, n + 1))      # label of each tracked block, sorted
    next_label = n + 1
    walks_e = list(range(1, n + 1))     # label of each particle's block
    path_g = [(0.0, Partition.singletons(n))]
    path_e = [(0.0, Partition.singletons(n))]
    t = 0.0
    truncated = False
    scratch = np.empty(4 * n + extra, dtype=np.int64)
    while True:
        if len(set(walks_g)) == 1 and len(set(walks_e)) == 1:
            break
        if scratch.shape[0] < l + extra:
            scratch = np.empty(2 * (l + extra), dtype=np.int64)
        t, kind, a, b = K.draw_event(gen, t, l, float(lam), float(frag_cutoff), *kargs, scratch)
        if kind == K.NO_EVENT or t > horizon:
            truncated = True
            break
        if kind == K.FRAG:
            bit = gen.random() < 0.5
            m = a + 1
            # graph: walks at m move to l+1 together
            if bit:
                walks_g = [l + 1 if x == m else x for x in walks_g]
            l += 1
            # EFC: block with rank m splits, fresh label for the split-off part
            lab = labels[m - 1]
            new = next_label
            next_label += 1
            labels.append(new)
            if bit:
                walks_e = [new if x == lab else x for x in walks_e]
            continue
        if kind == K.PAIR:
            groups = [[a + 1, b + 1]]
        else:
            by: dict = {}
            for p in range(l):
                g = int(scratch[p])
                if g >= 0:
                    by.setdefault(g, []).append(p + 1)
            groups = [grp for grp in by.values() if len(grp) >= 2]
        spec = MergeSpec.from_groups(groups, l)
        # graph side: renumber nodes by merge-spec blocks
        new_index = {}
        for j, group in enumerate(spec.groups.blocks, start=1):
            for i in group:
                new_index[i] = j
        walks_g = [new_index[x] for x in walks_g]
        l = len(spec.groups)
        # EFC side: merged blocks keep the least label
        relabel = {}
        for group in spec.groups.blocks:
            labs = [labels[i - 1] for i in group]
            keep = min(labs)
            for x in labs:
                relabel[x] = keep
        walks_e = [relabel[x] for x in walks_e]
        labels = sorted(set(relabel.values()))
        pg = Partition.from_labels(walks_g)
        pe = Partition.from_labels(walks_e)
        if pg != path_g[-1][1]:
            path_g.append((t, pg))
        if pe != path_e[-1][1]:
            path_e.append((t, pe))
    return (GenealogyPath(tuple(path_g), float(horizon), truncated=truncated),
            GenealogyPath(tuple(path_e), float(horizon), truncated=truncated))
