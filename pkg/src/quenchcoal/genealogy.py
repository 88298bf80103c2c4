"""Mendelian coalescing walks through a fixed pedigree.

A lineage sits on one of the two gene copies of an individual. When that
individual is a child at step k, the lineage moves to its selfing parent,
or for an outcrossed child to ``parent_a`` (copy 0) or ``parent_b``
(copy 1), and then picks a fresh copy uniformly. Lineages on the same copy
of the same individual coalesce; lineages on different copies of one
individual are paired.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from math import ceil
from typing import Sequence

import numpy as np

from . import _kernels as K
from .partitions import MarkedPartition, Partition
from .population import Pedigree, c2_closed_sw
from .rng import as_generator, child_seed, substream

DEFAULT_HORIZON_UNITS = 20.0
_INITIAL_ROWS = 64


@dataclass(frozen=True)
class GenealogyPath:
    """Piecewise-constant partition path ``((time, Partition), ...)`` from (0, singletons)."""

    jumps: tuple
    horizon: float
    truncated: bool = False

    def __post_init__(self):
        jumps = tuple((float(t), p) for t, p in self.jumps)
        if not jumps or jumps[0][0] != 0.0:
            raise ValueError("a path starts at time 0")
        for (t0, _), (t1, _) in zip(jumps, jumps[1:]):
            if not t1 > t0:
                raise ValueError("jump times must be strictly increasing")
        object.__setattr__(self, "jumps", jumps)

    @property
    def n(self) -> int:
        return self.jumps[0][1].n

    @property
    def times(self) -> tuple:
        return tuple(t for t, _ in self.jumps)

    def chain(self) -> tuple:
        """The sequence of visited partitions."""
        return tuple(p for _, p in self.jumps)

    @property
    def final(self) -> Partition:
        return self.jumps[-1][1]

    @property
    def absorbed(self) -> bool:
        return len(self.final) == 1

    def partition_at(self, t: float) -> Partition:
        current = self.jumps[0][1]
        for s, p in self.jumps:
            if s > t:
                break
            current = p
        return current

    def coalescence_time(self, i: int = 1, j: int = 2) -> float:
        """First time elements i and j share a block (inf if never)."""
        for t, p in self.jumps:
            if p.block_of(i) == p.block_of(j):
                return t
        return float("inf")

    @property
    def tmrca(self) -> float:
        return self.jumps[-1][0] if self.absorbed else float("inf")

    def rows(self, locus: int) -> list:
        return [(locus, t, str(p)) for t, p in self.jumps]


def paths_to_csv(paths: Sequence[GenealogyPath]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["locus", "time", "partition"])
    for i, path in enumerate(paths):
        for locus, t, p in path.rows(i):
            w.writerow([locus, repr(t), p])
    return buf.getvalue()


def paths_from_csv(text: str, horizon: float = float("inf")) -> list[GenealogyPath]:
    rows: dict = {}
    for row in csv.DictReader(io.StringIO(text)):
        rows.setdefault(int(row["locus"]), []).append((float(row["time"]), Partition.parse(row["partition"])))
    return [GenealogyPath(tuple(rows[k]), horizon, truncated=len(rows[k][-1][1]) > 1) for k in sorted(rows)]


@dataclass(frozen=True)
class SampleConfig:
    """n distinct sampled individuals (0-based), one gene copy each."""

    individuals: tuple

    def __init__(self, individuals):
        object.__setattr__(self, "individuals", tuple(int(i) for i in individuals))
        if len(set(self.individuals)) != len(self.individuals):
            raise ValueError("sampled individuals must be distinct")
        if len(self.individuals) < 2:
            raise ValueError("need at least two sampled individuals")
        if len(self.individuals) > 64:
            raise ValueError("at most 64 sampled lineages")

    @property
    def n(self) -> int:
        return len(self.individuals)

    def check(self, N: int) -> None:
        if self.n > N or any(not 0 <= i < N for i in self.individuals):
            raise ValueError(f"sample does not fit a population of size {N}")

    @classmethod
    def random(cls, N: int, n: int, rng) -> "SampleConfig":
        return cls(sorted(as_generator(rng).choice(N, size=n, replace=False).tolist()))


@dataclass(frozen=True, eq=False)
class AncestralPath:
    """Sparse ancestral process: row r holds the state from step ``steps[r]`` on.

    Rows store block masks (canonical order), the individual and gene copy
    of each block, the block count and whether any two blocks are paired.
    The state at step k is the last row with ``steps[r] <= k``; ``depth`` is
    the last step the path covers.
    """

    n: int
    steps: np.ndarray
    masks: np.ndarray
    inds: np.ndarray
    copies: np.ndarray
    nb: np.ndarray
    paired: np.ndarray
    depth: int

    @property
    def absorbed(self) -> bool:
        return bool(self.nb[-1] == 1)

    def __len__(self) -> int:
        return len(self.steps)

    def row_state(self, r: int):
        b = int(self.nb[r])
        masks = [int(m) for m in self.masks[r, :b]]
        inds = [int(x) for x in self.inds[r, :b]]
        return MarkedPartition.from_masks(masks, self.n, inds), tuple(inds)

    def state_at(self, k: int):
        """(MarkedPartition, individual per block) at step k."""
        if not 0 <= k <= self.depth:
            raise IndexError(f"step {k} outside 0..{self.depth}")
        r = int(np.searchsorted(self.steps, k, side="right")) - 1
        return self.row_state(r)

    @property
    def states(self) -> list:
        """Dense list of states for k = 0..depth (only sensible for short paths)."""
        return [self.state_at(k) for k in range(self.depth + 1)]

    def change_steps(self) -> np.ndarray:
        return self.steps.copy()

    def dump(self) -> str:
        lines = []
        for r in range(len(self.steps)):
            st, inds = self.row_state(r)
            lines.append(f"{int(self.steps[r])}\t{st}\t{','.join(map(str, inds))}")
        return "\n".join(lines)


def _initial(sample: SampleConfig, cap: int):
    n = sample.n
    bmask = np.array([1 << i for i in range(n)], dtype=np.uint64)
    bind = np.array(sample.individuals, dtype=np.int64)
    bcopy = np.zeros(n, dtype=np.int64)
    bufs = {
        "step": np.zeros(cap, dtype=np.int64),
        "mask": np.zeros((cap, n), dtype=np.uint64),
        "ind": np.full((cap, n), -1, dtype=np.int64),
        "copy": np.zeros((cap, n), dtype=np.int64),
        "nb": np.zeros(cap, dtype=np.int64),
        "paired": np.zeros(cap, dtype=np.bool_),
    }
    bufs["mask"][0] = bmask
    bufs["ind"][0] = bind
    bufs["nb"][0] = n
    return bmask, bind, bcopy, bufs


def _grow_bufs(bufs):
    out = {}
    for key, arr in bufs.items():
        new = np.zeros((2 * arr.shape[0],) + arr.shape[1:], dtype=arr.dtype)
        if key == "ind":
            new[:] = -1
        new[:arr.shape[0]] = arr
        out[key] = new
    return out


def trace_lineages(pedigree: Pedigree, sample: SampleConfig, rng, max_depth: int | None = None) -> AncestralPath:
    """Trace the sample back through the pedigree.

    Without ``max_depth`` the walk stops at the pedigree's current depth. With
    it, an extendable pedigree is grown (doubling, from its own seed) until the
    sample coalesces or ``max_depth`` steps are covered.
    """
    limit = pedigree.depth if max_depth is None else int(max_depth)
    if pedigree.depth < 1 and limit >= 1:
        pedigree.ensure_depth(min(limit, pedigree.chunk_steps))
    if pedigree.depth < 1:
        raise ValueError("pedigree has no steps")
    sample.check(pedigree.N)
    gen = as_generator(rng)
    bmask, bind, bcopy, bufs = _initial(sample, _INITIAL_ROWS)
    nb, k, count = sample.n, 0, 1
    while True:
        st, ch, pa, pb, order, ptr = pedigree.index()
        max_step = min(pedigree.depth, limit)
        status, nb, k, count = K.trace_kernel(
            bmask, bind, bcopy, nb, k, max_step, st, pa, pb, order, ptr, gen,
            bufs["step"], bufs["mask"], bufs["ind"], bufs["copy"], bufs["nb"], bufs["paired"], count)
        if status == 2:
            bufs = _grow_bufs(bufs)
            continue
        if status == 1 and pedigree.extendable and pedigree.depth < limit:
            pedigree.ensure_depth(min(limit, max(2 * pedigree.depth, pedigree.depth + pedigree.chunk_steps)))
            continue
        break
    depth = int(k) if status == 0 else max_step
    if status == 0:
        depth = int(bufs["step"][count - 1])
    return AncestralPath(sample.n, *(bufs[key][:count].copy() for key in
                                     ("step", "mask", "ind", "copy", "nb", "paired")), depth=depth)


def time_change(path: AncestralPath) -> AncestralPath:
    """Freeze the path while any two lineages share an individual.

    The value at step k becomes the state at S(k), the last pair-free step
    up to k. In the sparse form this keeps exactly the pair-free rows.
    """
    if path.paired[0]:
        raise ValueError("the initial state must be pair-free")
    keep = ~path.paired
    return AncestralPath(path.n, path.steps[keep], path.masks[keep], path.inds[keep],
                         path.copies[keep], path.nb[keep], path.paired[keep], path.depth)


def _haploid_partition(path: AncestralPath, r: int) -> Partition:
    b = int(path.nb[r])
    merged: dict = {}
    for m, x in zip(path.masks[r, :b], path.inds[r, :b]):
        merged[int(x)] = merged.get(int(x), 0) | int(m)
    return Partition.from_masks(merged.values(), path.n)


def rescale(path: AncestralPath, c_N: float) -> GenealogyPath:
    """Map step k to time k * c_N and emit the haploid-visible partition jumps."""
    if not 0 < c_N <= 1:
        raise ValueError("c_N must lie in (0, 1]")
    jumps = [(0.0, _haploid_partition(path, 0))]
    if path.paired.any():
        rows = range(1, len(path.steps))
    else:
        # pair-free rows coarsen monotonically, so jumps are where the block count drops
        rows = np.flatnonzero(path.nb[1:] != path.nb[:-1]) + 1
    for r in rows:
        p = _haploid_partition(path, int(r))
        if p != jumps[-1][1]:
            jumps.append((float(path.steps[r]) * c_N, p))
    gp = GenealogyPath(tuple(jumps), path.depth * c_N, truncated=len(jumps[-1][1]) > 1)
    return gp


def default_c_N(pedigree: Pedigree) -> float:
    if pedigree.params is None:
        raise ValueError("c_N is required for a pedigree without model parameters")
    return float(c2_closed_sw(pedigree.params))


def quenched_replicates(pedigree: Pedigree, sample: SampleConfig, loci: int, rng,
                        c_N: float | None = None, horizon_steps: int | None = None,
                        projection: str = "time-change") -> list[GenealogyPath]:
    """Conditionally independent genealogies of ``loci`` unlinked loci on one pedigree.

    Locus i uses the substream ``(seed, "locus", i)`` with the seed drawn
    from ``rng``. ``projection="time-change"`` applies the time change before
    rescaling; ``"haploid"`` rescales the raw path and shows cohabiting
    lineages as merged. Loci that have not coalesced by ``horizon_steps``
    (default 20 / c_N) are flagged truncated.
    """
    if loci < 1:
        raise ValueError("loci must be at least 1")
    if projection not in ("time-change", "haploid"):
        raise ValueError("projection must be 'time-change' or 'haploid'")
    if c_N is None:
        c_N = default_c_N(pedigree)
    if horizon_steps is None:
        horizon_steps = int(ceil(DEFAULT_HORIZON_UNITS / c_N))
    seed = child_seed(rng)
    out = []
    for i in range(loci):
        raw = trace_lineages(pedigree, sample, substream(seed, "locus", i), max_depth=horizon_steps)
        path = time_change(raw) if projection == "time-change" else raw
        out.append(rescale(path, c_N))
    return out


def discrete_ancestral_graph(pedigree: Pedigree, sample: SampleConfig, c_N: float = 1.0,
                             max_depth: int | None = None, max_events: int | None = None):
    """All possible ancestral individuals of the sample as a node-indexed event graph.

    Nodes are individuals that may carry sample ancestry. At each step,
    tracked children are processed in ascending node order: a selfed child
    is replaced by its parent, an outcrossed child by ``parent_a`` while
    ``parent_b`` becomes the new node l+1 (a fragmentation). Nodes that end
    on one individual then coalesce. Event times are ``k * c_N``; several
    events can share a step. The sweep stops early (truncated) once
    ``max_events`` events are recorded.
    """
    from .limit import AncestralGraph, Coalescence, Fragmentation
    from .partitions import MergeSpec

    sample.check(pedigree.N)
    limit = pedigree.depth if max_depth is None else int(max_depth)
    nodes = list(sample.individuals)
    events = []
    k = 0
    while len(nodes) > 1:
        if max_events is not None and len(events) >= max_events:
            break
        st, ch, pa, pb, order, ptr = pedigree.index()
        max_step = min(pedigree.depth, limit)
        best = max_step + 1
        for h in set(nodes):
            lo, hi = ptr[h], ptr[h + 1]
            recs = order[lo:hi]
            i = np.searchsorted(st[recs], k, side="right")
            if i < len(recs):
                best = min(best, int(st[recs[i]]))
        if best > max_step:
            if pedigree.extendable and pedigree.depth < limit:
                pedigree.ensure_depth(min(limit, max(2 * pedigree.depth, pedigree.depth + pedigree.chunk_steps)))
                continue
            break
        k = best
        lo, hi = np.searchsorted(st, [k, k + 1])
        parents = {int(c): (int(a), int(b)) for c, a, b in zip(ch[lo:hi], pa[lo:hi], pb[lo:hi])}
        t = k * c_N
        for j in range(len(nodes)):
            pr = parents.get(nodes[j])
            if pr is None:
                continue
            a, b = pr
            nodes[j] = a
            if a != b:
                nodes.append(b)
                events.append((t, Fragmentation(j + 1)))
        groups: dict = {}
        for j, x in enumerate(nodes, start=1):
            groups.setdefault(x, []).append(j)
        merged = [g for g in groups.values() if len(g) > 1]
        if merged:
            spec = MergeSpec.from_groups(merged, len(nodes))
            events.append((t, Coalescence(spec)))
            nodes = [nodes[g[0] - 1] for g in spec.groups.blocks]
    status = "absorbed" if len(nodes) == 1 else "truncated"
    horizon = (k if status == "absorbed" or len(nodes) > 1 and max_events is not None
               and len(events) >= max_events else min(pedigree.depth, limit)) * c_N
    return AncestralGraph.from_events(sample.n, events, horizon, status=status)


def annealed_pair_times(params, reps: int, seed: int, c_N: float | None = None,
                        horizon_steps: int | None = None) -> np.ndarray:
    """Rescaled pairwise coalescence times, one locus on each of ``reps`` fresh pedigrees.

    Replicate i draws its pedigree seed, sample and locus from
    ``substream(seed, "replicate", i)``; inf marks truncation.
    """
    if c_N is None:
        c_N = float(c2_closed_sw(params))
    out = np.empty(reps)
    for i in range(reps):
        gen = substream(seed, "replicate", i)
        ped = Pedigree(params.N, params, seed=child_seed(gen))
        sample = SampleConfig.random(params.N, 2, gen)
        path = quenched_replicates(ped, sample, 1, gen, c_N=c_N, horizon_steps=horizon_steps)[0]
        out[i] = path.coalescence_time(1, 2)
    return out
