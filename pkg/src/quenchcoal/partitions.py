"""Partitions of [n] and marked partitions.

Blocks are stored as integer bitmasks (bit ``i-1`` is element ``i``) and kept
in canonical order, ascending by least element. All block indices used
elsewhere in the package are 1-based positions in this order.
"""
from __future__ import annotations

import re
from typing import Iterable, Iterator, Sequence


def _lowbit(mask: int) -> int:
    return mask & -mask


def _elements(mask: int) -> tuple[int, ...]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


class Partition:
    """A partition of {1..n} with blocks in canonical order."""

    __slots__ = ("n", "masks")

    def __init__(self, blocks: Iterable[Iterable[int]], n: int | None = None):
        masks = []
        seen = 0
        top = 0
        for block in blocks:
            m = 0
            for e in block:
                e = int(e)
                if e < 1:
                    raise ValueError(f"element {e} is not a positive integer")
                if (seen | m) >> (e - 1) & 1:
                    raise ValueError(f"element {e} appears twice")
                m |= 1 << (e - 1)
                top = max(top, e)
            if m == 0:
                raise ValueError("empty block")
            seen |= m
            masks.append(m)
        if n is None:
            n = top
        self._init(tuple(masks), n)

    def _init(self, masks: tuple[int, ...], n: int) -> None:
        if n < 1:
            raise ValueError(f"n={n} must be positive")
        total = 0
        for m in masks:
            total |= m
        if total != (1 << n) - 1 or sum(m.bit_count() for m in masks) != n:
            raise ValueError("blocks do not partition {1..%d}" % n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "masks", tuple(sorted(masks, key=_lowbit)))

    def __setattr__(self, name, value):
        raise AttributeError("Partition is immutable")

    @classmethod
    def from_masks(cls, masks: Iterable[int], n: int) -> "Partition":
        obj = object.__new__(cls)
        obj._init(tuple(int(m) for m in masks), n)
        return obj

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "Partition":
        """Build from a label per element (element i+1 has label labels[i])."""
        groups: dict[int, int] = {}
        for i, lab in enumerate(labels):
            groups[lab] = groups.get(lab, 0) | (1 << i)
        return cls.from_masks(groups.values(), len(labels))

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls.from_masks([1 << i for i in range(n)], n)

    @classmethod
    def one_block(cls, n: int) -> "Partition":
        return cls.from_masks([(1 << n) - 1], n)

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        return tuple(_elements(m) for m in self.masks)

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self.blocks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.n == other.n and self.masks == other.masks

    def __hash__(self) -> int:
        return hash((self.n, self.masks))

    def __repr__(self) -> str:
        return f"Partition({self})"

    def __str__(self) -> str:
        return "{" + "|".join(",".join(map(str, b)) for b in self.blocks) + "}"

    def block_sizes(self) -> tuple[int, ...]:
        return tuple(m.bit_count() for m in self.masks)

    def labels(self) -> tuple[int, ...]:
        """Block index (1-based) of each element."""
        out = [0] * self.n
        for j, m in enumerate(self.masks, start=1):
            for e in _elements(m):
                out[e - 1] = j
        return tuple(out)

    def block_of(self, element: int) -> int:
        bit = 1 << (element - 1)
        for j, m in enumerate(self.masks, start=1):
            if m & bit:
                return j
        raise ValueError(f"element {element} not in [{self.n}]")

    def is_finer_than(self, other: "Partition") -> bool:
        """True if every block of self lies inside a block of other."""
        if self.n != other.n:
            return False
        return all(any(m & o == m for o in other.masks) for m in self.masks)

    def restrict(self, m: int) -> "Partition":
        return restrict(self, m)

    def coagulate(self, spec: "MergeSpec") -> "Partition":
        return coagulate(self, spec)

    @classmethod
    def parse(cls, text: str) -> "Partition":
        text = text.strip()
        if not (text.startswith("{") and text.endswith("}")):
            raise ValueError(f"cannot parse partition {text!r}")
        body = text[1:-1]
        if not body:
            raise ValueError("empty partition")
        return cls([[int(x) for x in b.split(",")] for b in body.split("|")])


class MergeSpec:
    """Assignment of the current blocks 1..b to merge groups.

    Stored as a partition of the block indices: indices sharing a group are
    merged, singleton groups are left untouched.
    """

    __slots__ = ("groups",)

    def __init__(self, groups: Partition):
        object.__setattr__(self, "groups", groups)

    def __setattr__(self, name, value):
        raise AttributeError("MergeSpec is immutable")

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[int]], b: int) -> "MergeSpec":
        listed = [tuple(g) for g in groups]
        used = {i for g in listed for i in g}
        rest = [(i,) for i in range(1, b + 1) if i not in used]
        return cls(Partition(listed + rest, n=b))

    @classmethod
    def identity(cls, b: int) -> "MergeSpec":
        return cls(Partition.singletons(b))

    @property
    def b(self) -> int:
        return self.groups.n

    def merged_groups(self) -> tuple[tuple[int, ...], ...]:
        return tuple(g for g in self.groups.blocks if len(g) > 1)

    def is_identity(self) -> bool:
        return len(self.groups) == self.groups.n

    def __eq__(self, other) -> bool:
        return isinstance(other, MergeSpec) and self.groups == other.groups

    def __hash__(self) -> int:
        return hash(("merge", self.groups))

    def __str__(self) -> str:
        return str(self.groups)

    def __repr__(self) -> str:
        return f"MergeSpec({self.groups})"

    @classmethod
    def parse(cls, text: str) -> "MergeSpec":
        return cls(Partition.parse(text))


_MARK_RE = re.compile(r"^(\{[^}]*\})(?:\[(.*)\])?$")


class MarkedPartition:
    """A partition together with disjoint pairs of blocks sharing an individual."""

    __slots__ = ("partition", "pairs")

    def __init__(self, partition: Partition, pairs: Iterable[tuple[int, int]] = ()):
        b = len(partition)
        norm = set()
        used = set()
        for p in pairs:
            i, j = sorted(int(x) for x in p)
            if i == j or i < 1 or j > b:
                raise ValueError(f"invalid pair {p} for {b} blocks")
            if i in used or j in used:
                raise ValueError("a block appears in two pairs")
            used.update((i, j))
            norm.add((i, j))
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "pairs", frozenset(norm))

    def __setattr__(self, name, value):
        raise AttributeError("MarkedPartition is immutable")

    @classmethod
    def from_masks(cls, masks: Sequence[int], n: int, hosts: Sequence) -> "MarkedPartition":
        """Build from block masks and a host label per block; equal hosts are paired."""
        order = sorted(range(len(masks)), key=lambda j: _lowbit(masks[j]))
        part = Partition.from_masks([masks[j] for j in order], n)
        by_host: dict = {}
        for pos, j in enumerate(order, start=1):
            by_host.setdefault(hosts[j], []).append(pos)
        pairs = []
        for group in by_host.values():
            if len(group) == 2:
                pairs.append(tuple(group))
            elif len(group) > 2:
                raise ValueError("more than two blocks in one individual")
        return cls(part, pairs)

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def num_pairs(self) -> int:
        return len(self.pairs)

    def is_pair_free(self) -> bool:
        return not self.pairs

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarkedPartition):
            return NotImplemented
        return self.partition == other.partition and self.pairs == other.pairs

    def __hash__(self) -> int:
        return hash((self.partition, self.pairs))

    def __str__(self) -> str:
        s = str(self.partition)
        if self.pairs:
            s += "[" + ",".join(f"({i},{j})" for i, j in sorted(self.pairs)) + "]"
        return s

    def __repr__(self) -> str:
        return f"MarkedPartition({self})"

    @classmethod
    def parse(cls, text: str) -> "MarkedPartition":
        m = _MARK_RE.match(text.strip())
        if m is None:
            raise ValueError(f"cannot parse marked partition {text!r}")
        part = Partition.parse(m.group(1))
        pairs = []
        if m.group(2):
            for i, j in re.findall(r"\((\d+),(\d+)\)", m.group(2)):
                pairs.append((int(i), int(j)))
        return cls(part, pairs)


def haploid_map(xi: MarkedPartition | Partition) -> Partition:
    """Merge every pair of cohabiting blocks."""
    if isinstance(xi, Partition):
        return xi
    masks = list(xi.partition.masks)
    for i, j in xi.pairs:
        masks[i - 1] |= masks[j - 1]
        masks[j - 1] = 0
    return Partition.from_masks([m for m in masks if m], xi.n)


def restrict(xi: Partition, m: int) -> Partition:
    """Restriction of a partition of [n] to [m]."""
    if not 1 <= m <= xi.n:
        raise ValueError(f"m={m} outside 1..{xi.n}")
    keep = (1 << m) - 1
    return Partition.from_masks([b & keep for b in xi.masks if b & keep], m)


def coagulate(xi: Partition, spec: MergeSpec) -> Partition:
    """Union the blocks of xi that share a group of spec."""
    if spec.b != len(xi):
        raise ValueError(f"merge spec covers {spec.b} blocks, partition has {len(xi)}")
    out = []
    for group in spec.groups.blocks:
        m = 0
        for j in group:
            m |= xi.masks[j - 1]
        out.append(m)
    return Partition.from_masks(out, xi.n)


def set_partitions(n: int) -> Iterator[Partition]:
    """All partitions of [n] via restricted growth strings."""
    if n < 1:
        raise ValueError("n must be positive")
    labels = [0] * n

    def rec(i: int, top: int):
        if i == n:
            yield Partition.from_labels(labels)
            return
        for lab in range(top + 2):
            labels[i] = lab
            yield from rec(i + 1, max(top, lab))

    labels[0] = 0
    yield from rec(1, 0)
