"""F-counts and the removal score d_q of a finite R-sequence."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Optional

from .tree import DeadNode, SequenceTree

EXACT_MAX_DEAD = 20


def bucket_of(node: DeadNode, q: int) -> int:
    """Canonical bucket p; unclassified nodes take the heaviest bucket q - 1."""
    c = node.classification
    if c is None or c.kind == "unclassified":
        return q - 1
    return min(max(int(c.p), 0), q - 1)


def canonical_partition(tree: SequenceTree, q: int) -> dict[int, int]:
    """dead node index -> bucket p."""
    return {d.index: bucket_of(d, q) for d in tree.level(q).dead}


def _ancestor(index: int, q: int, p: int, R: int) -> int:
    return index // R ** (q - p)


def F_count(q: int, p: int, I_p: int, tree: SequenceTree,
            partition: Optional[dict[int, int]] = None) -> int:
    """Number of dead level-q nodes in bucket p lying inside the level-p node I_p."""
    part = canonical_partition(tree, q) if partition is None else partition
    R = tree.cfg.R
    return sum(1 for idx, pp in part.items() if pp == p and _ancestor(idx, q, p, R) == I_p)


def F_table(q: int, tree: SequenceTree, partition: Optional[dict[int, int]] = None):
    """p -> Counter(level-p ancestor -> count)."""
    part = canonical_partition(tree, q) if partition is None else partition
    R = tree.cfg.R
    table: dict[int, Counter] = defaultdict(Counter)
    for idx, p in part.items():
        table[p][_ancestor(idx, q, p, R)] += 1
    return table


def d_value(q: int, R: int, table) -> float:
    return math.fsum((4.0 / R) ** (q - p) * max(cnt.values()) for p, cnt in table.items() if cnt)


def d_q_upper(q: int, tree: SequenceTree, partition_strategy: str = "canonical") -> float:
    """sum_p (4/R)^{q-p} max_{I_p} F for the canonical partition, or the exact
    minimum over partitions ("exhaustive", at most 20 dead nodes)."""
    if q < 1 or q > tree.depth:
        raise ValueError(f"q must lie in 1..{tree.depth}")
    if partition_strategy == "canonical":
        return d_value(q, tree.cfg.R, F_table(q, tree))
    if partition_strategy == "exhaustive":
        return d_q_min(q, tree)
    raise ValueError(f"unknown partition strategy {partition_strategy!r}")


def d_q_min(q: int, tree: SequenceTree, max_dead: int = EXACT_MAX_DEAD) -> float:
    """Exact min over all partitions by branch and bound.

    Siblings (same level-(q-1) parent) share every ancestor, so only the
    number of them sent to each bucket matters; groups are distributed as
    compositions and partial scores only grow, which gives the bound.
    """
    dead = tree.level(q).dead
    if len(dead) > max_dead:
        raise ValueError(f"{len(dead)} dead nodes exceed the exhaustive limit {max_dead}")
    if not dead:
        return 0.0
    R = tree.cfg.R
    groups = sorted(Counter(d.index // R for d in dead).items(), key=lambda kv: (-kv[1], kv[0]))
    weights = [(4.0 / R) ** (q - p) for p in range(q)]
    best = [d_q_upper(q, tree, "canonical")]
    counts: list[Counter] = [Counter() for _ in range(q)]

    def score() -> float:
        return math.fsum(weights[p] * max(counts[p].values()) for p in range(q) if counts[p])

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    def rec(g: int):
        cur = score()
        if cur >= best[0] - 1e-15:
            return
        if g == len(groups):
            best[0] = cur
            return
        parent, size = groups[g]
        for comp in compositions(size, q):
            for p, c in enumerate(comp):
                if c:
                    counts[p][parent // R ** (q - 1 - p)] += c
            rec(g + 1)
            for p, c in enumerate(comp):
                if c:
                    key = parent // R ** (q - 1 - p)
                    counts[p][key] -= c
                    if not counts[p][key]:
                        del counts[p][key]

    rec(0)
    return best[0]


@dataclass(frozen=True)
class RichnessReport:
    levels: tuple            # per q >= 1: dict with counts, buckets, F maxima, d_q
    d_upper: float           # max_q d_q over the built levels
    survivors: int
    survivor_ranges: tuple   # maximal runs of consecutive surviving indices at depth Q

    def to_dict(self) -> dict:
        return {"levels": list(self.levels), "d_upper": self.d_upper,
                "survivors": self.survivors,
                "survivor_ranges": [list(r) for r in self.survivor_ranges]}


def index_ranges(indices) -> tuple:
    out = []
    start = prev = None
    for i in (int(v) for v in indices):
        if start is None:
            start = prev = i
        elif i == prev + 1:
            prev = i
        else:
            out.append((start, prev))
            start = prev = i
    if start is not None:
        out.append((start, prev))
    return tuple(out)


def richness_report(tree: SequenceTree) -> RichnessReport:
    levels = []
    R = tree.cfg.R
    for q in range(1, tree.depth + 1):
        lev = tree.level(q)
        table = F_table(q, tree)
        kinds = Counter(d.classification.kind if d.classification else "unclassified"
                        for d in lev.dead)
        entry = {
            "q": q, "alive": int(lev.alive.size), "dead": len(lev.dead),
            "indeterminate": sum(1 for d in lev.dead if d.indeterminate),
            "kinds": dict(sorted(kinds.items())),
            "F_max": {str(p): max(cnt.values()) for p, cnt in sorted(table.items())},
            "d_q_upper": d_value(q, R, table),
        }
        if len(lev.dead) <= EXACT_MAX_DEAD:
            entry["d_q_min"] = d_q_min(q, tree)
        levels.append(entry)
    d_up = max((e["d_q_upper"] for e in levels), default=0.0)
    surv = tree.survivors()
    return RichnessReport(tuple(levels), d_up, int(surv.size), index_ranges(surv))
