"""
Brute-force tree enumeration and depth statistics for TreeReply

Shapes are nested tuples with the node labels left implicit:
    ordered tree  tuple of child shapes
    SP tree       (tag, tuple of child SP shapes)
    binary tree   (left, right) with None for an empty side
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, Iterator, Optional, Tuple

from core.errors import EnumerationLimitError
from core.trees import EOB, TernaryNode, Token, word_depths

MAX_ENUMERATION_SIZE = 10


def _check_size(n: int):
    if n < 1:
        raise ValueError(f"tree size must be positive, got {n}")
    if n > MAX_ENUMERATION_SIZE:
        raise EnumerationLimitError(
            f"exhaustive enumeration is capped at n={MAX_ENUMERATION_SIZE}, got n={n}"
        )


@lru_cache(maxsize=None)
def _ordered_trees(n: int) -> Tuple[tuple, ...]:
    return tuple(_ordered_forests(n - 1))


def _ordered_forests(m: int) -> Iterator[tuple]:
    if m == 0:
        yield ()
        return
    for first_size in range(1, m + 1):
        for first in _ordered_trees(first_size):
            for rest in _ordered_forests(m - first_size):
                yield (first,) + rest


@lru_cache(maxsize=None)
def _sp_trees(n: int) -> Tuple[tuple, ...]:
    return tuple(
        (tag, forest)
        for forest in _sp_forests(n - 1)
        for tag in range(len(forest) + 1)
    )


def _sp_forests(m: int) -> Iterator[tuple]:
    if m == 0:
        yield ()
        return
    for first_size in range(1, m + 1):
        for first in _sp_trees(first_size):
            for rest in _sp_forests(m - first_size):
                yield (first,) + rest


@lru_cache(maxsize=None)
def _binary_trees(n: int) -> Tuple[Optional[tuple], ...]:
    if n == 0:
        return (None,)
    return tuple(
        (left, right)
        for left_size in range(n)
        for left in _binary_trees(left_size)
        for right in _binary_trees(n - 1 - left_size)
    )


def iter_ordered_trees(n: int) -> Iterator[tuple]:
    _check_size(n)
    return iter(_ordered_trees(n))


def iter_sp_trees(n: int) -> Iterator[tuple]:
    _check_size(n)
    if n < MAX_ENUMERATION_SIZE:
        return iter(_sp_trees(n))
    # Largest size is streamed instead of cached
    return ((tag, forest) for forest in _sp_forests(n - 1) for tag in range(len(forest) + 1))


def iter_lcrs_trees(n: int) -> Iterator[tuple]:
    """Binary trees with n nodes whose root has no right sibling"""
    _check_size(n)
    return ((left, None) for left in _binary_trees(n - 1))


def count_sp_trees(n: int) -> int:
    return sum(1 for _ in iter_sp_trees(n))


def count_ordered_trees(n: int) -> int:
    return sum(1 for _ in iter_ordered_trees(n))


def count_lcrs_trees(n: int) -> int:
    return sum(1 for _ in iter_lcrs_trees(n))


def ordered_to_lcrs(shape: tuple) -> tuple:
    """Left-child right-sibling encoding of an ordered tree shape"""
    return (_forest_to_binary(shape), None)


def _forest_to_binary(forest: tuple) -> Optional[tuple]:
    if not forest:
        return None
    first, rest = forest[0], forest[1:]
    return (_forest_to_binary(first), _forest_to_binary(rest))


@dataclass(frozen=True)
class DepthRow:
    """Mean word depth for one sentence length next to the chain baseline"""

    length: int
    mean_depth: float
    chain_baseline: float
    tree_count: int

    @property
    def ratio(self) -> float:
        return self.mean_depth / self.chain_baseline


def depth_stats(trees: Iterable[TernaryNode], eob: Token = EOB) -> Dict[int, DepthRow]:
    """Mean ancestor-path length of word nodes, grouped by sentence length"""
    totals: Dict[int, int] = {}
    words: Dict[int, int] = {}
    counts: Dict[int, int] = {}
    for tree in trees:
        depths = word_depths(tree, eob)
        length = len(depths)
        if length == 0:
            continue
        totals[length] = totals.get(length, 0) + sum(depths)
        words[length] = words.get(length, 0) + length
        counts[length] = counts.get(length, 0) + 1
    if not counts:
        raise ValueError("depth statistics need at least one non-empty tree")
    return {
        length: DepthRow(length, totals[length] / words[length], (length + 1) / 2, counts[length])
        for length in sorted(counts)
    }


def theorem_rows(n_max: int) -> Iterator[Tuple[int, int, int, int]]:
    """(n, |S^n|, |O^n|, |L^n|) for n = 1..n_max"""
    _check_size(n_max)
    for n in range(1, n_max + 1):
        yield n, count_sp_trees(n), count_ordered_trees(n), count_lcrs_trees(n)


def distinct_lcrs_images(n: int) -> int:
    """Number of distinct LCRS trees reached from the ordered trees of size n"""
    return len(set(ordered_to_lcrs(shape) for shape in iter_ordered_trees(n)))
