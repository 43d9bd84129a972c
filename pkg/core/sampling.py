"""
Seeded random tree generators for TreeReply

Trees are grown breadth-first: each node draws a child count uniformly from
0..min(MAX_CHILDREN, remaining), with at least one child forced whenever the
queue would otherwise run dry before n nodes exist. Tags are uniform over
0..child count. Tokens are then labelled with their in-order position, so the
flattened sentence of a sampled tree is always 0, 1, ..., n-1.
"""

from collections import deque
from typing import List

import numpy as np

from core.trees import DependencyTree, SPNode, sp_in_order, sp_to_dependency

MAX_CHILDREN = 4


def random_sp_tree(n: int, rng: np.random.Generator) -> SPNode:
    if n < 1:
        raise ValueError(f"tree size must be positive, got {n}")
    root = SPNode(None)
    queue = deque([root])
    remaining = n - 1
    while queue and remaining > 0:
        node = queue.popleft()
        upper = min(MAX_CHILDREN, remaining)
        lower = 1 if not queue else 0
        count = int(rng.integers(lower, upper + 1))
        node.children = [SPNode(None) for _ in range(count)]
        node.tag = int(rng.integers(0, count + 1))
        queue.extend(node.children)
        remaining -= count
    _label_in_order(root)
    return root


def _label_in_order(root: SPNode):
    for position, node in enumerate(sp_in_order(root)):
        node.token = position


def random_dependency_tree(n: int, rng: np.random.Generator) -> DependencyTree:
    """Projective dependency tree over tokens "w0".."w{n-1}" """
    tree = sp_to_dependency(random_sp_tree(n, rng))
    tree.tokens = [f"w{token}" for token in tree.tokens]
    return tree


def random_sp_trees(count: int, max_size: int, seed: int) -> List[SPNode]:
    """`count` trees with sizes uniform in 1..max_size"""
    rng = np.random.default_rng(seed)
    return [random_sp_tree(int(rng.integers(1, max_size + 1)), rng) for _ in range(count)]
