"""
Tree algebra for TreeReply

SP (sequence-preserved) trees, ternary trees, dependency trees and the
conversions between them. Every function here is pure: inputs are never
mutated, new nodes are returned.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from core.errors import (
    MalformedTreeError,
    NonProjectiveError,
    TreeInvariantError,
    TreeStructureError,
)

Token = Hashable

# Reserved spelling of the End Of Branch token in string-token trees.
EOB = "<eob>"

LEFT, MIDDLE, RIGHT = 0, 1, 2


@dataclass
class DependencyTree:
    """Sentence tokens with a head index per token (-1 marks the root)"""

    tokens: List[str]
    heads: List[int]
    sent_id: Optional[str] = None
    block_index: Optional[int] = None

    @property
    def root_index(self) -> int:
        roots = [i for i, head in enumerate(self.heads) if head == -1]
        if len(roots) != 1:
            raise TreeStructureError(f"expected exactly one root, found {len(roots)}")
        return roots[0]

    def children_of(self) -> List[List[int]]:
        """Dependents of every token, in surface order"""
        children: List[List[int]] = [[] for _ in self.tokens]
        for index, head in enumerate(self.heads):
            if head >= 0:
                children[head].append(index)
        return children

    def validate(self):
        """Check that the head links form a single tree over all tokens"""
        if not self.tokens:
            raise TreeStructureError("empty sentence")
        if len(self.heads) != len(self.tokens):
            raise TreeStructureError("head count does not match token count")
        for index, head in enumerate(self.heads):
            if head < -1 or head >= len(self.tokens):
                raise TreeStructureError(f"token {index + 1}: head {head + 1} out of range")
            if head == index:
                raise TreeStructureError(f"token {index + 1} is its own head")
        root = self.root_index

        # Every token must be reachable from the root, otherwise there is a cycle
        reached = {root}
        stack = [root]
        children = self.children_of()
        while stack:
            node = stack.pop()
            for child in children[node]:
                if child not in reached:
                    reached.add(child)
                    stack.append(child)
        if len(reached) != len(self.tokens):
            stray = min(set(range(len(self.tokens))) - reached)
            raise TreeStructureError(f"head cycle through token {stray + 1}")


@dataclass
class SPNode:
    """Ordered tree node; the first `tag` children precede the node in-order"""

    token: Token
    tag: int = 0
    children: List["SPNode"] = field(default_factory=list)

    def size(self) -> int:
        count = 0
        stack = [self]
        while stack:
            count += 1
            stack.extend(stack.pop().children)
        return count


@dataclass
class TernaryNode:
    """Node with fixed child slots (left, middle, right for the canonical form)

    Model-built chain trees use a single slot; everything else uses three.
    EOB nodes never have children. `tag` is copied from the SP tree by
    canonicalization and stays None on generated trees.
    """

    token: Token
    tag: Optional[int] = None
    slots: List[Optional["TernaryNode"]] = field(default_factory=lambda: [None, None, None])

    @property
    def arity(self) -> int:
        return len(self.slots)

    @property
    def left(self) -> Optional["TernaryNode"]:
        return self.slots[LEFT]

    @left.setter
    def left(self, node: Optional["TernaryNode"]):
        self.slots[LEFT] = node

    @property
    def middle(self) -> Optional["TernaryNode"]:
        return self.slots[MIDDLE]

    @middle.setter
    def middle(self, node: Optional["TernaryNode"]):
        self.slots[MIDDLE] = node

    @property
    def right(self) -> Optional["TernaryNode"]:
        return self.slots[RIGHT]

    @right.setter
    def right(self, node: Optional["TernaryNode"]):
        self.slots[RIGHT] = node

    def is_leaf(self) -> bool:
        return all(slot is None for slot in self.slots)

    def children(self) -> List["TernaryNode"]:
        return [slot for slot in self.slots if slot is not None]

    def clone(self) -> "TernaryNode":
        return map_ternary(self, lambda node, slots: TernaryNode(node.token, node.tag, slots))


def _check_tag(node: SPNode):
    if node.tag < 0 or node.tag > len(node.children):
        raise TreeInvariantError(
            f"node {node.token!r}: tag {node.tag} outside 0..{len(node.children)}"
        )

def dep_to_sp(tree: DependencyTree) -> SPNode:
    """Read a dependency tree as an SP tree; rejects non-projective parses"""
    tree.validate()
    children = tree.children_of()
    tags = [sum(1 for child in kids if child < index) for index, kids in enumerate(children)]

    order = _in_order_indices(tree.root_index, children, tags)
    for position, index in enumerate(order):
        if position != index:
            raise NonProjectiveError(
                f"token {index + 1} ({tree.tokens[index]!r}) lands at position {position + 1}"
            )

    nodes = [SPNode(token, tag) for token, tag in zip(tree.tokens, tags)]
    for node, kids in zip(nodes, children):
        node.children = [nodes[child] for child in kids]
    return nodes[tree.root_index]


def _in_order_indices(root: int, children: List[List[int]], tags: List[int]) -> List[int]:
    order: List[int] = []
    stack: List[Tuple[int, bool]] = [(root, False)]
    while stack:
        index, emit = stack.pop()
        if emit:
            order.append(index)
            continue
        kids = children[index]
        stack.extend((child, False) for child in reversed(kids[tags[index]:]))
        stack.append((index, True))
        stack.extend((child, False) for child in reversed(kids[:tags[index]]))
    return order


def sp_in_order(root: SPNode) -> List[SPNode]:
    """Nodes in surface order: left part, the node, then the right part"""
    order: List[SPNode] = []
    stack: List[Tuple[SPNode, bool]] = [(root, False)]
    while stack:
        node, emit = stack.pop()
        if emit:
            order.append(node)
            continue
        _check_tag(node)
        stack.extend((child, False) for child in reversed(node.children[node.tag:]))
        stack.append((node, True))
        stack.extend((child, False) for child in reversed(node.children[:node.tag]))
    return order


def sp_to_dependency(root: SPNode, sent_id: Optional[str] = None) -> DependencyTree:
    """Inverse of dep_to_sp: surface order is the in-order traversal"""
    order = sp_in_order(root)
    position = {id(node): index for index, node in enumerate(order)}
    heads = [-1] * len(order)
    for node in order:
        for child in node.children:
            heads[position[id(child)]] = position[id(node)]
    return DependencyTree([str(node.token) for node in order], heads, sent_id)


def flatten_sp(root: SPNode) -> List[Token]:
    return [node.token for node in sp_in_order(root)]


def canonicalize(root: SPNode) -> TernaryNode:
    """Turn an SP tree into its equivalent ternary tree, copying tags"""
    top = TernaryNode(root.token, root.tag)
    stack: List[Tuple[SPNode, TernaryNode]] = [(root, top)]
    while stack:
        sp, node = stack.pop()
        _check_tag(sp)
        last: Optional[TernaryNode] = None
        for j, child in enumerate(sp.children, start=1):
            current = TernaryNode(child.token, child.tag)
            if j == 1 and j <= sp.tag:
                node.left = current
            elif j == sp.tag + 1:
                node.middle = current
            else:
                last.right = current
            last = current
            stack.append((child, current))
    return top


def _right_chain(start: Optional[TernaryNode]) -> List[TernaryNode]:
    chain: List[TernaryNode] = []
    current = start
    while current is not None:
        chain.append(current)
        current = current.right
    return chain


def decanonicalize(root: TernaryNode, eob: Token = EOB) -> SPNode:
    """Recover the SP tree from an unpadded canonical ternary tree"""
    if root.arity != 3:
        raise MalformedTreeError(f"expected a ternary node, got arity {root.arity}")
    if root.right is not None:
        raise MalformedTreeError(f"root {root.token!r} carries a right-child chain")

    top = SPNode(root.token)
    stack: List[Tuple[TernaryNode, SPNode]] = [(root, top)]
    while stack:
        node, sp = stack.pop()
        if node.token == eob:
            raise MalformedTreeError("EOB padding must be stripped before decanonicalizing")
        if node.tag is None:
            raise MalformedTreeError(f"node {node.token!r} has no tag")
        left_part = _right_chain(node.left)
        right_part = _right_chain(node.middle)
        if len(left_part) != node.tag:
            raise MalformedTreeError(
                f"node {node.token!r}: tag {node.tag} but {len(left_part)} left children"
            )
        sp.tag = node.tag
        for child in left_part + right_part:
            rebuilt = SPNode(child.token)
            sp.children.append(rebuilt)
            stack.append((child, rebuilt))
    return top


def flatten_ternary(root: Optional[TernaryNode], eob: Token = EOB) -> List[Token]:
    """In-order reading of a generated or canonical tree, skipping EOB

    Ternary nodes read left, node, middle, right. Single-slot (chain) nodes
    read the node and then its child.
    """
    sequence: List[Token] = []
    stack: List[Tuple[Optional[TernaryNode], bool]] = [(root, False)]
    while stack:
        node, emit = stack.pop()
        if node is None:
            continue
        if emit:
            sequence.append(node.token)
            continue
        word = node.token != eob
        if node.arity == 3:
            stack.append((node.right, False))
            stack.append((node.middle, False))
            if word:
                stack.append((node, True))
            stack.append((node.left, False))
        else:
            stack.extend((slot, False) for slot in reversed(node.slots))
            if word:
                stack.append((node, True))
    return sequence


def map_ternary(root: Optional[TernaryNode],
                build: Callable[[TernaryNode, List[Optional[TernaryNode]]], Optional[TernaryNode]]
                ) -> Optional[TernaryNode]:
    """Rebuild a tree bottom-up; `build` receives each node and its rebuilt slots"""
    if root is None:
        return None
    order: List[TernaryNode] = []
    stack = [root]
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(slot for slot in node.slots if slot is not None)

    # Reversed pre-order visits every child before its parent
    built: Dict[int, Optional[TernaryNode]] = {}
    for node in reversed(order):
        slots = [built[id(slot)] if slot is not None else None for slot in node.slots]
        built[id(node)] = build(node, slots)
    return built[id(root)]


def pad_eob(root: TernaryNode, eob: Token = EOB) -> TernaryNode:
    """Fill every empty slot of a word node with an EOB leaf"""

    def build(node: TernaryNode, slots: List[Optional[TernaryNode]]) -> TernaryNode:
        if node.token == eob:
            return TernaryNode(eob, None, [None] * node.arity)
        filled = [slot if slot is not None else TernaryNode(eob, None, [None] * node.arity) for slot in slots]
        return TernaryNode(node.token, node.tag, filled)

    return map_ternary(root, build)


def strip_eob(root: TernaryNode, eob: Token = EOB) -> Optional[TernaryNode]:
    """Inverse of pad_eob; an EOB root yields None"""

    def build(node: TernaryNode, slots: List[Optional[TernaryNode]]) -> Optional[TernaryNode]:
        if node.token == eob:
            return None
        return TernaryNode(node.token, node.tag, slots)

    return map_ternary(root, build)


def is_padded(root: TernaryNode, eob: Token = EOB) -> bool:
    """True when every word node has all slots filled and every leaf is EOB"""
    stack = [root]
    while stack:
        node = stack.pop()
        if node.token == eob:
            if not node.is_leaf():
                return False
            continue
        if any(slot is None for slot in node.slots):
            return False
        stack.extend(node.slots)
    return True


def _count(root: Optional[TernaryNode], keep: Callable[[TernaryNode], bool]) -> int:
    count = 0
    stack = [root] if root is not None else []
    while stack:
        node = stack.pop()
        count += keep(node)
        stack.extend(slot for slot in node.slots if slot is not None)
    return count


def count_nodes(root: Optional[TernaryNode]) -> int:
    return _count(root, lambda node: True)


def count_tokens(root: Optional[TernaryNode], token: Token) -> int:
    return _count(root, lambda node: node.token == token)


def structure_key(node) -> Tuple:
    """Hashable structural identity of an SP or ternary tree

    A flat pre-order listing; child counts (SP) and empty-slot markers
    (ternary) make it unambiguous.
    """
    if node is None:
        return ()
    key: list = []
    stack = [node]
    while stack:
        current = stack.pop()
        if current is None:
            key.append(None)
        elif isinstance(current, SPNode):
            key.append((current.token, current.tag, len(current.children)))
            stack.extend(reversed(current.children))
        else:
            key.append((current.token, current.tag, current.arity))
            stack.extend(reversed(current.slots))
    return tuple(key)


def trees_equal(a, b) -> bool:
    return structure_key(a) == structure_key(b)


def word_depths(root: Optional[TernaryNode], eob: Token = EOB) -> List[int]:
    """Depth of every word node, counting the root as depth 1"""
    depths: List[int] = []
    stack: List[Tuple[TernaryNode, int]] = [(root, 1)] if root is not None else []
    while stack:
        node, depth = stack.pop()
        if node.token == eob:
            continue
        depths.append(depth)
        for slot in node.slots:
            if slot is not None:
                stack.append((slot, depth + 1))
    return depths


def chain_tree(tokens: Sequence[Token]) -> TernaryNode:
    """Ternary tree whose every word hangs in the middle slot of the previous one"""
    if not tokens:
        raise TreeStructureError("chain needs at least one token")
    root = TernaryNode(tokens[0], 0)
    current = root
    for token in tokens[1:]:
        current.middle = TernaryNode(token, 0)
        current = current.middle
    return root
