"""
Vocabulary management for TreeReply
"""

import hashlib
from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence

from core.errors import CorpusError
from core.trees import EOB, TernaryNode, map_ternary

UNK = "<unk>"
EOB_ID = 0
UNK_ID = 1
RESERVED = (EOB, UNK)


class Vocabulary:
    """Token <-> index bijection with EOB at 0 and UNK at 1"""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[:2]) != RESERVED:
            raise CorpusError(f"vocabulary must start with {RESERVED}, got {tuple(tokens[:2])}")
        self.tokens: List[str] = list(tokens)
        self.index_of: Dict[str, int] = {}
        for index, token in enumerate(self.tokens):
            if token in self.index_of:
                raise CorpusError(f"duplicate vocabulary entry {token!r}")
            self.index_of[token] = index

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index_of

    def index(self, token: str) -> int:
        return self.index_of.get(token, UNK_ID)

    def token(self, index: int) -> str:
        return self.tokens[index]

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self.index(token) for token in tokens]

    def decode(self, indices: Iterable[int]) -> List[str]:
        return [self.tokens[index] for index in indices]

    def encode_tree(self, root: Optional[TernaryNode]) -> Optional[TernaryNode]:
        """Map a string-token tree onto indices; EOB becomes EOB_ID"""
        return map_ternary(root, lambda node, slots: TernaryNode(
            EOB_ID if node.token == EOB else self.index(node.token), node.tag, slots))

    def decode_tree(self, root: Optional[TernaryNode]) -> Optional[TernaryNode]:
        return map_ternary(root, lambda node, slots: TernaryNode(self.tokens[node.token], node.tag, slots))

    def coverage(self, pairs) -> float:
        """Fraction of token occurrences (posts and responses) that are in-vocabulary"""
        total = kept = 0
        for token in _pair_tokens(pairs):
            total += 1
            kept += token in self.index_of
        return kept / total if total else 1.0

    def sha1(self) -> str:
        return hashlib.sha1("\n".join(self.tokens).encode("utf-8")).hexdigest()


def _pair_tokens(pairs) -> Iterable[str]:
    for pair in pairs:
        yield from pair.post
        yield from pair.response.tokens


def build_vocabulary(pairs, max_size: int) -> Vocabulary:
    """Most frequent `max_size` tokens plus the reserved ones

    Ties are broken by first occurrence, so equal input order gives an equal
    vocabulary.
    """
    if max_size < 0:
        raise CorpusError(f"vocabulary size must be non-negative, got {max_size}")
    counts = Counter(token for token in _pair_tokens(pairs) if token not in RESERVED)
    if not counts:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    # Counter keeps first-insertion order and sorted() is stable
    ranked = sorted(counts.items(), key=lambda item: -item[1])
    return Vocabulary(list(RESERVED) + [token for token, _ in ranked[:max_size]])
