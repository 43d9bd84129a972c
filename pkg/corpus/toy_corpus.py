"""
Synthetic post/response corpus for TreeReply

Five response templates over ten nouns. Every response carries a fixed,
projective dependency parse, so the whole pipeline runs without an external
parser. Each post maps to exactly one response.
"""

from typing import List, TextIO, Tuple

import numpy as np

from core.trees import DependencyTree
from corpus.instances import DialoguePair

NOUNS = ["cats", "dogs", "coffee", "music", "rain", "books", "pizza", "tea", "movies", "winter"]
ADJECTIVES = ["great", "nice", "cold", "fun", "warm", "lovely", "strange", "sweet", "loud", "calm"]

# (post words, response words, 1-based heads with 0 for the root);
# "{n}" is the noun, "{a}" and "{b}" are adjectives.
TEMPLATES: List[Tuple[str, str, List[int]]] = [
    ("what do you think of {n}", "{n} is {a}", [2, 0, 2]),
    ("do you like {n}", "i really like {n}", [3, 3, 0, 3]),
    ("where is the {n}", "the {n} is over there", [2, 3, 0, 3, 4]),
    ("tell me about {n}", "{n} are {a} and {b}", [2, 0, 2, 5, 3]),
    ("how was your {n}", "my {n} was {a}", [2, 3, 0, 3]),
]


def _fill(text: str, noun: str, adjective: str, other: str) -> List[str]:
    return text.format(n=noun, a=adjective, b=other).split()


def generate_toy_corpus(size: int = 50, seed: int = 1234) -> List[DialoguePair]:
    """`size` distinct pairs (at most templates x nouns), order shuffled by seed"""
    combos = [(t, n) for t in range(len(TEMPLATES)) for n in range(len(NOUNS))]
    if size > len(combos):
        raise ValueError(f"toy corpus holds at most {len(combos)} pairs")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(combos))[:size]

    pairs: List[DialoguePair] = []
    for rank, combo_index in enumerate(order):
        template, noun_index = combos[int(combo_index)]
        post_text, response_text, heads = TEMPLATES[template]
        noun = NOUNS[noun_index]
        adjective = ADJECTIVES[(noun_index + template) % len(ADJECTIVES)]
        other = ADJECTIVES[(noun_index + template + 3) % len(ADJECTIVES)]
        response = DependencyTree(
            _fill(response_text, noun, adjective, other),
            [head - 1 for head in heads],
            sent_id=f"toy-{rank + 1}",
        )
        pairs.append(DialoguePair(_fill(post_text, noun, adjective, other), response))
    return pairs


def write_pairs_tsv(pairs: List[DialoguePair], stream: TextIO):
    for pair in pairs:
        stream.write(" ".join(pair.post) + "\t" + " ".join(pair.response.tokens) + "\n")


def write_conllu(pairs: List[DialoguePair], stream: TextIO):
    """Ten-column CoNLL-U with only ID, FORM and HEAD filled in"""
    for pair in pairs:
        tree = pair.response
        if tree.sent_id:
            stream.write(f"# sent_id = {tree.sent_id}\n")
        stream.write(f"# text = {' '.join(tree.tokens)}\n")
        for index, (form, head) in enumerate(zip(tree.tokens, tree.heads), start=1):
            columns = [str(index), form, "_", "_", "_", "_", str(head + 1), "dep" if head >= 0 else "root", "_", "_"]
            stream.write("\t".join(columns) + "\n")
        stream.write("\n")
