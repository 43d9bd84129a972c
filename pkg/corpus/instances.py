"""
Training instance construction for TreeReply

A raw pair is a post and a parsed response. An instance is the post as
vocabulary indices plus the response as a canonical, EOB-padded ternary
tree over vocabulary indices.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, TextIO

from core.errors import MalformedTreeError, NonProjectiveError, TreeStructureError
from core.trees import DependencyTree, TernaryNode, canonicalize, dep_to_sp, pad_eob
from core.tree_format import format_ternary, parse_ternary
from corpus.conllu_reader import TOO_DEEP, ConlluReader, Rejection
from corpus.vocabulary import EOB_ID, RESERVED, Vocabulary

log = logging.getLogger(__name__)


@dataclass
class DialoguePair:
    post: List[str]
    response: DependencyTree


@dataclass
class TrainingInstance:
    post: List[int]
    response_tree: TernaryNode

    def word_count(self) -> int:
        """Number of non-EOB nodes in the response tree"""
        stack = [self.response_tree]
        count = 0
        while stack:
            node = stack.pop()
            if node.token != EOB_ID:
                count += 1
                stack.extend(node.children())
        return count


def load_pairs(pairs_stream: TextIO, conllu_stream: TextIO, rejections: Optional[List[Rejection]] = None) -> List[DialoguePair]:
    """Align `post<TAB>response` lines with the parses of the responses, by order

    The i-th TSV line goes with the i-th CoNLL-U block. A pair is dropped when
    its parse was rejected, when its post uses a reserved token, or when the
    parse's FORM column does not match the whitespace-split response.
    """
    if rejections is None:
        rejections = []
    reader = ConlluReader()
    parses = {tree.block_index: tree for tree in reader.read(conllu_stream)}
    rejections.extend(reader.rejections)

    pairs: List[DialoguePair] = []
    index = -1
    for line_number, line in enumerate(pairs_stream, start=1):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        index += 1
        fields = line.split("\t")
        if len(fields) != 2:
            rejections.append(Rejection(index, line_number, "expected post<TAB>response"))
            continue
        post, response = fields[0].split(), fields[1].split()
        if not post:
            rejections.append(Rejection(index, line_number, "empty post"))
            continue
        if any(token in RESERVED for token in post):
            rejections.append(Rejection(index, line_number, "reserved token in post"))
            continue
        parse = parses.get(index)
        if parse is None:
            if not any(r.index == index for r in reader.rejections):
                rejections.append(Rejection(index, line_number, "no parse for this response"))
            continue
        if parse.tokens != response:
            rejections.append(Rejection(index, line_number, "response does not match its parse"))
            continue
        pairs.append(DialoguePair(post, parse))
    log.info("Loaded %d pairs (%d rejected)", len(pairs), len(rejections))
    return pairs


class InstanceBuilder:
    """Encodes pairs and canonicalizes their responses, counting what it drops"""

    def __init__(self, vocabulary: Vocabulary, max_post_length: Optional[int] = None):
        self.vocabulary = vocabulary
        self.max_post_length = max_post_length
        self.skipped_nonprojective = 0
        self.truncated_posts = 0
        self.rejections: List[Rejection] = []

    def build(self, pairs: List[DialoguePair]) -> List[TrainingInstance]:
        instances: List[TrainingInstance] = []
        for index, pair in enumerate(pairs):
            reserved = [token for token in pair.response.tokens if token in RESERVED]
            if reserved:
                self.rejections.append(
                    Rejection(index, 0, f"reserved token {reserved[0]!r} in response", pair.response.sent_id))
                continue
            try:
                tree = pad_eob(canonicalize(dep_to_sp(pair.response)))
            except NonProjectiveError as e:
                self.skipped_nonprojective += 1
                self.rejections.append(Rejection(index, 0, f"non-projective: {e}", pair.response.sent_id))
                continue
            except TreeStructureError as e:
                self.rejections.append(Rejection(index, 0, str(e), pair.response.sent_id))
                continue
            except RecursionError:
                self.rejections.append(Rejection(index, 0, TOO_DEEP, pair.response.sent_id))
                continue
            post = pair.post
            if self.max_post_length is not None and len(post) > self.max_post_length:
                post = post[:self.max_post_length]
                self.truncated_posts += 1
            instances.append(TrainingInstance(self.vocabulary.encode(post), self.vocabulary.encode_tree(tree)))
        if self.skipped_nonprojective:
            log.warning("Skipped %d non-projective responses", self.skipped_nonprojective)
        if self.truncated_posts:
            log.info("Truncated %d posts to %d tokens", self.truncated_posts, self.max_post_length)
        return instances


def make_instances(pairs: List[DialoguePair], vocabulary: Vocabulary, max_post_length: Optional[int] = None) -> List[TrainingInstance]:
    return InstanceBuilder(vocabulary, max_post_length).build(pairs)


def format_instance(instance: TrainingInstance) -> str:
    """`post indices<TAB>tree` with `<eob>` for EOB leaves"""
    post = " ".join(str(index) for index in instance.post)
    return f"{post}\t{format_ternary(instance.response_tree, EOB_ID)}"


def parse_instance(line: str) -> TrainingInstance:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 2:
        raise MalformedTreeError("instance line needs post<TAB>tree")
    post_text, tree_text = fields
    try:
        return TrainingInstance(
            [int(index) for index in post_text.split()],
            parse_ternary(tree_text, convert=int, eob=EOB_ID),
        )
    except ValueError as e:
        raise MalformedTreeError(f"instance line holds a non-integer token: {e}")
