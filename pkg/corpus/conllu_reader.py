"""
CoNLL-U ingestion for TreeReply

Only ID, FORM and HEAD are used. Comment lines, multiword ranges (1-2) and
empty nodes (1.1) are skipped. A sentence block that does not describe a
single-rooted tree, or that uses a reserved token (`<eob>`, `<unk>`) as a
word, is rejected with its line number and reading continues.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, TextIO, Tuple

import conllu
from conllu.exceptions import ParseException

from core.errors import TreeStructureError
from core.trees import DependencyTree
from corpus.vocabulary import RESERVED

log = logging.getLogger(__name__)

TOO_DEEP = "tree too deep to convert"


@dataclass
class Rejection:
    """A sentence or pair that was dropped, with where and why"""

    index: int
    line: int
    reason: str
    sent_id: Optional[str] = None

    def describe(self) -> str:
        label = f" ({self.sent_id})" if self.sent_id else ""
        where = f", line {self.line}" if self.line else ""
        return f"sentence {self.index + 1}{label}{where}: {self.reason}"


class _BlockError(Exception):
    def __init__(self, line: int, reason: str):
        super().__init__(reason)
        self.line = line
        self.reason = reason


class ConlluReader:
    """Streams sentence blocks into DependencyTree objects"""

    def __init__(self):
        self.rejections: List[Rejection] = []
        self.sentence_count = 0

    def read(self, stream: TextIO) -> List[DependencyTree]:
        """Read every block; each tree remembers its block index"""
        trees: List[DependencyTree] = []
        for index, lines in enumerate(self._blocks(stream)):
            self.sentence_count += 1
            start_line = lines[0][0]
            sent_id = _sent_id(lines)
            try:
                tree = self._block_to_tree(lines)
            except _BlockError as e:
                self._reject(index, e.line, e.reason, sent_id)
                continue
            except TreeStructureError as e:
                self._reject(index, start_line, str(e), sent_id)
                continue
            if tree is None:
                continue
            tree.block_index = index
            trees.append(tree)
        return trees

    def _reject(self, index: int, line: int, reason: str, sent_id: Optional[str]):
        rejection = Rejection(index, line, reason, sent_id)
        self.rejections.append(rejection)
        log.warning("Rejected %s", rejection.describe())

    def _blocks(self, stream: TextIO) -> Iterator[List[Tuple[int, str]]]:
        block: List[Tuple[int, str]] = []
        for line_number, raw in enumerate(stream, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if line.strip():
                block.append((line_number, line))
            elif block:
                yield block
                block = []
        if block:
            yield block

    def _block_to_tree(self, lines: List[Tuple[int, str]]) -> Optional[DependencyTree]:
        text = "\n".join(line for _, line in lines) + "\n\n"
        try:
            sentences = conllu.parse(text)
        except ParseException as e:
            raise _BlockError(lines[0][0], f"unreadable block: {e}")
        if not sentences:
            return None
        sentence = sentences[0]
        data_lines = [number for number, line in lines if not line.startswith("#")]

        forms: List[str] = []
        raw_heads: List[Tuple[int, Optional[int]]] = []
        for line_number, token in zip(data_lines, sentence):
            token_id = token.get("id")
            if not isinstance(token_id, int):
                continue
            if token_id != len(forms) + 1:
                raise _BlockError(line_number, f"token id {token_id} out of sequence")
            form = token.get("form")
            if form in RESERVED:
                raise _BlockError(line_number, f"reserved token {form!r}")
            forms.append(form)
            raw_heads.append((line_number, token.get("head")))
        if not forms:
            return None

        heads: List[int] = []
        for line_number, head in raw_heads:
            if head is None:
                raise _BlockError(line_number, "missing HEAD")
            if head < 0 or head > len(forms):
                raise _BlockError(line_number, f"head {head} out of range 0..{len(forms)}")
            heads.append(head - 1)

        tree = DependencyTree(forms, heads, sentence.metadata.get("sent_id"))
        tree.validate()
        return tree


def read_conllu(stream: TextIO) -> List[DependencyTree]:
    """Accepted trees only; use ConlluReader to see the rejections"""
    return ConlluReader().read(stream)


def _sent_id(lines: List[Tuple[int, str]]) -> Optional[str]:
    for _, line in lines:
        if line.startswith("#") and "=" in line:
            key, value = line[1:].split("=", 1)
            if key.strip() == "sent_id":
                return value.strip()
    return None
