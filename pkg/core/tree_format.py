"""
Text serialization of trees for TreeReply

One tree per line, nested parenthesized form:

    SP tree       (token tag child*)
    ternary tree  (token tag slot slot slot)

A ternary slot is a nested node, `<eob>` for an EOB leaf, or `_` for an
empty slot; an absent tag is written `_`. Inside a token, parentheses,
backslash and whitespace are escaped with a backslash, and a token that is
literally `_` or `<eob>` is written `\\_` or `\\<eob>`. See docs/formats.md.
"""

from typing import Callable, List, Optional, Tuple

from core.errors import MalformedTreeError
from core.trees import EOB, SPNode, TernaryNode, Token

EMPTY = "_"
_SPECIAL = set("()\\")
_RESERVED_WORDS = (EMPTY, EOB)


def escape_token(token: Token) -> str:
    text = str(token)
    if text in _RESERVED_WORDS:
        return "\\" + text
    return "".join("\\" + ch if ch in _SPECIAL or ch.isspace() else ch for ch in text)


def _format_tag(tag: Optional[int]) -> str:
    return EMPTY if tag is None else str(tag)


def format_sp(root: SPNode) -> str:
    pieces: List[str] = []
    stack: List[object] = [root]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            pieces.append(item)
            continue
        pieces.append(f"({escape_token(item.token)} {item.tag}")
        stack.append(")")
        for child in reversed(item.children):
            stack.append(child)
            stack.append(" ")
    return "".join(pieces)


def format_ternary(root: Optional[TernaryNode], eob: Token = EOB) -> str:
    pieces: List[str] = []
    stack: List[Tuple[bool, object]] = [(False, root)]
    while stack:
        literal, item = stack.pop()
        if literal:
            pieces.append(item)
        elif item is None:
            pieces.append(EMPTY)
        elif item.token == eob:
            pieces.append(EOB)
        else:
            pieces.append(f"({escape_token(item.token)} {_format_tag(item.tag)}")
            stack.append((True, ")"))
            for slot in reversed(item.slots):
                stack.append((False, slot))
                stack.append((True, " "))
    return "".join(pieces)


# Lexer items: ("(", ...), (")", ...), ("atom", text, escaped)
_Item = Tuple[str, str, bool]


def _lex(line: str) -> List[_Item]:
    items: List[_Item] = []
    i = 0
    while i < len(line):
        ch = line[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            items.append((ch, ch, False))
            i += 1
        else:
            chars = []
            escaped = False
            while i < len(line) and not line[i].isspace() and line[i] not in "()":
                if line[i] == "\\":
                    if i + 1 >= len(line):
                        raise MalformedTreeError("dangling backslash at end of line")
                    chars.append(line[i + 1])
                    escaped = True
                    i += 2
                else:
                    chars.append(line[i])
                    i += 1
            items.append(("atom", "".join(chars), escaped))
    return items


class _Reader:
    """Reader over lexed items; open nodes live on an explicit stack"""

    def __init__(self, line: str, convert: Callable[[str], Token]):
        self.items = _lex(line)
        self.pos = 0
        self.convert = convert

    def peek(self) -> Optional[_Item]:
        return self.items[self.pos] if self.pos < len(self.items) else None

    def take(self) -> _Item:
        item = self.peek()
        if item is None:
            raise MalformedTreeError("unexpected end of tree")
        self.pos += 1
        return item

    def expect(self, kind: str):
        item = self.take()
        if item[0] != kind:
            raise MalformedTreeError(f"expected {kind!r}, found {item[1]!r}")

    def token(self) -> Token:
        kind, text, _ = self.take()
        if kind != "atom":
            raise MalformedTreeError(f"expected a token, found {text!r}")
        return self.convert(text)

    def tag(self, optional: bool) -> Optional[int]:
        kind, text, escaped = self.take()
        if kind != "atom":
            raise MalformedTreeError(f"expected a tag, found {text!r}")
        if optional and text == EMPTY and not escaped:
            return None
        try:
            tag = int(text)
        except ValueError:
            raise MalformedTreeError(f"bad tag {text!r}")
        if tag < 0:
            raise MalformedTreeError(f"negative tag {tag}")
        return tag

    def finish(self):
        if self.peek() is not None:
            raise MalformedTreeError(f"trailing input after tree: {self.peek()[1]!r}")

    def sp_node(self) -> SPNode:
        self.expect("(")
        root = SPNode(self.token(), self.tag(optional=False))
        open_nodes = [root]
        while open_nodes:
            item = self.peek()
            if item is not None and item[0] == "(":
                self.pos += 1
                child = SPNode(self.token(), self.tag(optional=False))
                open_nodes[-1].children.append(child)
                open_nodes.append(child)
            else:
                self.expect(")")
                open_nodes.pop()
        return root

    def _leaf_slot(self, eob: Token) -> Tuple[bool, Optional[TernaryNode]]:
        """(True, slot) when the next item is `_` or `<eob>`, else (False, None)"""
        item = self.peek()
        if item is None:
            raise MalformedTreeError("unexpected end of tree")
        kind, text, escaped = item
        if kind == "atom" and not escaped and text == EMPTY:
            self.pos += 1
            return True, None
        if kind == "atom" and not escaped and text == EOB:
            self.pos += 1
            return True, TernaryNode(eob, None, [None, None, None])
        return False, None

    def _open_ternary(self) -> TernaryNode:
        self.expect("(")
        token = self.token()
        tag = self.tag(optional=True)
        return TernaryNode(token, tag, [None, None, None])

    def ternary_slot(self, eob: Token) -> Optional[TernaryNode]:
        done, slot = self._leaf_slot(eob)
        if done:
            return slot
        root = self._open_ternary()
        # (node, number of slots read so far)
        open_nodes: List[List] = [[root, 0]]
        while open_nodes:
            entry = open_nodes[-1]
            node, filled = entry
            if filled == 3:
                self.expect(")")
                open_nodes.pop()
                continue
            entry[1] += 1
            done, slot = self._leaf_slot(eob)
            if not done:
                slot = self._open_ternary()
                open_nodes.append([slot, 0])
            node.slots[filled] = slot
        return root


def parse_sp(line: str, convert: Callable[[str], Token] = str) -> SPNode:
    reader = _Reader(line, convert)
    root = reader.sp_node()
    reader.finish()
    return root


def parse_ternary(line: str, convert: Callable[[str], Token] = str, eob: Token = EOB) -> TernaryNode:
    """Parse one ternary tree line; `<eob>` maps to the given eob token"""
    reader = _Reader(line, convert)
    root = reader.ternary_slot(eob)
    if root is None:
        raise MalformedTreeError("tree line holds only an empty slot")
    reader.finish()
    return root
