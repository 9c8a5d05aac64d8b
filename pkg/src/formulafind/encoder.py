"""LaTeX tokenization, integer encoding, and complexity labeling.

A LaTeX expression is scanned into tokens, then converted to a sequence of
integer codes. Keywords map to vocabulary codes, every single-letter variable
collapses to the shared VAR code, and structural regions (scripts, fraction
arguments, square-root radicands) are wrapped in reserved start/end markers so
nesting depth can be recovered from the code sequence alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from importlib import resources
from typing import Dict, Iterable, List, TextIO

from .errors import (
    DuplicateCode,
    DuplicateKeyword,
    EmptyExpression,
    MalformedScript,
    ReservedCodeCollision,
    UnbalancedBraces,
    UnbalancedStructure,
    UnknownEscape,
    UnknownKeyword,
    VocabParseError,
)

# Reserved structural codes. SCRIPT1/SCRIPT2 wrap the first and second script
# attached to a base atom, in source order.
SCRIPT1_START = 1000
SCRIPT1_END = 1001
SCRIPT2_START = 1002
SCRIPT2_END = 1003
VAR = 1004
ROW_DELIM = 1005
COL_DELIM = 1006
GROUP_START = 1007
GROUP_END = 1008

RESERVED_CODES = frozenset(range(1000, 1009))
RESERVED_NAMES = {
    SCRIPT1_START: "SUP_START",
    SCRIPT1_END: "SUP_END",
    SCRIPT2_START: "SUB_START",
    SCRIPT2_END: "SUB_END",
    VAR: "VAR",
    ROW_DELIM: "ROW_DELIM",
    COL_DELIM: "COL_DELIM",
    GROUP_START: "GROUP_START",
    GROUP_END: "GROUP_END",
}

_REGION_OPENERS = {SCRIPT1_START: SCRIPT1_END,
                   SCRIPT2_START: SCRIPT2_END,
                   GROUP_START: GROUP_END}
_REGION_CLOSERS = {v: k for k, v in _REGION_OPENERS.items()}

# Commands whose braced arguments are depth-adding regions.
_GROUP_COMMANDS = {"\\frac": 2, "\\sqrt": 1}


class ComplexityLabel(IntEnum):
    SIMPLE = 0
    MEDIUM = 1
    COMPLEX = 2


def complexity_label(depth: int) -> ComplexityLabel:
    """Map a nested depth to its three-way complexity class."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth == 0:
        return ComplexityLabel.SIMPLE
    if depth == 1:
        return ComplexityLabel.MEDIUM
    return ComplexityLabel.COMPLEX


@dataclass(frozen=True)
class Token:
    text: str
    pos: int


@dataclass(frozen=True)
class Vocabulary:
    """Bidirectional keyword <-> code map with reserved structural codes."""

    entries: Dict[str, int]

    def __post_init__(self):
        codes = list(self.entries.values())
        if len(set(codes)) != len(codes):
            seen = set()
            for c in codes:
                if c in seen:
                    raise DuplicateCode(c)
                seen.add(c)
        for kw, code in self.entries.items():
            if code in RESERVED_CODES:
                raise ReservedCodeCollision(kw, code)

    def code(self, keyword: str) -> int:
        try:
            return self.entries[keyword]
        except KeyError:
            raise UnknownKeyword(keyword) from None

    def keyword(self, code: int) -> str:
        for kw, c in self.entries.items():
            if c == code:
                return kw
        raise KeyError(code)

    def __contains__(self, keyword: str) -> bool:
        return keyword in self.entries

    def all_codes(self) -> List[int]:
        """Every code an encoded expression may contain (vocab + reserved)."""
        return sorted(set(self.entries.values()) | RESERVED_CODES)


def load_vocabulary(source: TextIO) -> Vocabulary:
    """Parse a keyword<TAB>code TSV stream into a validated Vocabulary."""
    entries: Dict[str, int] = {}
    seen_codes: Dict[int, str] = {}
    n_lines = 0
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        n_lines += 1
        parts = line.split("\t")
        if len(parts) != 2:
            raise VocabParseError(lineno, "expected keyword<TAB>code")
        keyword, code_text = parts[0], parts[1].strip()
        if not keyword:
            raise VocabParseError(lineno, "empty keyword")
        try:
            code = int(code_text)
        except ValueError:
            raise VocabParseError(lineno, f"bad code {code_text!r}") from None
        if code < 0:
            raise VocabParseError(lineno, "negative code")
        if keyword in entries:
            raise DuplicateKeyword(keyword)
        if code in seen_codes:
            raise DuplicateCode(code)
        if code in RESERVED_CODES:
            raise ReservedCodeCollision(keyword, code)
        entries[keyword] = code
        seen_codes[code] = keyword
    if n_lines == 0:
        raise VocabParseError(0, "vocabulary is empty")
    return Vocabulary(entries)


def default_vocabulary() -> Vocabulary:
    """The vocabulary shipped with the package."""
    text = resources.files("formulafind.data").joinpath("default_vocab.tsv").read_text("utf-8")
    import io

    return load_vocabulary(io.StringIO(text))


def tokenize(latex: str) -> List[Token]:
    """Scan LaTeX into tokens: commands, single symbols, digits, structural chars.

    Whitespace is discarded. Brace balance is validated here so later passes
    can assume well-formed groups.
    """
    tokens: List[Token] = []
    depth_stack: List[int] = []
    i = 0
    n = len(latex)
    while i < n:
        ch = latex[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "\\":
            if i + 1 >= n:
                raise UnknownEscape(i)
            nxt = latex[i + 1]
            if nxt == "\\":
                tokens.append(Token("\\\\", i))
                i += 2
            elif nxt.isalpha():
                j = i + 1
                while j < n and latex[j].isalpha():
                    j += 1
                tokens.append(Token(latex[i:j], i))
                i = j
            else:
                raise UnknownEscape(i)
        elif ch == "{":
            depth_stack.append(i)
            tokens.append(Token(ch, i))
            i += 1
        elif ch == "}":
            if not depth_stack:
                raise UnbalancedBraces(i)
            depth_stack.pop()
            tokens.append(Token(ch, i))
            i += 1
        else:
            tokens.append(Token(ch, i))
            i += 1
    if depth_stack:
        raise UnbalancedBraces(depth_stack[-1])
    return tokens


@dataclass(frozen=True)
class EncodedExpression:
    id: str
    latex: str
    codes: List[int]
    depth: int
    label: ComplexityLabel


class _Parser:
    """Recursive-descent pass from tokens to the integer code sequence."""

    def __init__(self, tokens: List[Token], vocab: Vocabulary):
        self.tokens = tokens
        self.vocab = vocab
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse_sequence(self, stop_at_close: bool) -> List[int]:
        out: List[int] = []
        while True:
            tok = self.peek()
            if tok is None:
                if stop_at_close:
                    raise UnbalancedBraces(len(self.tokens))
                return out
            if tok.text == "}":
                if stop_at_close:
                    self.next()
                    return out
                raise UnbalancedBraces(tok.pos)
            if tok.text in ("^", "_"):
                raise MalformedScript(tok.pos, "script with no base")
            out.extend(self.parse_atom_with_scripts())

    def parse_atom_with_scripts(self) -> List[int]:
        codes = self.parse_atom()
        n_scripts = 0
        while True:
            tok = self.peek()
            if tok is None or tok.text not in ("^", "_"):
                return codes
            self.next()
            n_scripts += 1
            if n_scripts > 2:
                raise MalformedScript(tok.pos, "more than two scripts on one base")
            arg = self.parse_script_argument(tok)
            if n_scripts == 1:
                codes += [SCRIPT1_START] + arg + [SCRIPT1_END]
            else:
                codes += [SCRIPT2_START] + arg + [SCRIPT2_END]

    def parse_script_argument(self, script_tok: Token) -> List[int]:
        tok = self.peek()
        if tok is None or tok.text in ("^", "_", "}"):
            raise MalformedScript(script_tok.pos)
        if tok.text == "{":
            self.next()
            return self.parse_sequence(stop_at_close=True)
        return self.parse_atom()

    def parse_group_argument(self, cmd_tok: Token) -> List[int]:
        tok = self.peek()
        if tok is None:
            raise MalformedScript(cmd_tok.pos, "missing command argument")
        if tok.text == "{":
            self.next()
            return self.parse_sequence(stop_at_close=True)
        return self.parse_atom()

    def parse_atom(self) -> List[int]:
        tok = self.next()
        text = tok.text
        if text == "{":
            # plain group: transparent, adds no markers
            return self.parse_sequence(stop_at_close=True)
        if text == "\\\\":
            return [ROW_DELIM]
        if text == "&":
            return [COL_DELIM]
        if text.startswith("\\"):
            code = self.vocab.code(text)
            out = [code]
            for _ in range(_GROUP_COMMANDS.get(text, 0)):
                arg = self.parse_group_argument(tok)
                out += [GROUP_START] + arg + [GROUP_END]
            return out
        if len(text) == 1 and text.isalpha():
            return [VAR]
        if text in self.vocab:
            return [self.vocab.code(text)]
        raise UnknownKeyword(text, tok.pos)


def encode_codes(latex: str, vocab: Vocabulary) -> List[int]:
    """Encode LaTeX into its integer code sequence."""
    tokens = tokenize(latex)
    codes = _Parser(tokens, vocab).parse_sequence(stop_at_close=False)
    if not codes:
        raise EmptyExpression("expression yields no codes")
    return codes


def nested_depth(codes: Iterable[int]) -> int:
    """Maximum count of enclosing structural regions around any symbol."""
    open_count = 0
    stack: List[int] = []
    depth = 0
    for code in codes:
        if code in _REGION_OPENERS:
            stack.append(code)
            open_count += 1
        elif code in _REGION_CLOSERS:
            if not stack or stack[-1] != _REGION_CLOSERS[code]:
                raise UnbalancedStructure(f"unexpected closing marker {code}")
            stack.pop()
            open_count -= 1
        else:
            depth = max(depth, open_count)
    if stack:
        raise UnbalancedStructure("unclosed structural region")
    return depth


def encode(latex: str, vocab: Vocabulary, expr_id: str = "") -> EncodedExpression:
    """Full pipeline: tokenize, encode, compute depth and complexity label."""
    codes = encode_codes(latex, vocab)
    depth = nested_depth(codes)
    return EncodedExpression(
        id=expr_id,
        latex=latex,
        codes=codes,
        depth=depth,
        label=complexity_label(depth),
    )
