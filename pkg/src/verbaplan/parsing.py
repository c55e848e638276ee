"""Tokenizer and deterministic chart parser for imperative commands.

The grammar lives in a plain text file: productions (`LHS -> A B | C`),
`%span` declarations naming nonterminals that collapse their whole span
into one phrase node, and a lexicon mapping words (multi-token entries
allowed, e.g. "pick up") to tags. Tags that belong to the phrase-node
tag set emit nodes; glue tags (DT, CC, NUM, UNIT, NOUN) fold into the
enclosing span's text. A structural production is headed by its first
emitted node, which adopts its siblings; clauses joined by a
conjunction hang under a linker node carrying the conjunction itself.

Parsing is exhaustive with memoization and therefore deterministic:
among complete parses the one with the fewest phrase nodes wins, ties
broken by preferring leftmost-longest node spans.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .errors import EmptyInput, ParseFailure

POS_TAGS = ("VB", "VB-NEG", "NN", "NP", "PP", "PRP", "JJ", "RB", "DT-span")

# tags that never emit nodes (their tokens join the surrounding span):
# anything outside POS_TAGS, e.g. DT, CC, NOUN, NUM, UNIT, DIRW

# categories tried for out-of-lexicon tokens; grounding features cope
# with the unknown word via embedding similarity
UNKNOWN_FALLBACK_TAGS = ("VB", "NOUN", "JJ", "RB")

_TOKEN_RE = re.compile(r"[a-z]+(?:'[a-z]+)?|\d+(?:\.\d+)?")
_NUMBER_RE = re.compile(r"^\d+(?:\.\d+)?$")


@dataclass(frozen=True)
class Sentence:
    raw: str
    tokens: tuple[str, ...]


def tokenize(raw: str) -> Sentence:
    """Lowercase tokens, punctuation stripped, apostrophes kept."""
    if raw is None:
        raise EmptyInput("no text")
    tokens = tuple(_TOKEN_RE.findall(raw.lower()))
    if not any(any(c.isalpha() for c in t) for t in tokens):
        raise EmptyInput(f"no alphabetic content in {raw!r}")
    return Sentence(raw=raw, tokens=tokens)


@dataclass
class PhraseNode:
    id: int
    text: str
    pos_tag: str
    children: list[int] = field(default_factory=list)
    span: tuple[int, int] = (0, 0)
    token_positions: tuple[int, ...] = ()
    unknown: bool = False

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.text.split())


@dataclass
class ParseTree:
    nodes: dict[int, PhraseNode]
    root: int
    tokens: tuple[str, ...]

    def node(self, node_id: int) -> PhraseNode:
        return self.nodes[node_id]

    def bfs_ids(self) -> list[int]:
        order, queue = [], [self.root]
        while queue:
            nid = queue.pop(0)
            order.append(nid)
            queue.extend(self.nodes[nid].children)
        return order

    def parent_of(self, node_id: int):
        for nid, n in self.nodes.items():
            if node_id in n.children:
                return nid
        return None

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "tokens": list(self.tokens),
            "nodes": [
                {
                    "id": n.id,
                    "text": n.text,
                    "pos_tag": n.pos_tag,
                    "children": list(n.children),
                    "span": list(n.span),
                    "token_positions": list(n.token_positions),
                    "unknown": n.unknown,
                }
                for _, n in sorted(self.nodes.items())
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "ParseTree":
        nodes = {
            int(d["id"]): PhraseNode(
                id=int(d["id"]),
                text=d["text"],
                pos_tag=d["pos_tag"],
                children=list(d["children"]),
                span=tuple(d["span"]),
                token_positions=tuple(d["token_positions"]),
                unknown=bool(d.get("unknown", False)),
            )
            for d in data["nodes"]
        }
        return cls(nodes=nodes, root=int(data["root"]), tokens=tuple(data["tokens"]))


@dataclass(frozen=True)
class GrammarSpec:
    productions: dict[str, tuple[tuple[str, ...], ...]]
    spanning: dict[str, str]  # nonterminal -> emitted tag
    lexicon: dict[tuple[str, ...], frozenset[str]]
    start: str = "S"

    @property
    def max_entry_len(self) -> int:
        return max((len(k) for k in self.lexicon), default=1)

    def tags_for(self, words: tuple[str, ...]) -> frozenset[str]:
        tags = self.lexicon.get(words, frozenset())
        if not tags and len(words) == 1 and _NUMBER_RE.match(words[0]):
            return frozenset({"NUM"})
        return tags


def parse_grammar(text: str) -> GrammarSpec:
    productions: dict[str, list[tuple[str, ...]]] = {}
    spanning: dict[str, str] = {}
    lexicon: dict[tuple[str, ...], set[str]] = {}
    section = "productions"
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("%span"):
            for decl in line.split()[1:]:
                sym, _, tag = decl.partition(":")
                spanning[sym] = tag or sym
            continue
        if line.startswith("%productions"):
            section = "productions"
            continue
        if line.startswith("%lexicon"):
            section = "lexicon"
            continue
        if section == "productions":
            lhs, _, rhs = line.partition("->")
            lhs = lhs.strip()
            alts = [tuple(alt.split()) for alt in rhs.split("|")]
            productions.setdefault(lhs, []).extend(a for a in alts if a)
        else:
            words, _, tags = line.partition(":")
            key = tuple(words.strip().split())
            lexicon.setdefault(key, set()).update(tags.strip().split())
    return GrammarSpec(
        productions={k: tuple(v) for k, v in productions.items()},
        spanning=spanning,
        lexicon={k: frozenset(v) for k, v in lexicon.items()},
    )


def load_grammar(path=None) -> GrammarSpec:
    if path is None:
        text = resources.files("verbaplan.data").joinpath("grammar.txt").read_text()
    else:
        with open(path) as f:
            text = f.read()
    return parse_grammar(text)


@lru_cache(maxsize=1)
def default_grammar() -> GrammarSpec:
    return load_grammar()


class _Deriv:
    """A candidate derivation: an ordered forest of emitted nodes."""

    __slots__ = ("forest", "count", "key")

    def __init__(self, forest, count, key):
        self.forest = forest  # list of _PN roots in span order
        self.count = count  # emitted node count
        self.key = key  # tie-break: sorted (start, -end) spans

    def better_than(self, other) -> bool:
        if other is None:
            return True
        return (self.count, self.key) < (other.count, other.key)


class _PN:
    __slots__ = ("tag", "span", "positions", "children", "unknown")

    def __init__(self, tag, span, positions, children=(), unknown=False):
        self.tag = tag
        self.span = span
        self.positions = tuple(positions)
        self.children = list(children)
        self.unknown = unknown


def _forest_key(forest):
    spans = []

    def walk(n):
        spans.append((n.span[0], -n.span[1]))
        for c in n.children:
            walk(c)

    for n in forest:
        walk(n)
    return tuple(sorted(spans))


def _count(forest):
    return sum(1 + _count(n.children) for n in forest)


def parse(sentence: Sentence, grammar: GrammarSpec | None = None) -> ParseTree:
    """Best parse of a tokenized command, or ParseFailure.

    Deterministic: identical token lists give identical trees.
    """
    grammar = grammar or default_grammar()
    tokens = sentence.tokens
    n = len(tokens)
    memo: dict[tuple[str, int, int], _Deriv | None] = {}
    known = set()
    for key in grammar.lexicon:
        known.update(key)

    def is_known(tok):
        return tok in known or bool(_NUMBER_RE.match(tok))

    def lexical(symbol, i, j):
        words = tokens[i:j]
        tags = grammar.tags_for(words)
        unknown = False
        if symbol not in tags and j - i == 1 and tokens[i] not in known and not _NUMBER_RE.match(tokens[i]):
            if symbol in UNKNOWN_FALLBACK_TAGS:
                unknown = True
            else:
                return None
        elif symbol not in tags:
            return None
        if symbol in POS_TAGS:
            node = _PN(symbol, (i, j), range(i, j), unknown=unknown)
            return _Deriv([node], 1, _forest_key([node]))
        # glue: emits nothing, still occupies its span
        return _Deriv([], 0, ())

    def best(symbol, i, j):
        key = (symbol, i, j)
        if key in memo:
            return memo[key]
        memo[key] = None  # cycle guard
        cand = None
        if symbol in grammar.productions:
            for rhs in grammar.productions[symbol]:
                for parts in _splits(i, j, len(rhs)):
                    subs = []
                    for sym, (a, b) in zip(rhs, parts):
                        d = best(sym, a, b)
                        if d is None:
                            break
                        subs.append((sym, (a, b), d))
                    else:
                        d = _combine(grammar, symbol, parts, subs, is_known, tokens)
                        if d is not None and d.better_than(cand):
                            cand = d
        else:
            d = lexical(symbol, i, j)
            if d is not None and d.better_than(cand):
                cand = d
        memo[key] = cand
        return cand

    def _splits(i, j, r):
        if r == 1:
            yield [(i, j)]
            return
        for m in range(i + 1, j - r + 2):
            for rest in _splits(m, j, r - 1):
                yield [(i, m)] + rest

    root = best(grammar.start, 0, n)
    if root is None or len(root.forest) != 1:
        best_prefix = 0
        for j in range(n, 0, -1):
            if any(best(sym, 0, j) is not None for sym in grammar.productions):
                best_prefix = j
                break
        raise ParseFailure(
            f"cannot parse {' '.join(tokens)!r}; longest recognized prefix: {' '.join(tokens[:best_prefix])!r}",
            prefix_tokens=tokens[:best_prefix],
        )
    return _build_tree(root.forest[0], tokens)


def _combine(grammar, symbol, parts, subs, is_known, tokens):
    flat = [node for _, _, d in subs for node in d.forest]
    # glue preterminals emit nothing and own their whole span
    cc_positions = [p for sym, (a, b), d in subs if not d.forest and sym == "CC" for p in range(a, b)]
    has_plain_glue = any(not d.forest and sym != "CC" for sym, _, d in subs)
    i, j = parts[0][0], parts[-1][1]

    if symbol in grammar.spanning:
        covered = set()
        for node in flat:
            covered.update(_all_positions(node))
        residue = [p for p in range(i, j) if p not in covered]
        if not residue:
            return None
        node = _PN(
            grammar.spanning[symbol],
            (i, j),
            residue,
            children=flat,
            unknown=any(not is_known(tokens[p]) for p in residue),
        )
        forest = [node]
    elif cc_positions:
        node = _PN("PP", (i, j), cc_positions, children=flat)
        forest = [node]
    else:
        if not flat or has_plain_glue:
            return None
        head, rest = flat[0], flat[1:]
        head = _PN(head.tag, (i, j), head.positions, children=head.children + rest, unknown=head.unknown)
        forest = [head]
    return _Deriv(forest, _count(forest), _forest_key(forest))


def _all_positions(node):
    pos = set(node.positions)
    for c in node.children:
        pos.update(_all_positions(c))
    return pos


def _build_tree(root: _PN, tokens) -> ParseTree:
    nodes: dict[int, PhraseNode] = {}
    queue = [(root, None)]
    order = []
    while queue:
        pn, parent = queue.pop(0)
        order.append((pn, parent))
        for c in pn.children:
            queue.append((c, pn))
    ids = {id(pn): k + 1 for k, (pn, _) in enumerate(order)}
    for pn, parent in order:
        nid = ids[id(pn)]
        positions = tuple(sorted(pn.positions))
        nodes[nid] = PhraseNode(
            id=nid,
            text=" ".join(tokens[p] for p in positions),
            pos_tag=pn.tag,
            children=[ids[id(c)] for c in pn.children],
            span=pn.span,
            token_positions=positions,
            unknown=pn.unknown,
        )
    return ParseTree(nodes=nodes, root=1, tokens=tuple(tokens))


def parse_command(text: str, grammar: GrammarSpec | None = None) -> ParseTree:
    return parse(tokenize(text), grammar)
