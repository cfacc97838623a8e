"""Left-regular grammars: domain types, a randomized generator, and a
brute-force derivation oracle.

A grammar is a triple of terminal alphabet, nonterminal alphabet and
productions, with one nonterminal designated as the start symbol.  All
productions are of the form ``A -> a`` or ``A -> B a``; empty productions
are not representable, so every derivable word has length >= 1.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .seeding import geometric, make_rng

Word = tuple[int, ...]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Production:
    """``lhs -> prev terminal`` when ``prev`` is set, else ``lhs -> terminal``."""

    lhs: int
    prev: Optional[int]
    terminal: int

    @property
    def is_terminal(self) -> bool:
        return self.prev is None


def _prod_key(p: Production) -> tuple:
    return (p.lhs, p.prev is not None, -1 if p.prev is None else p.prev, p.terminal)


@dataclass(frozen=True)
class Grammar:
    terminals: tuple[str, ...]
    nonterminals: tuple[str, ...]
    productions: tuple[Production, ...]
    start: int

    @property
    def t(self) -> int:
        return len(self.terminals)

    @property
    def n(self) -> int:
        return len(self.nonterminals)

    def production_names(self) -> set[tuple]:
        """Productions as name tuples, for comparisons across nonterminal pools."""
        out = set()
        for p in self.productions:
            if p.prev is None:
                out.add((self.nonterminals[p.lhs], self.terminals[p.terminal]))
            else:
                out.add((self.nonterminals[p.lhs], self.nonterminals[p.prev],
                         self.terminals[p.terminal]))
        return out


@dataclass(frozen=True)
class GenConfig:
    """Knobs of the randomized grammar generator."""

    t: int
    n: int
    p_bar: float
    p_terminal: float = 0.4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t < 1 or self.n < 1:
            raise ValueError("t and n must be >= 1")
        if self.p_bar < 1:
            raise ValueError("p_bar must be >= 1")
        if not 0.0 < self.p_terminal < 1.0:
            raise ValueError("p_terminal must lie strictly between 0 and 1")


def default_terminal_names(t: int) -> tuple[str, ...]:
    if t <= 26:
        return tuple(chr(ord("a") + i) for i in range(t))
    return tuple(f"t{i}" for i in range(t))


def default_nonterminal_names(n: int) -> tuple[str, ...]:
    if n <= 26:
        return tuple(chr(ord("A") + i) for i in range(n))
    return tuple(f"N{i}" for i in range(n))


def validate(g: Grammar) -> list[str]:
    """Return a list of invariant violations; empty iff the grammar is well formed."""
    issues: list[str] = []
    if not g.terminals:
        issues.append("terminal alphabet empty")
    if not g.nonterminals:
        issues.append("nonterminal alphabet empty")
    if len(set(g.terminals)) != len(g.terminals):
        issues.append("duplicate terminal symbol")
    if len(set(g.nonterminals)) != len(g.nonterminals):
        issues.append("duplicate nonterminal symbol")
    if not 0 <= g.start < len(g.nonterminals):
        issues.append(f"start out of range: {g.start}")
    seen = set()
    for p in g.productions:
        if not 0 <= p.lhs < len(g.nonterminals):
            issues.append(f"lhs out of range: {p}")
        if not 0 <= p.terminal < len(g.terminals):
            issues.append(f"terminal out of range: {p}")
        if p.prev is not None and not 0 <= p.prev < len(g.nonterminals):
            issues.append(f"rhs nonterminal out of range: {p}")
        if p in seen:
            issues.append(f"duplicate production: {p}")
        seen.add(p)
    if not any(p.prev is None for p in g.productions):
        issues.append("no terminal production")
    return issues


def _reachable(productions: Iterable[Production], start: int) -> set[int]:
    edges = defaultdict(set)
    for p in productions:
        if p.prev is not None:
            edges[p.lhs].add(p.prev)
    seen = {start}
    stack = [start]
    while stack:
        for nxt in edges[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def random_grammar(cfg: GenConfig) -> Grammar:
    """Sample a ground-truth grammar.

    Per nonterminal the production count is geometric with mean ``p_bar``
    (support starting at 1); each production is a terminal one with
    probability ``p_terminal``, otherwise ``A -> B a`` with B and a uniform.
    Duplicates collapse silently.  Afterwards the grammar is repaired so the
    language is non-empty (at least one terminal production) and every
    nonterminal is derivation-reachable from the uniformly chosen start:
    unreachable nonterminals are fixed in index order by adding
    ``A_i -> A_j a`` with reachable A_i and random a, re-computing
    reachability after each addition.
    """
    rng = make_rng(cfg.seed)
    prods: set[Production] = set()
    for lhs in range(cfg.n):
        for _ in range(geometric(rng, cfg.p_bar)):
            if rng.random() < cfg.p_terminal:
                prods.add(Production(lhs, None, int(rng.integers(cfg.t))))
            else:
                prev = int(rng.integers(cfg.n))
                prods.add(Production(lhs, prev, int(rng.integers(cfg.t))))
    start = int(rng.integers(cfg.n))
    if not any(p.prev is None for p in prods):
        prods.add(Production(int(rng.integers(cfg.n)), None, int(rng.integers(cfg.t))))
    while True:
        reach = _reachable(prods, start)
        missing = [j for j in range(cfg.n) if j not in reach]
        if not missing:
            break
        src = sorted(reach)[int(rng.integers(len(reach)))]
        prods.add(Production(src, missing[0], int(rng.integers(cfg.t))))
    return Grammar(
        terminals=default_terminal_names(cfg.t),
        nonterminals=default_nonterminal_names(cfg.n),
        productions=tuple(sorted(prods, key=_prod_key)),
        start=start,
    )


def derive_words(g: Grammar, max_len: int) -> set[Word]:
    """All words of length 1..max_len derivable from the start symbol.

    Dynamic programming over (nonterminal, length): the length-l set of a
    nonterminal extends the length-(l-1) sets of its rhs nonterminals by one
    letter.  Exponential in the word count; intended as a small-scale oracle.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    term_by_lhs = defaultdict(list)
    nonterm_by_lhs = defaultdict(list)
    for p in g.productions:
        (term_by_lhs if p.prev is None else nonterm_by_lhs)[p.lhs].append(p)
    prev_level: list[set[Word]] = [set() for _ in range(g.n)]
    for lhs, plist in term_by_lhs.items():
        prev_level[lhs] = {(p.terminal,) for p in plist}
    result: set[Word] = set(prev_level[g.start])
    for _ in range(2, max_len + 1):
        level: list[set[Word]] = [set() for _ in range(g.n)]
        for lhs in range(g.n):
            for p in nonterm_by_lhs.get(lhs, ()):
                level[lhs].update(w + (p.terminal,) for w in prev_level[p.prev])
        result.update(level[g.start])
        prev_level = level
    return result


def word_to_str(word: Word, terminals: tuple[str, ...]) -> str:
    return "".join(terminals[i] for i in word)


def str_to_word(text: str, terminals: tuple[str, ...]) -> Word:
    index = {sym: i for i, sym in enumerate(terminals)}
    try:
        return tuple(index[ch] for ch in text)
    except KeyError as exc:
        raise ValueError(f"letter {exc.args[0]!r} not in alphabet {terminals}") from None


def grammar_to_json(g: Grammar) -> dict:
    """Canonical JSON form: symbol arrays and productions sorted lexicographically."""
    term_order = sorted(range(g.t), key=lambda i: g.terminals[i])
    nont_order = sorted(range(g.n), key=lambda i: g.nonterminals[i])
    prods = []
    for p in g.productions:
        entry = {"lhs": g.nonterminals[p.lhs], "terminal": g.terminals[p.terminal]}
        if p.prev is not None:
            entry["nonterminal"] = g.nonterminals[p.prev]
        prods.append(entry)
    prods.sort(key=lambda e: (e["lhs"], e.get("nonterminal", ""), e["terminal"]))
    return {
        "schema": SCHEMA_VERSION,
        "terminals": [g.terminals[i] for i in term_order],
        "nonterminals": [g.nonterminals[i] for i in nont_order],
        "start": g.nonterminals[g.start],
        "productions": prods,
    }


def grammar_from_json(data: dict) -> Grammar:
    terminals = tuple(data["terminals"])
    nonterminals = tuple(data["nonterminals"])
    t_index = {sym: i for i, sym in enumerate(terminals)}
    n_index = {sym: i for i, sym in enumerate(nonterminals)}
    prods = []
    for entry in data["productions"]:
        lhs = n_index[entry["lhs"]]
        term = t_index[entry["terminal"]]
        prev = n_index[entry["nonterminal"]] if "nonterminal" in entry else None
        prods.append(Production(lhs, prev, term))
    return Grammar(terminals, nonterminals, tuple(prods), n_index[data["start"]])


def dumps_canonical(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def save_grammar(g: Grammar, path: str | Path) -> None:
    Path(path).write_text(dumps_canonical(grammar_to_json(g)))


def load_grammar(path: str | Path) -> Grammar:
    g = grammar_from_json(json.loads(Path(path).read_text()))
    issues = [v for v in validate(g) if "out of range" in v or "duplicate" in v]
    if issues:
        raise ValueError(f"malformed grammar file {path}: {issues[0]}")
    return g


def grammar_id(g: Grammar) -> str:
    """Stable content hash of the canonical JSON form."""
    blob = dumps_canonical(grammar_to_json(g)).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]
