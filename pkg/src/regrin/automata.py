"""Finite acceptors: grammar-to-NFA conversion, subset-construction
determinization, Hopcroft minimization, canonical isomorphism testing,
per-length word counting, intersection products, and a capped
breadth-first path enumerator used by the example generator.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path

from .grammars import SCHEMA_VERSION, Grammar, Word, dumps_canonical
from .seeding import make_rng


@dataclass(frozen=True)
class Nfa:
    state_count: int
    alphabet_size: int
    transitions: frozenset[tuple[int, int, int]]  # (src, letter, dst)
    initial: int
    accepting: frozenset[int]


@dataclass(frozen=True)
class Dfa:
    state_count: int
    alphabet_size: int
    # table[state][letter] -> state, or None where partial
    table: tuple[tuple[int | None, ...], ...]
    initial: int
    accepting: frozenset[int]
    complete: bool

    def accepts(self, word: Word) -> bool:
        state = self.initial
        for letter in word:
            nxt = self.table[state][letter]
            if nxt is None:
                return False
            state = nxt
        return state in self.accepting


def grammar_to_nfa(g: Grammar) -> Nfa:
    """NFA whose state after reading a prefix is a nonterminal deriving it.

    States are the nonterminals plus a fresh initial state; ``A -> a`` gives
    ``init --a--> A`` and ``A -> B a`` gives ``B --a--> A``; the start
    nonterminal is the single accepting state.
    """
    init = g.n
    trans = set()
    for p in g.productions:
        src = init if p.prev is None else p.prev
        trans.add((src, p.terminal, p.lhs))
    return Nfa(g.n + 1, g.t, frozenset(trans), init, frozenset({g.start}))


def nfa_accepts(nfa: Nfa, word: Word) -> bool:
    by_src_letter = defaultdict(set)
    for src, letter, dst in nfa.transitions:
        by_src_letter[(src, letter)].add(dst)
    current = {nfa.initial}
    for letter in word:
        current = set().union(*(by_src_letter[(s, letter)] for s in current)) if current else set()
    return bool(current & nfa.accepting)


def determinize(nfa: Nfa) -> Dfa:
    """Subset construction over reachable subsets; the empty subset acts as
    the sink, so the result is always complete."""
    by_src_letter = defaultdict(set)
    for src, letter, dst in nfa.transitions:
        by_src_letter[(src, letter)].add(dst)
    start = frozenset({nfa.initial})
    ids = {start: 0}
    order = [start]
    table_rows = []
    queue = deque([start])
    while queue:
        subset = queue.popleft()
        row = []
        for letter in range(nfa.alphabet_size):
            nxt = frozenset().union(*(by_src_letter[(s, letter)] for s in subset)) if subset else frozenset()
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(ids[nxt])
        table_rows.append(tuple(row))
    accepting = frozenset(i for i, subset in enumerate(order) if subset & nfa.accepting)
    return Dfa(len(order), nfa.alphabet_size, tuple(table_rows), 0, accepting, complete=True)


def _reachable_states(dfa: Dfa) -> list[int]:
    seen = {dfa.initial}
    order = [dfa.initial]
    queue = deque([dfa.initial])
    while queue:
        s = queue.popleft()
        for letter in range(dfa.alphabet_size):
            nxt = dfa.table[s][letter]
            if nxt is not None and nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
    return order


def _canonicalize(dfa: Dfa) -> Dfa:
    """Relabel states by BFS discovery order from the initial state, with
    letters taken in alphabet order.  Equal-language minimal DFAs map to the
    identical table, which is what the isomorphism test compares."""
    order = _reachable_states(dfa)
    relabel = {old: new for new, old in enumerate(order)}
    table = tuple(
        tuple(None if dfa.table[old][a] is None else relabel[dfa.table[old][a]]
              for a in range(dfa.alphabet_size))
        for old in order
    )
    accepting = frozenset(relabel[s] for s in dfa.accepting if s in relabel)
    return Dfa(len(order), dfa.alphabet_size, table, 0, accepting, dfa.complete)


def minimize(dfa: Dfa) -> Dfa:
    """Unique minimal complete DFA of the same language (Hopcroft's
    partition refinement), canonically relabeled.  Unreachable states are
    dropped before refinement; partial DFAs are rejected."""
    if not dfa.complete:
        raise ValueError("minimize requires a complete DFA")
    reachable = _reachable_states(dfa)
    reach_set = set(reachable)

    preds = defaultdict(set)  # (letter, dst) -> {src}
    for s in reachable:
        for letter in range(dfa.alphabet_size):
            preds[(letter, dfa.table[s][letter])].add(s)

    final = frozenset(s for s in reachable if s in dfa.accepting)
    non_final = frozenset(reach_set - final)
    partition = {p for p in (final, non_final) if p}
    block_of = {}
    for block in partition:
        for s in block:
            block_of[s] = block

    worklist = set()
    if final and non_final:
        worklist.add(final if len(final) <= len(non_final) else non_final)
    while worklist:
        splitter = worklist.pop()
        for letter in range(dfa.alphabet_size):
            affected = defaultdict(set)
            for dst in splitter:
                for src in preds.get((letter, dst), ()):
                    affected[block_of[src]].add(src)
            for block, overlap in affected.items():
                if len(overlap) == len(block):
                    continue
                part1 = frozenset(overlap)
                part2 = block - part1
                partition.remove(block)
                partition.update((part1, part2))
                for s in part1:
                    block_of[s] = part1
                for s in part2:
                    block_of[s] = part2
                if block in worklist:
                    worklist.remove(block)
                    worklist.update((part1, part2))
                else:
                    worklist.add(part1 if len(part1) <= len(part2) else part2)

    blocks = sorted(partition, key=min)
    block_id = {block: i for i, block in enumerate(blocks)}
    table = []
    for block in blocks:
        rep = min(block)
        table.append(tuple(block_id[block_of[dfa.table[rep][a]]] for a in range(dfa.alphabet_size)))
    accepting = frozenset(block_id[b] for b in blocks if b & dfa.accepting)
    quotient = Dfa(len(blocks), dfa.alphabet_size, tuple(table), block_id[block_of[dfa.initial]],
                   accepting, complete=True)
    return _canonicalize(quotient)


def grammar_to_min_dfa(g: Grammar) -> Dfa:
    return minimize(determinize(grammar_to_nfa(g)))


def is_isomorphic(d1: Dfa, d2: Dfa) -> bool:
    """State-relabeling equality of two minimal complete DFAs, decided by
    comparing canonical (BFS-relabeled) transition tables."""
    if d1.alphabet_size != d2.alphabet_size:
        raise ValueError("alphabet size mismatch")
    if not (d1.complete and d2.complete):
        raise ValueError("isomorphism test requires complete DFAs")
    c1, c2 = _canonicalize(d1), _canonicalize(d2)
    return (c1.state_count, c1.table, c1.accepting) == (c2.state_count, c2.table, c2.accepting)


def count_words(dfa: Dfa, d: int) -> list[int]:
    """Number of accepted words per length 1..d, by integer DP over states."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if not dfa.complete:
        raise ValueError("count_words requires a complete DFA")
    counts = [0] * dfa.state_count
    counts[dfa.initial] = 1
    out = []
    for _ in range(d):
        nxt = [0] * dfa.state_count
        for s, c in enumerate(counts):
            if c:
                for letter in range(dfa.alphabet_size):
                    nxt[dfa.table[s][letter]] += c
        counts = nxt
        out.append(sum(counts[s] for s in dfa.accepting))
    return out


def product_intersection(d1: Dfa, d2: Dfa) -> Dfa:
    """Product automaton accepting the intersection of the two languages."""
    if d1.alphabet_size != d2.alphabet_size:
        raise ValueError("alphabet size mismatch")
    if not (d1.complete and d2.complete):
        raise ValueError("product requires complete DFAs")
    start = (d1.initial, d2.initial)
    ids = {start: 0}
    order = [start]
    table = []
    queue = deque([start])
    while queue:
        s1, s2 = queue.popleft()
        row = []
        for letter in range(d1.alphabet_size):
            nxt = (d1.table[s1][letter], d2.table[s2][letter])
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(ids[nxt])
        table.append(tuple(row))
    accepting = frozenset(i for i, (s1, s2) in enumerate(order)
                          if s1 in d1.accepting and s2 in d2.accepting)
    return Dfa(len(order), d1.alphabet_size, tuple(table), 0, accepting, complete=True)


def useful_states(dfa: Dfa) -> frozenset[int]:
    """States from which some accepting state is reachable."""
    preds = defaultdict(set)
    for s in range(dfa.state_count):
        for letter in range(dfa.alphabet_size):
            dst = dfa.table[s][letter]
            if dst is not None:
                preds[dst].add(s)
    seen = set(dfa.accepting)
    queue = deque(seen)
    while queue:
        for src in preds[queue.popleft()]:
            if src not in seen:
                seen.add(src)
                queue.append(src)
    return frozenset(seen)


PathEntry = tuple[Word, int, bool]  # (word, end state, ends accepting?)


@dataclass(frozen=True)
class BfsCaps:
    """Reservoir limits for enumerate_paths; None means unlimited."""

    accepting: int | None = None
    non_accepting: int | None = None
    frontier: int | None = 100_000


@dataclass
class BfsYield:
    accepting: list[PathEntry] = field(default_factory=list)
    non_accepting: list[PathEntry] = field(default_factory=list)
    truncated: bool = False


class _Reservoir:
    """Uniform reservoir (algorithm R) over a stream, deterministic per rng."""

    def __init__(self, cap: int | None, rng) -> None:
        self.cap = cap
        self.rng = rng
        self.items: list = []
        self.seen = 0
        self.overflowed = False

    def offer(self, item) -> None:
        self.seen += 1
        if self.cap == 0:
            self.overflowed = True
            return
        if self.cap is None or len(self.items) < self.cap:
            self.items.append(item)
        else:
            self.overflowed = True
            j = int(self.rng.integers(self.seen))
            if j < self.cap:
                self.items[j] = item


def enumerate_paths(dfa: Dfa, d: int, caps: BfsCaps = BfsCaps(), seed: int = 0) -> BfsYield:
    """Breadth-first path enumeration of depth d over useful transitions.

    Only transitions into states from which acceptance is reachable are
    walked, so the search never enters a dead region.  Every visited path of
    length 1..d is reported with its end state and acceptance flag.  When a
    category exceeds its cap the kept subset is a seeded uniform reservoir;
    the frontier itself is subsampled to ``caps.frontier`` per level so deep
    searches stay tractable.
    """
    rng = make_rng(seed)
    useful = useful_states(dfa)
    out = BfsYield()
    if dfa.initial not in useful:
        return out
    res_acc = _Reservoir(caps.accepting, rng)
    res_non = _Reservoir(caps.non_accepting, rng)
    frontier: list[tuple[Word, int]] = [((), dfa.initial)]
    for _ in range(d):
        nxt: list[tuple[Word, int]] = []
        for word, state in frontier:
            for letter in range(dfa.alphabet_size):
                dst = dfa.table[state][letter]
                if dst is None or dst not in useful:
                    continue
                entry = (word + (letter,), dst, dst in dfa.accepting)
                (res_acc if entry[2] else res_non).offer(entry)
                nxt.append((entry[0], dst))
        if caps.frontier is not None and len(nxt) > caps.frontier:
            keep = sorted(rng.choice(len(nxt), size=caps.frontier, replace=False).tolist())
            nxt = [nxt[i] for i in keep]
            out.truncated = True
        frontier = nxt
    out.accepting = res_acc.items
    out.non_accepting = res_non.items
    out.truncated = out.truncated or res_acc.overflowed or res_non.overflowed
    return out


def dfa_to_json(dfa: Dfa, terminals: tuple[str, ...] | None = None) -> dict:
    data = {
        "schema": SCHEMA_VERSION,
        "state_count": dfa.state_count,
        "alphabet_size": dfa.alphabet_size,
        "table": [list(row) for row in dfa.table],
        "initial": dfa.initial,
        "accepting": sorted(dfa.accepting),
        "complete": dfa.complete,
    }
    if terminals is not None:
        data["terminals"] = list(terminals)
    return data


def dfa_from_json(data: dict) -> Dfa:
    return Dfa(
        state_count=data["state_count"],
        alphabet_size=data["alphabet_size"],
        table=tuple(tuple(row) for row in data["table"]),
        initial=data["initial"],
        accepting=frozenset(data["accepting"]),
        complete=data["complete"],
    )


def save_dfa(dfa: Dfa, path: str | Path, terminals: tuple[str, ...] | None = None) -> None:
    Path(path).write_text(dumps_canonical(dfa_to_json(dfa, terminals)))


def load_dfa(path: str | Path) -> Dfa:
    return dfa_from_json(json.loads(Path(path).read_text()))
