"""Reading a grammar and parse trees out of trained acceptor parameters.

A sigmoid entry at or above the confidence threshold is read as a
production; the start symbol is the argmax of the softmaxed start logits.
The same thresholds drive direct parse-forest construction, where each
position of the input word carries the set of parse-tree roots that can
derive the prefix ending there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grammars import (Grammar, Production, Word, default_nonterminal_names,
                       default_terminal_names)
from .model import ModelParams, forward, sigmoid, softmax


def extract_grammar(params: ModelParams, tau: float,
                    terminals: tuple[str, ...] | None = None,
                    nonterminals: tuple[str, ...] | None = None) -> Grammar:
    """Threshold the production matrices into a grammar.

    The start symbol is realized by designation (index of the largest
    softmax weight) rather than by a unit production.  Nonterminals that end
    up unused or unreachable are retained, so the result may even be
    production-less when nothing clears the threshold.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly between 0 and 1")
    n_prime, t = params.term_logits.shape
    terminals = terminals if terminals is not None else default_terminal_names(t)
    nonterminals = nonterminals if nonterminals is not None else default_nonterminal_names(n_prime)
    if len(terminals) != t or len(nonterminals) != n_prime:
        raise ValueError("symbol name lists do not match the parameter shape")
    prods = []
    for i, j in np.argwhere(sigmoid(params.term_logits) >= tau):
        prods.append(Production(int(i), None, int(j)))
    for k, i, j in np.argwhere(sigmoid(params.nonterm_logits) >= tau):
        prods.append(Production(int(k), int(i), int(j)))
    start = int(np.argmax(softmax(params.start_logits)))
    return Grammar(tuple(terminals), tuple(nonterminals), tuple(prods), start)


def plant_grammar(g: Grammar, n_prime: int, hi_logit: float = 10.0,
                  lo_logit: float = -10.0) -> ModelParams:
    """Parameters that encode a known grammar exactly: hi logits on its
    productions and its start index, lo everywhere else."""
    if g.n > n_prime:
        raise ValueError(f"grammar has {g.n} nonterminals, model only {n_prime}")
    term = np.full((n_prime, g.t), lo_logit)
    nonterm = np.full((n_prime, n_prime, g.t), lo_logit)
    start = np.full(n_prime, lo_logit)
    for p in g.productions:
        if p.prev is None:
            term[p.lhs, p.terminal] = hi_logit
        else:
            nonterm[p.lhs, p.prev, p.terminal] = hi_logit
    start[g.start] = hi_logit
    return ModelParams(term, nonterm, start)


@dataclass(frozen=True)
class ParseNode:
    symbol: int
    is_terminal: bool
    children: tuple["ParseNode", ...]
    span: tuple[int, int]  # 1-based prefix positions covered

    def leaves(self) -> list[int]:
        if self.is_terminal:
            return [self.symbol]
        out: list[int] = []
        for child in self.children:
            out.extend(child.leaves())
        return out


def parse_forest(params: ModelParams, word: Word, tau: float) -> list[list[ParseNode]]:
    """Per-position root sets of parse trees for each prefix of the word.

    Position 1 roots are nonterminals whose terminal-production weight for
    the first letter clears tau.  Inductively, a root k appears at position
    i+1 for every production k -> (j, letter) whose weight clears tau, where
    the belief in j at position i also clears tau and j has a tree there.
    An empty root set at some position means no parse survives past it.
    """
    if len(word) == 0:
        raise ValueError("cannot parse the empty word")
    trace = forward(params, word)
    s_term = sigmoid(params.term_logits)
    s_nonterm = sigmoid(params.nonterm_logits)
    n_prime = params.n_prime

    def leaf(position: int) -> ParseNode:
        return ParseNode(word[position - 1], True, (), (position, position))

    forest: list[list[ParseNode]] = [[
        ParseNode(k, False, (leaf(1),), (1, 1))
        for k in range(n_prime) if s_term[k, word[0]] >= tau
    ]]
    for i in range(1, len(word)):
        weights = s_nonterm[:, :, word[i]]
        beliefs = trace.u_vectors[i - 1]
        level: list[ParseNode] = []
        for k in range(n_prime):
            for j in range(n_prime):
                if weights[k, j] < tau or beliefs[j] < tau:
                    continue
                for subtree in forest[i - 1]:
                    if subtree.symbol == j:
                        level.append(ParseNode(k, False, (subtree, leaf(i + 1)), (1, i + 1)))
        forest.append(level)
    return forest


def render_tree(node: ParseNode, terminals: tuple[str, ...],
                nonterminals: tuple[str, ...]) -> str:
    if node.is_terminal:
        return terminals[node.symbol]
    inner = " ".join(render_tree(c, terminals, nonterminals) for c in node.children)
    return f"({nonterminals[node.symbol]} {inner})"


def tree_to_json(node: ParseNode, terminals: tuple[str, ...],
                 nonterminals: tuple[str, ...]) -> dict:
    if node.is_terminal:
        return {"terminal": terminals[node.symbol], "span": list(node.span)}
    return {
        "nonterminal": nonterminals[node.symbol],
        "span": list(node.span),
        "children": [tree_to_json(c, terminals, nonterminals) for c in node.children],
    }
