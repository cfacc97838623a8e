"""Labeled example sets for acceptor training.

Positives are accepting-path words of a depth-d breadth-first search on the
minimal DFA.  Negatives come in four flavours: BFS paths ending in a
non-accepting state, path words extended by a letter whose transition leaves
the live region (invalid postfix), such words further extended by a valid
path into an accepting state (invalid infix), and uniformly random rejected
words.  Assembly de-duplicates across categories and balances positives to
negatives 1:1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .automata import BfsCaps, Dfa, enumerate_paths, useful_states
from .grammars import SCHEMA_VERSION, Word, word_to_str, str_to_word
from .seeding import derive_seed, make_rng

POSITIVE = "positive"
NON_ACCEPTING_PATH = "non_accepting_path"
INVALID_POSTFIX = "invalid_postfix"
INVALID_INFIX = "invalid_infix"
RANDOM_NEGATIVE = "random_negative"

# De-duplication order: the most structurally informative category wins.
CATEGORY_PRIORITY = (POSITIVE, NON_ACCEPTING_PATH, INVALID_POSTFIX,
                     INVALID_INFIX, RANDOM_NEGATIVE)


@dataclass(frozen=True)
class Example:
    word: Word
    label: int  # 1 positive, 0 negative
    category: str


@dataclass(frozen=True)
class Dataset:
    examples: tuple[Example, ...]
    depth: int
    alphabet_size: int
    grammar_id: str
    seed: int

    def positives(self) -> list[Example]:
        return [e for e in self.examples if e.label == 1]

    def negatives(self) -> list[Example]:
        return [e for e in self.examples if e.label == 0]


@dataclass(frozen=True)
class DatasetCaps:
    """Per-category generation limits (full BFS is exponential in depth)."""

    positive: int | None = 2000
    non_accepting_path: int | None = 2000
    invalid_postfix: int | None = 2000
    invalid_infix: int | None = 2000
    frontier: int | None = 100_000


class EmptyLanguageError(ValueError):
    pass


def gen_positives(dfa: Dfa, d: int, cap: int | None, seed: int) -> list[Example]:
    """Accepting-path words of the depth-d BFS, labeled positive."""
    paths = enumerate_paths(dfa, d, BfsCaps(accepting=cap, non_accepting=0), seed)
    return [Example(word, 1, POSITIVE) for word, _, _ in paths.accepting]


def gen_neg_nonaccepting(dfa: Dfa, d: int, cap: int | None, seed: int,
                         frontier: int | None = 100_000) -> list[Example]:
    """BFS path words (all intermediate lengths) ending non-accepting."""
    paths = enumerate_paths(dfa, d, BfsCaps(accepting=0, non_accepting=cap, frontier=frontier), seed)
    return [Example(word, 0, NON_ACCEPTING_PATH) for word, _, _ in paths.non_accepting]


def _postfix_sources(dfa: Dfa, d: int, cap: int | None, seed: int) -> list[tuple[Word, int]]:
    """Path/state pairs reached in 0..d-1 steps, root included when live."""
    if dfa.initial not in useful_states(dfa):
        return []
    sources: list[tuple[Word, int]] = [((), dfa.initial)]
    if d >= 2:
        paths = enumerate_paths(dfa, d - 1, BfsCaps(accepting=cap, non_accepting=cap), seed)
        sources.extend((word, state) for word, state, _ in paths.accepting)
        sources.extend((word, state) for word, state, _ in paths.non_accepting)
    return sources


def gen_neg_invalid_postfix(dfa: Dfa, d: int, cap: int | None, seed: int) -> list[Example]:
    """Path words extended by one letter that leaves the live region.

    A letter is invalid at a state when its transition leads to a state from
    which no accepting state is reachable; appending it makes the whole word
    and every extension rejected.
    """
    useful = useful_states(dfa)
    rng = make_rng(derive_seed(seed, "select"))
    reservoir = []
    seen = 0
    for word, state in _postfix_sources(dfa, d, cap, derive_seed(seed, "bfs")):
        for letter in range(dfa.alphabet_size):
            dst = dfa.table[state][letter]
            if dst is not None and dst in useful:
                continue
            seen += 1
            item = Example(word + (letter,), 0, INVALID_POSTFIX)
            if cap is None or len(reservoir) < cap:
                reservoir.append(item)
            else:
                j = int(rng.integers(seen))
                if j < cap:
                    reservoir[j] = item
    return reservoir


def _accepting_path_words(dfa: Dfa, max_len: int, cap: int | None, seed: int,
                          frontier: int | None = 50_000) -> list[Word]:
    """Distinct label sequences of paths between any two states where the
    latter is accepting (multi-source BFS over live transitions)."""
    useful = useful_states(dfa)
    if max_len < 1 or not useful:
        return []
    rng = make_rng(seed)
    seen_words: set[Word] = set()
    out: list[Word] = []
    n_offered = 0
    level: list[tuple[Word, int]] = [((), s) for s in sorted(useful)]
    for _ in range(max_len):
        nxt: list[tuple[Word, int]] = []
        for word, state in level:
            for letter in range(dfa.alphabet_size):
                dst = dfa.table[state][letter]
                if dst is None or dst not in useful:
                    continue
                w2 = word + (letter,)
                nxt.append((w2, dst))
                if dst in dfa.accepting and w2 not in seen_words:
                    seen_words.add(w2)
                    n_offered += 1
                    if cap is None or len(out) < cap:
                        out.append(w2)
                    else:
                        j = int(rng.integers(n_offered))
                        if j < cap:
                            out[j] = w2
        if frontier is not None and len(nxt) > frontier:
            keep = sorted(rng.choice(len(nxt), size=frontier, replace=False).tolist())
            nxt = [nxt[i] for i in keep]
        level = nxt
    return out


def gen_neg_invalid_infix(dfa: Dfa, d: int, cap: int | None, seed: int) -> list[Example]:
    """Invalid-postfix words extended by a valid path into an accepting state.

    The invalid letter has already entered a dead region, so every such word
    is rejected regardless of the appended path.
    """
    if d < 2:
        return []
    postfixes = [e.word for e in gen_neg_invalid_postfix(dfa, d - 1, cap, derive_seed(seed, "postfix"))
                 if len(e.word) <= d - 1]
    bridges = _accepting_path_words(dfa, d - 1, cap, derive_seed(seed, "bridges"))
    if not postfixes or not bridges:
        return []
    rng = make_rng(derive_seed(seed, "combine"))
    out: dict[Word, Example] = {}
    budget = cap if cap is not None else len(postfixes) * len(bridges)
    if len(postfixes) * len(bridges) <= 4 * budget:
        combos = [p + b for p in postfixes for b in bridges if len(p) + len(b) <= d]
    else:
        combos = []
        for _ in range(10 * budget):
            p = postfixes[int(rng.integers(len(postfixes)))]
            b = bridges[int(rng.integers(len(bridges)))]
            if len(p) + len(b) <= d:
                combos.append(p + b)
            if cap is not None and len(combos) >= 4 * cap:
                break
    for word in combos:
        if word not in out:
            assert not dfa.accepts(word)
            out[word] = Example(word, 0, INVALID_INFIX)
        if cap is not None and len(out) >= cap:
            break
    return list(out.values())


def _draw_word(rng, t: int, d: int) -> Word:
    length = int(rng.integers(1, d + 1))
    return tuple(int(x) for x in rng.integers(0, t, size=length))


def gen_neg_random(dfa: Dfa, d: int, count: int, seed: int,
                   exclude: Iterable[Word] = ()) -> list[Example]:
    """Up to ``count`` distinct rejected words of uniform length 1..d with
    uniform letters; gives up after 50x ``count`` resampling attempts."""
    rng = make_rng(seed)
    taken = set(exclude)
    out: list[Example] = []
    attempts = 0
    while len(out) < count and attempts < 50 * count:
        attempts += 1
        word = _draw_word(rng, dfa.alphabet_size, d)
        if word in taken or dfa.accepts(word):
            continue
        taken.add(word)
        out.append(Example(word, 0, RANDOM_NEGATIVE))
    return out


def assemble(dfa: Dfa, d: int, caps: DatasetCaps = DatasetCaps(), seed: int = 0,
             grammar_id: str = "") -> Dataset:
    """Build the balanced dataset: all categories, de-duplicated by priority,
    negatives topped up with random words or down-sampled to match the
    positive count, then shuffled.  Pure function of its arguments."""
    positives = gen_positives(dfa, d, caps.positive, derive_seed(seed, "positives"))
    if not positives:
        raise EmptyLanguageError(f"empty language up to depth {d}")

    chosen: dict[Word, Example] = {e.word: e for e in positives}
    negative_batches = (
        gen_neg_nonaccepting(dfa, d, caps.non_accepting_path, derive_seed(seed, "nonacc"),
                             frontier=caps.frontier),
        gen_neg_invalid_postfix(dfa, d, caps.invalid_postfix, derive_seed(seed, "postfix")),
        gen_neg_invalid_infix(dfa, d, caps.invalid_infix, derive_seed(seed, "infix")),
    )
    for batch in negative_batches:
        for e in batch:
            chosen.setdefault(e.word, e)

    pos = [e for e in chosen.values() if e.label == 1]
    neg = [e for e in chosen.values() if e.label == 0]
    rng = make_rng(derive_seed(seed, "balance"))
    if len(neg) > len(pos):
        keep = sorted(rng.choice(len(neg), size=len(pos), replace=False).tolist())
        neg = [neg[i] for i in keep]
    elif len(neg) < len(pos):
        neg += gen_neg_random(dfa, d, len(pos) - len(neg), derive_seed(seed, "random"),
                              exclude=chosen.keys())
        if len(neg) < len(pos):
            # language too close to full: keep 1:1 by shrinking the positives
            keep = sorted(rng.choice(len(pos), size=len(neg), replace=False).tolist())
            pos = [pos[i] for i in keep]
    if not neg:
        raise EmptyLanguageError(f"no negative examples obtainable up to depth {d}")

    examples = pos + neg
    order = make_rng(derive_seed(seed, "shuffle")).permutation(len(examples))
    return Dataset(tuple(examples[i] for i in order), d, dfa.alphabet_size, grammar_id, seed)


def filter_max_len(ds: Dataset, max_len: int) -> Dataset:
    """Restrict to words of length <= max_len, re-balanced to 1:1."""
    if not 1 <= max_len <= ds.depth:
        raise ValueError("max_len must lie in 1..depth")
    kept = [e for e in ds.examples if len(e.word) <= max_len]
    pos = [e for e in kept if e.label == 1]
    neg = [e for e in kept if e.label == 0]
    if len(kept) == len(ds.examples) and len(pos) == len(neg):
        return ds
    rng = make_rng(derive_seed(ds.seed, f"filter{max_len}"))
    m = min(len(pos), len(neg))
    if len(pos) > m:
        keep = sorted(rng.choice(len(pos), size=m, replace=False).tolist())
        pos = [pos[i] for i in keep]
    if len(neg) > m:
        keep = sorted(rng.choice(len(neg), size=m, replace=False).tolist())
        neg = [neg[i] for i in keep]
    examples = pos + neg
    order = make_rng(derive_seed(ds.seed, f"filter-shuffle{max_len}")).permutation(len(examples))
    return replace(ds, examples=tuple(examples[i] for i in order))


def save_dataset(ds: Dataset, path: str | Path, terminals: tuple[str, ...]) -> None:
    """JSONL: a header line, then one example per line with the word
    rendered in terminal letters (single-character symbols required)."""
    if any(len(sym) != 1 for sym in terminals):
        raise ValueError("JSONL rendering requires single-character terminals")
    header = {
        "schema": SCHEMA_VERSION,
        "kind": "dataset",
        "depth": ds.depth,
        "alphabet_size": ds.alphabet_size,
        "terminals": list(terminals),
        "grammar_id": ds.grammar_id,
        "seed": ds.seed,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for e in ds.examples:
        lines.append(json.dumps(
            {"word": word_to_str(e.word, terminals), "label": e.label, "category": e.category},
            sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path: str | Path) -> tuple[Dataset, tuple[str, ...]]:
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    if header.get("kind") != "dataset":
        raise ValueError(f"{path} is not a dataset file")
    terminals = tuple(header["terminals"])
    examples = []
    for line in lines[1:]:
        if not line.strip():
            continue
        rec = json.loads(line)
        examples.append(Example(str_to_word(rec["word"], terminals), rec["label"], rec["category"]))
    ds = Dataset(tuple(examples), header["depth"], header["alphabet_size"],
                 header["grammar_id"], header["seed"])
    return ds, terminals
