"""Comparing an induced grammar against the ground truth.

Both grammars become minimal complete DFAs; isomorphic automata mean full
language equivalence.  Otherwise the length-bounded language subsets are
compared by exact integer counting: recall |common|/|true|, precision
|common|/|induced|, accuracy |common|/|union|, all as rationals.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .automata import count_words, grammar_to_min_dfa, is_isomorphic, product_intersection
from .datasets import DatasetCaps, assemble, filter_max_len
from .extraction import extract_grammar
from .grammars import GenConfig, Grammar, grammar_id, random_grammar
from .model import TrainConfig, train
from .seeding import derive_seed


@dataclass(frozen=True)
class EvalReport:
    isomorphic: bool
    recall: Fraction
    precision: Fraction
    accuracy: Fraction
    d: int
    words_true: int
    words_induced: int
    words_common: int
    states_true: int
    states_induced: int


def _ratio(num: int, den: int) -> Fraction:
    # convention: an empty denominator set scores 1
    return Fraction(1) if den == 0 else Fraction(num, den)


def evaluate(g_true: Grammar, g_induced: Grammar, d: int) -> EvalReport:
    """Exact-equivalence check, with length-bounded metrics as fallback."""
    if g_true.terminals != g_induced.terminals:
        raise ValueError("terminal alphabets differ")
    if d < 1:
        raise ValueError("d must be >= 1")
    dfa_true = grammar_to_min_dfa(g_true)
    dfa_induced = grammar_to_min_dfa(g_induced)
    n_true = sum(count_words(dfa_true, d))
    n_induced = sum(count_words(dfa_induced, d))
    n_common = sum(count_words(product_intersection(dfa_true, dfa_induced), d))
    if is_isomorphic(dfa_true, dfa_induced):
        one = Fraction(1)
        return EvalReport(True, one, one, one, d, n_true, n_induced, n_common,
                          dfa_true.state_count, dfa_induced.state_count)
    n_union = n_true + n_induced - n_common
    return EvalReport(
        isomorphic=False,
        recall=_ratio(n_common, n_true),
        precision=_ratio(n_common, n_induced),
        accuracy=_ratio(n_common, n_union),
        d=d,
        words_true=n_true,
        words_induced=n_induced,
        words_common=n_common,
        states_true=dfa_true.state_count,
        states_induced=dfa_induced.state_count,
    )


@dataclass(frozen=True)
class GridCell:
    t: int
    n: int
    p_bar: float
    train_len: int

    def label(self) -> str:
        return f"t{self.t}_n{self.n}_p{self.p_bar:g}_L{self.train_len}"


@dataclass(frozen=True)
class ExperimentGrid:
    cells: tuple[GridCell, ...]
    depth: int
    caps: DatasetCaps = DatasetCaps()


@dataclass
class RunResult:
    cell: GridCell
    run: int
    seed: int
    isomorphic: bool = False
    recall: Fraction = Fraction(0)
    precision: Fraction = Fraction(0)
    accuracy: Fraction = Fraction(0)
    epochs: int = 0
    seconds: float = 0.0
    error: str | None = None


def run_single(cell: GridCell, run: int, depth: int, caps: DatasetCaps,
               train_cfg: TrainConfig, master_seed: int,
               step_floor: int = 15_000, min_lang_words: int = 100) -> RunResult:
    """Grammar -> dataset -> train -> extract -> evaluate, one seeded run.

    The cell's grammar is re-drawn (deterministically) until its language
    holds at least ``min_lang_words`` words up to the training length;
    degenerate draws yield datasets of a handful of words, which measure
    sampling luck rather than induction quality.  ``step_floor`` raises the
    epoch count for small datasets so every run gets a comparable
    optimizer-step budget.
    """
    seed = derive_seed(master_seed, f"{cell.label()}_r{run}")
    result = RunResult(cell, run, seed)
    started = time.perf_counter()
    try:
        attempt = 0
        while True:
            g = random_grammar(GenConfig(cell.t, cell.n, cell.p_bar,
                                         seed=derive_seed(seed, f"grammar{attempt}")))
            dfa = grammar_to_min_dfa(g)
            if sum(count_words(dfa, min(cell.train_len, depth))) >= min_lang_words:
                break
            attempt += 1
        ds = assemble(dfa, depth, caps, derive_seed(seed, "data"), grammar_id(g))
        ds_train = filter_max_len(ds, cell.train_len)
        steps_per_epoch = max(1, math.ceil(len(ds_train.examples) / train_cfg.batch_size))
        epochs = max(train_cfg.max_epochs, math.ceil(step_floor / steps_per_epoch))
        cfg = replace(train_cfg, n_prime=max(train_cfg.n_prime, cell.n),
                      max_epochs=epochs, seed=derive_seed(seed, "train"))
        outcome = train(ds_train, cfg)
        induced = extract_grammar(outcome.params, cfg.tau, terminals=g.terminals)
        report = evaluate(g, induced, depth)
        result.isomorphic = report.isomorphic
        result.recall = report.recall
        result.precision = report.precision
        result.accuracy = report.accuracy
        result.epochs = len(outcome.history)
    except Exception as exc:  # noqa: BLE001 - a failed run must not sink the sweep
        result.error = f"{type(exc).__name__}: {exc}"
    result.seconds = time.perf_counter() - started
    return result


@dataclass
class ExperimentSummary:
    results: list[RunResult] = field(default_factory=list)

    def ok_results(self) -> list[RunResult]:
        return [r for r in self.results if r.error is None]

    @property
    def exact_fraction(self) -> float:
        ok = self.ok_results()
        return sum(r.isomorphic for r in ok) / len(ok) if ok else 0.0

    @property
    def mean_accuracy(self) -> float:
        ok = self.ok_results()
        return float(sum(float(r.accuracy) for r in ok) / len(ok)) if ok else 0.0

    def per_cell(self) -> dict[GridCell, dict]:
        cells: dict[GridCell, dict] = {}
        for r in self.ok_results():
            row = cells.setdefault(r.cell, {"runs": 0, "exact": 0, "recall": 0.0,
                                            "precision": 0.0, "accuracy": 0.0})
            row["runs"] += 1
            row["exact"] += int(r.isomorphic)
            row["recall"] += float(r.recall)
            row["precision"] += float(r.precision)
            row["accuracy"] += float(r.accuracy)
        for row in cells.values():
            for key in ("recall", "precision", "accuracy"):
                row[key] /= row["runs"]
        return cells


def _run_star(args) -> RunResult:
    return run_single(*args)


def run_experiment(grid: ExperimentGrid, train_cfg: TrainConfig, runs_per_cell: int,
                   seed: int, jobs: int = 1, step_floor: int = 15_000,
                   min_lang_words: int = 100) -> ExperimentSummary:
    """All (cell, run) combinations, optionally across processes; the merge
    order is fixed, so equal seeds give identical summaries."""
    plan = [(cell, run, grid.depth, grid.caps, train_cfg, seed, step_floor, min_lang_words)
            for cell in grid.cells for run in range(runs_per_cell)]
    if jobs <= 1:
        results = [run_single(*args) for args in plan]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_star, plan))
    return ExperimentSummary(results)


CSV_COLUMNS = ("t", "n", "p_bar", "train_len", "run", "isomorphic",
               "recall", "precision", "accuracy", "epochs", "seconds")


def result_row(r: RunResult) -> dict:
    if r.error is not None:
        metrics = {"isomorphic": "error", "recall": "", "precision": "", "accuracy": ""}
    else:
        metrics = {
            "isomorphic": str(r.isomorphic),
            "recall": f"{float(r.recall):.6f}",
            "precision": f"{float(r.precision):.6f}",
            "accuracy": f"{float(r.accuracy):.6f}",
        }
    return {
        "t": r.cell.t, "n": r.cell.n, "p_bar": f"{r.cell.p_bar:g}",
        "train_len": r.cell.train_len, "run": r.run, **metrics,
        "epochs": r.epochs, "seconds": f"{r.seconds:.2f}",
    }


def write_summary_csv(results: list[RunResult], path: str | Path) -> None:
    ordered = sorted(results, key=lambda r: (r.cell.label(), r.run))
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in ordered:
            writer.writerow(result_row(r))
