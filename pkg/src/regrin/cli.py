"""Command-line pipeline: gen-grammar, gen-data, train, extract, parse,
eval, sweep.  Exit codes: 0 ok, 2 usage or unreadable input, 3 data
infeasibility (e.g. empty language at the requested depth)."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import automata, datasets, evaluation, extraction, grammars, model
from .seeding import derive_seed

USAGE_EXIT = 2
DATA_EXIT = 3


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _load_or_usage(loader, path: str, what: str):
    try:
        return loader(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {what} from {path}: {exc}", USAGE_EXIT) from exc


def _write_json(path: str | Path, data: dict) -> None:
    Path(path).write_text(grammars.dumps_canonical(data))


def cmd_gen_grammar(args: argparse.Namespace) -> int:
    cfg = grammars.GenConfig(t=args.t, n=args.n, p_bar=args.p_bar,
                             p_terminal=args.p_terminal, seed=args.seed)
    g = grammars.random_grammar(cfg)
    grammars.save_grammar(g, args.output)
    dfa_path = args.dump_dfa or str(Path(args.output).with_suffix("")) + ".dfa.json"
    automata.save_dfa(automata.grammar_to_min_dfa(g), dfa_path, g.terminals)
    print(f"wrote {args.output} (id {grammars.grammar_id(g)}) and {dfa_path}")
    return 0


def cmd_gen_data(args: argparse.Namespace) -> int:
    g = _load_or_usage(grammars.load_grammar, args.grammar, "grammar")
    dfa = automata.grammar_to_min_dfa(g)
    caps = datasets.DatasetCaps(
        positive=args.max_per_category,
        non_accepting_path=args.max_per_category,
        invalid_postfix=args.max_per_category,
        invalid_infix=args.max_per_category,
        frontier=args.frontier_cap,
    )
    try:
        ds = datasets.assemble(dfa, args.depth, caps, args.seed, grammars.grammar_id(g))
    except datasets.EmptyLanguageError as exc:
        raise CliError(str(exc), DATA_EXIT) from exc
    datasets.save_dataset(ds, args.output, g.terminals)
    n_pos = len(ds.positives())
    print(f"wrote {args.output}: {len(ds.examples)} examples "
          f"({n_pos} positive, {len(ds.examples) - n_pos} negative)")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    ds, terminals = _load_or_usage(datasets.load_dataset, args.input, "dataset")
    if args.max_len is not None:
        ds = datasets.filter_max_len(ds, args.max_len)
    if not ds.examples:
        raise CliError("no examples left to train on", DATA_EXIT)
    cfg = model.TrainConfig(
        n_prime=args.n_prime, lr=args.lr, batch_size=args.batch_size,
        max_epochs=args.epochs, beta=args.beta, beta_start_frac=args.beta_start_frac,
        gamma=args.gamma, tau=args.tau, seed=args.seed,
        early_stop_epochs=args.early_stop if args.early_stop > 0 else None,
    )
    if cfg.max_epochs == 0:
        params = model.init_params(cfg.n_prime, ds.alphabet_size, cfg.seed)
        outcome = model.TrainResult(params, [], model.AdamState.zeros(params))
    else:
        outcome = model.train(ds, cfg)
    model.save_checkpoint(args.output, outcome.params, cfg, terminals,
                          outcome.adam_state, len(outcome.history))
    history_path = args.history or str(Path(args.output).with_suffix("")) + ".history.csv"
    lines = ["epoch,loss,accuracy,fingerprint"]
    lines += [f"{h.epoch},{h.loss:.6f},{h.accuracy:.6f},{h.fingerprint}"
              for h in outcome.history]
    Path(history_path).write_text("\n".join(lines) + "\n")
    final_acc = outcome.history[-1].accuracy if outcome.history else float("nan")
    print(f"wrote {args.output} after {len(outcome.history)} epochs "
          f"(train accuracy {final_acc:.3f})")
    return 0


def _grammar_text(g: grammars.Grammar) -> str:
    lines = [f"terminals:    {' '.join(g.terminals)}",
             f"nonterminals: {' '.join(g.nonterminals)}",
             f"start:        {g.nonterminals[g.start]}",
             "productions:"]
    for p in sorted(g.productions, key=lambda p: (p.lhs, p.prev is not None,
                                                  -1 if p.prev is None else p.prev, p.terminal)):
        rhs = g.terminals[p.terminal] if p.prev is None \
            else f"{g.nonterminals[p.prev]} {g.terminals[p.terminal]}"
        lines.append(f"  {g.nonterminals[p.lhs]} -> {rhs}")
    return "\n".join(lines)


def cmd_extract(args: argparse.Namespace) -> int:
    params, meta = _load_or_usage(model.load_checkpoint, args.checkpoint, "checkpoint")
    nonterminals = tuple(meta["nonterminals"]) if meta.get("nonterminals") else None
    g = extraction.extract_grammar(params, args.tau, terminals=tuple(meta["terminals"]),
                                   nonterminals=nonterminals)
    if args.output:
        grammars.save_grammar(g, args.output)
    if args.format == "json":
        print(json.dumps(grammars.grammar_to_json(g), sort_keys=True))
    else:
        print(_grammar_text(g))
    return 0


def cmd_parse(args: argparse.Namespace) -> int:
    params, meta = _load_or_usage(model.load_checkpoint, args.checkpoint, "checkpoint")
    terminals = tuple(meta["terminals"])
    nonterminals = tuple(meta["nonterminals"]) if meta.get("nonterminals") \
        else grammars.default_nonterminal_names(params.n_prime)
    try:
        word = grammars.str_to_word(args.word, terminals)
    except ValueError as exc:
        raise CliError(str(exc), USAGE_EXIT) from exc
    if not word:
        raise CliError("cannot parse the empty word", USAGE_EXIT)
    forest = extraction.parse_forest(params, word, args.tau)
    roots = forest[-1]
    if args.format == "json":
        print(json.dumps({
            "word": args.word,
            "roots_per_position": [len(level) for level in forest],
            "trees": [extraction.tree_to_json(n, terminals, nonterminals) for n in roots],
        }, sort_keys=True))
    else:
        if not roots:
            print(f"no complete parse for {args.word!r}")
        for node in roots:
            print(extraction.render_tree(node, terminals, nonterminals))
    return 0


def report_to_json(report: evaluation.EvalReport) -> dict:
    return {
        "schema": grammars.SCHEMA_VERSION,
        "kind": "eval_report",
        "isomorphic": report.isomorphic,
        "recall": str(report.recall),
        "precision": str(report.precision),
        "accuracy": str(report.accuracy),
        "recall_float": float(report.recall),
        "precision_float": float(report.precision),
        "accuracy_float": float(report.accuracy),
        "d": report.d,
        "counts": {"true": report.words_true, "induced": report.words_induced,
                   "common": report.words_common},
        "states": {"true": report.states_true, "induced": report.states_induced},
    }


def cmd_eval(args: argparse.Namespace) -> int:
    g_true = _load_or_usage(grammars.load_grammar, args.truth, "grammar")
    g_induced = _load_or_usage(grammars.load_grammar, args.induced, "grammar")
    try:
        report = evaluation.evaluate(g_true, g_induced, args.depth)
    except ValueError as exc:
        raise CliError(str(exc), USAGE_EXIT) from exc
    data = report_to_json(report)
    if args.output:
        _write_json(args.output, data)
    if args.format == "json":
        print(json.dumps(data, sort_keys=True))
    else:
        print(f"isomorphic: {report.isomorphic}")
        print(f"recall:     {report.recall} ({float(report.recall):.4f})")
        print(f"precision:  {report.precision} ({float(report.precision):.4f})")
        print(f"accuracy:   {report.accuracy} ({float(report.accuracy):.4f})")
    return 0


def _load_grid(path: str) -> evaluation.ExperimentGrid:
    data = json.loads(Path(path).read_text())
    cells = tuple(evaluation.GridCell(c["t"], c["n"], float(c["p_bar"]), c["train_len"])
                  for c in data["cells"])
    caps = datasets.DatasetCaps(**data["caps"]) if "caps" in data else datasets.DatasetCaps()
    return evaluation.ExperimentGrid(cells, data["depth"], caps)


def _run_report_path(outdir: Path, cell: evaluation.GridCell, run: int) -> Path:
    return outdir / "runs" / f"{cell.label()}_r{run}.json"


def _result_to_json(r: evaluation.RunResult) -> dict:
    return {
        "schema": grammars.SCHEMA_VERSION,
        "kind": "sweep_run",
        "cell": {"t": r.cell.t, "n": r.cell.n, "p_bar": r.cell.p_bar,
                 "train_len": r.cell.train_len},
        "run": r.run,
        "seed": r.seed,
        "isomorphic": r.isomorphic,
        "recall": str(r.recall),
        "precision": str(r.precision),
        "accuracy": str(r.accuracy),
        "epochs": r.epochs,
        "seconds": r.seconds,
        "error": r.error,
    }


def _result_from_json(data: dict) -> evaluation.RunResult:
    from fractions import Fraction
    cell = evaluation.GridCell(**data["cell"])
    return evaluation.RunResult(
        cell=cell, run=data["run"], seed=data["seed"], isomorphic=data["isomorphic"],
        recall=Fraction(data["recall"]), precision=Fraction(data["precision"]),
        accuracy=Fraction(data["accuracy"]), epochs=data["epochs"],
        seconds=data["seconds"], error=data["error"],
    )


def cmd_sweep(args: argparse.Namespace) -> int:
    grid = _load_or_usage(_load_grid, args.grid, "grid")
    outdir = Path(args.output)
    (outdir / "runs").mkdir(parents=True, exist_ok=True)
    train_cfg = model.TrainConfig(
        n_prime=args.n_prime, max_epochs=args.epochs, gamma=args.gamma,
        early_stop_epochs=args.early_stop if args.early_stop > 0 else None,
    )
    plan = [(cell, run) for cell in grid.cells for run in range(args.runs)]
    pending = [(cell, run, grid.depth, grid.caps, train_cfg, args.seed)
               for cell, run in plan if not _run_report_path(outdir, cell, run).exists()]
    if args.jobs > 1 and pending:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            fresh = list(pool.map(evaluation._run_star, pending))
    else:
        fresh = [evaluation.run_single(*p) for p in pending]
    for r in fresh:
        _write_json(_run_report_path(outdir, r.cell, r.run), _result_to_json(r))

    results = []
    failures = 0
    for cell, run in plan:
        data = json.loads(_run_report_path(outdir, cell, run).read_text())
        r = _result_from_json(data)
        results.append(r)
        failures += r.error is not None
    evaluation.write_summary_csv(results, outdir / "summary.csv")
    summary = evaluation.ExperimentSummary(results)
    print(f"{len(results)} runs ({len(fresh)} new), exact rate "
          f"{summary.exact_fraction:.3f}, mean accuracy {summary.mean_accuracy:.3f}")
    if failures:
        print(f"warning: {failures} run(s) failed; marked 'error' in summary.csv",
              file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regrin",
                                     description="regular grammar induction pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-grammar", help="sample a ground-truth grammar")
    p.add_argument("-t", type=int, required=True, help="terminal count")
    p.add_argument("-n", type=int, required=True, help="nonterminal count")
    p.add_argument("-p", "--p-bar", type=float, required=True,
                   help="mean productions per nonterminal")
    p.add_argument("--p-terminal", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="grammar JSON path")
    p.add_argument("--dump-dfa", default=None, help="minimal-DFA JSON path "
                   "(default: <output>.dfa.json)")
    p.set_defaults(func=cmd_gen_grammar)

    p = sub.add_parser("gen-data", help="build a labeled dataset from a grammar")
    p.add_argument("-g", "--grammar", required=True)
    p.add_argument("-d", "--depth", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-per-category", type=int, default=2000)
    p.add_argument("--frontier-cap", type=int, default=100_000)
    p.add_argument("-o", "--output", required=True, help="dataset JSONL path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the acceptor on a dataset")
    p.add_argument("-i", "--input", required=True, help="dataset JSONL path")
    p.add_argument("-o", "--output", required=True, help="checkpoint JSON path")
    p.add_argument("--history", default=None, help="per-epoch CSV path "
                   "(default: <output>.history.csv)")
    p.add_argument("--max-len", type=int, default=None,
                   help="train only on words up to this length")
    p.add_argument("--n-prime", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--batch-size", type=int, default=80)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--beta-start-frac", type=float, default=0.6)
    p.add_argument("--gamma", type=float, default=0.02)
    p.add_argument("--tau", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--early-stop", type=int, default=10,
                   help="stop after this many stable perfect epochs; 0 disables")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="read the induced grammar out of a checkpoint")
    p.add_argument("-c", "--checkpoint", required=True)
    p.add_argument("--tau", type=float, default=0.95)
    p.add_argument("-o", "--output", default=None, help="grammar JSON path")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("parse", help="print parse trees for a word")
    p.add_argument("-c", "--checkpoint", required=True)
    p.add_argument("word")
    p.add_argument("--tau", type=float, default=0.95)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="compare an induced grammar against the truth")
    p.add_argument("-g", "--truth", required=True)
    p.add_argument("-i", "--induced", required=True)
    p.add_argument("-d", "--depth", type=int, required=True)
    p.add_argument("-o", "--output", default=None, help="report JSON path")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run a grid of induction experiments")
    p.add_argument("--grid", required=True, help="grid JSON path")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--runs", type=int, default=3, help="runs per cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--n-prime", type=int, default=5)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--gamma", type=float, default=0.02)
    p.add_argument("--early-stop", type=int, default=10)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
