"""regrin: regular grammar induction from labeled example words with an
explainable neural acceptor."""

from .grammars import GenConfig, Grammar, Production, derive_words, random_grammar, validate
from .automata import Dfa, Nfa, determinize, grammar_to_min_dfa, grammar_to_nfa, minimize
from .datasets import Dataset, DatasetCaps, Example, assemble, filter_max_len
from .model import ModelParams, TrainConfig, forward, train
from .extraction import extract_grammar, parse_forest, plant_grammar
from .evaluation import EvalReport, evaluate, run_experiment

__all__ = [
    "GenConfig", "Grammar", "Production", "derive_words", "random_grammar", "validate",
    "Dfa", "Nfa", "determinize", "grammar_to_min_dfa", "grammar_to_nfa", "minimize",
    "Dataset", "DatasetCaps", "Example", "assemble", "filter_max_len",
    "ModelParams", "TrainConfig", "forward", "train",
    "extract_grammar", "parse_forest", "plant_grammar",
    "EvalReport", "evaluate", "run_experiment",
]

__version__ = "0.1.0"
