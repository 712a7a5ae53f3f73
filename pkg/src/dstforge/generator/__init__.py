from dstforge.generator.base import NEG_INF, Generator, Session
from dstforge.generator.external import ExternalGenerator
from dstforge.generator.ngram import NGramModel, train_ngram
from dstforge.generator.oracle import OracleGenerator, ReplayGenerator, oracle_generator
from dstforge.generator.vocab import CHARACTER, WHITESPACE, Tokenizer, Vocab, scaffold_atoms

__all__ = [
    "CHARACTER",
    "ExternalGenerator",
    "Generator",
    "NEG_INF",
    "NGramModel",
    "OracleGenerator",
    "ReplayGenerator",
    "Session",
    "Tokenizer",
    "Vocab",
    "WHITESPACE",
    "oracle_generator",
    "scaffold_atoms",
    "train_ngram",
]
