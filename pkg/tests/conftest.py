import pytest

from annocheck.corpus import (
    CorpusParams,
    corpus_preds,
    corpus_programs,
    corpus_rules,
    corpus_schema,
    corpus_triples,
)


class Corpus:
    """One bundled corpus instance at a fixed parameterization."""

    def __init__(self, n_ids, n_prios):
        self.params = CorpusParams(n_ids, n_prios)
        self.schema = corpus_schema(self.params)
        self.defs = corpus_preds(self.params)
        self.progs = corpus_programs(self.params)
        self.rules = corpus_rules(self.params)
        self.triples = corpus_triples(self.params)


@pytest.fixture(scope="session")
def corpus21():
    return Corpus(2, 1)


@pytest.fixture(scope="session")
def corpus22():
    return Corpus(2, 2)


@pytest.fixture(scope="session")
def corpus32():
    return Corpus(3, 2)
