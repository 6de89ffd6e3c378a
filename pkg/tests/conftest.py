import time
from dataclasses import dataclass

import pytest

from eqasim.config import RunConfig
from eqasim.generator import generate_corpus
from eqasim.harness import run_benchmark

# the pinned multi-room corpus used by the corpus-level checks
CORPUS_SEED = 7
CORPUS_SIZE = 100
CORPUS_PARAMS = {"rows": (16, 24), "cols": (16, 28), "rooms": (4, 7), "questions": 1}


@dataclass
class TimedRun:
    result: object  # BenchmarkResult
    seconds: float


def _timed(config, scenes):
    t0 = time.perf_counter()
    result = run_benchmark(config, scenes)
    return TimedRun(result, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def corpus():
    return generate_corpus(CORPUS_SEED, CORPUS_SIZE, **CORPUS_PARAMS)


@pytest.fixture(scope="session")
def doorway_run(corpus):
    return _timed(RunConfig(), corpus)


@pytest.fixture(scope="session")
def fbe_run(corpus):
    return _timed(RunConfig(fbe_only=True), corpus)
