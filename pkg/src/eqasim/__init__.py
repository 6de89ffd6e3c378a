"""Grid-world engine for embodied question answering with doorway-frontier exploration."""

__version__ = "0.1.0"

from .config import RunConfig
from .errors import (DataError, EndpointError, EqaError, SceneInvariantError,
                     SceneParseError, ScorerError)
from .explorer import EpisodeLog, Explorer, run_explorer
from .harness import load_corpus, run_benchmark, run_episode, sweep
from .metrics import EpisodeResult, MetricsReport
from .relevance import ScorerBinding
from .scene import Scene, load_scene

__all__ = [
    "DataError", "EndpointError", "EpisodeLog", "EpisodeResult", "EqaError", "Explorer",
    "MetricsReport", "RunConfig", "Scene", "SceneInvariantError", "SceneParseError",
    "ScorerBinding", "ScorerError", "load_corpus", "load_scene", "run_benchmark",
    "run_episode", "run_explorer", "sweep",
]
