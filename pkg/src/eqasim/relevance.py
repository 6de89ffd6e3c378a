"""Observation relevance: embedding cosine, yes-probability and their blend."""

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from . import prompts
from .errors import (DimensionMismatchError, ScoreRangeError, ScorerError,
                     ZeroVectorError)

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.7
DEFAULT_DAMPING = 0.5


@dataclass(frozen=True)
class RelevanceBreakdown:
    clip_score: float
    vlm_score: float
    lam: float
    combined: float

    def to_dict(self):
        return {"clip": self.clip_score, "vlm": self.vlm_score, "lambda": self.lam,
                "combined": self.combined}

    @classmethod
    def from_dict(cls, d):
        return cls(d["clip"], d["vlm"], d["lambda"], d["combined"])


@dataclass(frozen=True)
class ScorerBinding:
    """How scores, region labels and answers are produced.

    ``oracle`` mode reads the simulator's semantic ground truth and never touches
    the network; ``live`` mode talks to an OpenAI-compatible endpoint.
    """

    mode: str = "oracle"
    embedding_dim: int = 64
    clip_mode: str = "oracle"  # "oracle" visible fraction | "embedding" hashed cosine
    raw_cosine: bool = False
    damping: float = DEFAULT_DAMPING
    base_url: str = ""
    model: str = ""
    token_env: str = "EQASIM_API_KEY"
    timeout: float = 30.0
    retries: int = 2
    backoff_s: float = 0.5
    max_concurrency: int = 4
    prompts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("oracle", "live"):
            raise ValueError(f"unknown scorer mode {self.mode!r}")
        if self.mode == "live" and not (self.base_url and self.model):
            raise ValueError("live mode requires base_url and model")
        if self.clip_mode not in ("oracle", "embedding"):
            raise ValueError(f"unknown clip mode {self.clip_mode!r}")

    @property
    def live(self):
        return self.mode == "live"


def cosine_relevance(obs_embedding, target_embedding, raw=False):
    """Cosine similarity rescaled from ``[-1, 1]`` to ``[0, 1]``.

    With ``raw=True`` the cosine is returned unscaled, clipped below at 0 so it
    can still be mixed as a score.
    """
    a = np.asarray(obs_embedding, dtype=float)
    b = np.asarray(target_embedding, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"{a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVectorError("cosine of a zero vector is undefined")
    cos = float(np.clip(a @ b / (na * nb), -1.0, 1.0))
    if raw:
        return max(cos, 0.0)
    return (cos + 1.0) / 2.0


def text_embedding(text, dim):
    """Deterministic pseudo-embedding of ``text`` (hash-seeded, unit norm)."""
    out = bytearray()
    counter = 0
    while len(out) < dim * 4:
        out += hashlib.sha256(f"{text}\x00{counter}".encode()).digest()
        counter += 1
    raw = np.frombuffer(bytes(out[:dim * 4]), dtype=">u4").astype(float)
    vec = raw / 2 ** 31 - 1.0
    return vec / np.linalg.norm(vec)


def observation_embedding(observation, dim):
    """Visibility-weighted mix of label embeddings plus a small background term."""
    vec = 0.1 * text_embedding("<background>", dim)
    for label, _room, frac in observation.visible_objects:
        vec = vec + frac * text_embedding(label, dim)
    return vec


def oracle_target_relevance(observation, target):
    label, room = target
    return observation.object_fraction(label, room)


def dominant_room(observation):
    """Room with the largest visible share; ties go to the smaller name."""
    if not observation.visible_rooms:
        return None
    return min(observation.visible_rooms, key=lambda item: (-item[1], item[0]))[0]


def oracle_generative_relevance(observation, question, damping=DEFAULT_DAMPING):
    score = max(oracle_target_relevance(observation, t) for t in question.annotated_targets)
    if score and dominant_room(observation) not in question.annotated_regions:
        score *= damping
    return score


def generative_relevance(observation, question, binding, client=None):
    """Question-conditioned yes-probability for ``observation``.

    Live failures raise :class:`ScorerError`; callers decide on fallback.
    """
    if not binding.live:
        return oracle_generative_relevance(observation, question, binding.damping)
    from .client import yes_probability

    prompt = prompts.get(binding.prompts, "relevance").format(
        question=question.text, observation=observation.summary())
    reply = client.complete(prompt, logprobs=True, max_tokens=1)
    return min(1.0, max(0.0, yes_probability(reply)))


def combined_relevance(clip_score, vlm_score, lam=DEFAULT_LAMBDA):
    for name, value in (("clip_score", clip_score), ("vlm_score", vlm_score), ("lambda", lam)):
        if not 0.0 <= value <= 1.0:
            raise ScoreRangeError(f"{name}={value} outside [0, 1]")
    if lam == 1.0:
        combined = float(clip_score)
    elif lam == 0.0:
        combined = float(vlm_score)
    else:
        combined = lam * clip_score + (1.0 - lam) * vlm_score
    return RelevanceBreakdown(float(clip_score), float(vlm_score), float(lam), combined)


class RelevanceScorer:
    """Scores observations against every target of an episode.

    In live mode a failed yes-probability request falls back to the oracle
    score and the degradation is appended to ``degradations``.
    """

    def __init__(self, binding, question, targets, lam=DEFAULT_LAMBDA, client=None):
        self.binding = binding
        self.question = question
        self.targets = list(targets)
        self.lam = lam
        self.client = client
        self.degradations = []
        self._target_vecs = {}

    def clip_score(self, observation, target):
        if self.binding.clip_mode == "oracle":
            return oracle_target_relevance(observation, target)
        dim = self.binding.embedding_dim
        if target not in self._target_vecs:
            self._target_vecs[target] = text_embedding(target[0], dim)
        return cosine_relevance(observation_embedding(observation, dim),
                                self._target_vecs[target], raw=self.binding.raw_cosine)

    def vlm_score(self, observation):
        try:
            return generative_relevance(observation, self.question, self.binding, self.client)
        except ScorerError as exc:
            log.warning("relevance fell back to oracle: %s", exc)
            self.degradations.append({"op": "generative_relevance",
                                      "observation": observation.id, "error": str(exc)})
            return oracle_generative_relevance(observation, self.question, self.binding.damping)

    def score(self, observation):
        """``{target: RelevanceBreakdown}`` for one observation."""
        vlm = self.vlm_score(observation)
        return {t: combined_relevance(self.clip_score(observation, t), vlm, self.lam)
                for t in self.targets}

    def score_batch(self, observations):
        """Score several observations; live requests run concurrently.

        Results are returned in the input order regardless of completion order.
        """
        if not self.binding.live or len(observations) < 2:
            return [self.score(o) for o in observations]
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=self.binding.max_concurrency) as pool:
            vlms = list(pool.map(self.vlm_score, observations))
        return [{t: combined_relevance(self.clip_score(o, t), v, self.lam) for t in self.targets}
                for o, v in zip(observations, vlms)]
