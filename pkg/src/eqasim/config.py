"""Run configuration shared by the explorer and the benchmark harness."""

import math
from dataclasses import asdict, dataclass, field, fields, replace

from .relevance import ScorerBinding


@dataclass(frozen=True)
class RunConfig:
    # memory / scoring
    k: int = 3
    lam: float = 0.7
    # frontier detection
    eps: float = 1.5
    min_pts: int = 1
    delta: int = 1
    w_size: float = 1.0
    w_dist: float = 0.5
    arrival_radius: float = 0.5
    # stopping
    stop_threshold: float = 0.75
    evidence_threshold: float = 0.5
    exhaustive_fraction: float = 0.9
    # kinematics and sensing
    spin_steps: int = 8
    translation_cap: float = 3.0
    fov: float = math.pi / 2
    max_range: float = 10.0
    rays: int = 64
    truncation: float = 0.3
    max_weight: float = 64.0
    resolution: float = 0.0  # 0 -> scene cell size
    # budgets and metric normalisation (steps per square meter of free area)
    gamma_n: float = 4.0
    gamma_s: float = 4.0
    # ablations
    fbe_only: bool = False
    cot: bool = True
    doorway_literal: bool = False
    raw_cosine: bool = False
    # scorer
    scorer: ScorerBinding = field(default_factory=ScorerBinding)
    # benchmark
    trials: int = 1
    trial_seeds: tuple = ()
    workers: int = 1

    def __post_init__(self):
        checks = [
            (self.k >= 1, "k >= 1"),
            (0.0 <= self.lam <= 1.0, "0 <= lam <= 1"),
            (self.eps > 0, "eps > 0"),
            (self.min_pts >= 1, "min_pts >= 1"),
            (self.delta >= 1, "delta >= 1"),
            (self.w_size > 0 and self.w_dist > 0, "priority weights > 0"),
            (self.arrival_radius > 0, "arrival_radius > 0"),
            (0.0 <= self.stop_threshold <= 1.0, "0 <= stop_threshold <= 1"),
            (0.0 <= self.evidence_threshold <= 1.0, "0 <= evidence_threshold <= 1"),
            (0.0 <= self.exhaustive_fraction <= 1.0, "0 <= exhaustive_fraction <= 1"),
            (self.spin_steps >= 1, "spin_steps >= 1"),
            (self.translation_cap > 0, "translation_cap > 0"),
            (0 < self.fov <= 2 * math.pi, "0 < fov <= 2 pi"),
            (self.max_range > 0, "max_range > 0"),
            (self.rays >= 2, "rays >= 2"),
            (self.truncation > 0, "truncation > 0"),
            (self.max_weight >= 1, "max_weight >= 1"),
            (self.resolution >= 0, "resolution >= 0"),
            (self.gamma_n > 0 and self.gamma_s > 0, "gamma_n, gamma_s > 0"),
            (self.trials >= 1, "trials >= 1"),
            (self.workers >= 1, "workers >= 1"),
        ]
        for ok, what in checks:
            if not ok:
                raise ValueError(f"invalid config: {what}")
        if self.trial_seeds and len(self.trial_seeds) != self.trials:
            raise ValueError("invalid config: one trial seed per trial")
        if self.raw_cosine != self.scorer.raw_cosine:
            object.__setattr__(self, "scorer", replace(self.scorer, raw_cosine=self.raw_cosine))

    @property
    def weights(self):
        return (self.w_size, self.w_dist)

    def seeds(self):
        return tuple(self.trial_seeds) if self.trial_seeds else tuple(range(self.trials))

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        d = asdict(self)
        d["trial_seeds"] = list(self.trial_seeds)
        scorer = d["scorer"]
        scorer.pop("prompts", None)
        return d

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]
