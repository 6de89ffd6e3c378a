"""Evaluation metrics over episode results, plus grid geodesics."""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import UnreachableError
from .grid import uniform_cost_search

CONVENTIONS = ("openeqa", "fineeqa")


@dataclass(frozen=True)
class EpisodeResult:
    question_id: str
    correct: bool
    steps_taken: int
    scene_free_area: float  # m^2
    llm_raw_score: int = None  # 1..5, open-ended only
    gt_geodesic: float = None
    traveled: float = None
    kind: str = "multiple_choice"
    failure: str = None

    def __post_init__(self):
        if self.steps_taken < 0:
            raise ValueError("steps_taken must be >= 0")
        if self.llm_raw_score is not None and self.llm_raw_score not in (1, 2, 3, 4, 5):
            raise ValueError(f"llm_raw_score must be in 1..5, got {self.llm_raw_score}")
        for name in ("gt_geodesic", "traveled"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def is_multiple_choice(self):
        return self.kind == "multiple_choice"

    @classmethod
    def from_log(cls, log):
        d = log.data if hasattr(log, "data") else log
        return cls(
            question_id=d["question_id"],
            correct=bool(d["correct"]),
            steps_taken=d["steps_taken"],
            scene_free_area=d["scene_free_area_m2"],
            llm_raw_score=d.get("sigma"),
            gt_geodesic=d.get("gt_geodesic_m"),
            traveled=d.get("distance_traveled_m"),
            kind=d.get("kind", "multiple_choice"),
            failure=d.get("failure"),
        )

    def to_dict(self):
        return asdict(self)


def _nonempty(results):
    results = list(results)
    if not results:
        raise ValueError("no results")
    return results


def _sigmas(results):
    results = _nonempty(results)
    if any(r.llm_raw_score is None for r in results):
        raise ValueError("every result needs an llm_raw_score")
    return results


def success_rate(results):
    results = _nonempty(results)
    return 100.0 * sum(1 for r in results if r.correct) / len(results)


def normalized_steps(results, gamma_s=4.0):
    """Mean of ``q_i / sqrt(S_i * gamma_s)``."""
    results = _nonempty(results)
    if gamma_s <= 0:
        raise ValueError("gamma_s must be > 0")
    if any(r.scene_free_area <= 0 for r in results):
        raise ValueError("scene_free_area must be > 0")
    return math.fsum(r.steps_taken / math.sqrt(r.scene_free_area * gamma_s)
                     for r in results) / len(results)


def llm_score(results):
    results = _sigmas(results)
    return math.fsum(r.llm_raw_score / 5 * 100 for r in results) / len(results)


def llm_match(results):
    results = _sigmas(results)
    return math.fsum((r.llm_raw_score - 1) / 4 * 100 for r in results) / len(results)


def _delta(sigma, convention):
    if convention == "openeqa":
        return (sigma - 1) / 4
    if convention == "fineeqa":
        return sigma / 5
    raise ValueError(f"unknown convention {convention!r}")


def path_efficiency(results, convention="openeqa"):
    """Grader-weighted path efficiency, ``mean(delta_i * l_i / max(p_i, l_i)) * 100``."""
    results = _sigmas(results)
    total = []
    for r in results:
        if r.gt_geodesic is None or r.traveled is None:
            raise ValueError("path efficiency needs gt_geodesic and traveled")
        denom = max(r.traveled, r.gt_geodesic)
        ratio = 1.0 if denom == 0 else r.gt_geodesic / denom
        total.append(_delta(r.llm_raw_score, convention) * ratio * 100)
    return math.fsum(total) / len(total)


def grade_open_answer(answer, ground_truth, target_labels=()):
    """Deterministic 1..5 grade for an open-ended answer."""
    a = " ".join(str(answer).lower().split())
    gt = " ".join(str(ground_truth).lower().split())
    if a == gt:
        return 5
    if gt and gt in a:
        return 4
    if any(lab.lower() in a for lab in target_labels):
        return 2
    return 1


def geodesic_field(scene, a):
    """Distances in meters from the cell containing position ``a`` to every cell."""
    start = scene.cell_of(*a)
    if not scene.is_free_cell(start):
        raise UnreachableError(f"start {a} is not in free space")
    dist, _ = uniform_cost_search(scene.free, start)
    return dist * scene.cell_size


def geodesic_distance(scene, a, b):
    """Shortest 8-connected free-space path length between two positions, in meters."""
    start, goal = scene.cell_of(*a), scene.cell_of(*b)
    for p, cell in ((a, start), (b, goal)):
        if not scene.is_free_cell(cell):
            raise UnreachableError(f"position {p} is not in free space")
    if start == goal:
        return 0.0
    dist, _ = uniform_cost_search(scene.free, start, goal)
    d = dist[goal]
    if not np.isfinite(d):
        raise UnreachableError(f"no free path from {a} to {b}")
    return float(d) * scene.cell_size


@dataclass
class MetricsReport:
    sr_percent: float
    normalized_steps: float
    llm_score_percent: float
    llm_match_percent: float
    e_path_percent: dict
    n_total: int
    n_failures: int
    gamma_s: float
    rows: list

    @classmethod
    def from_results(cls, results, gamma_s=4.0):
        results = _nonempty(results)
        opens = [r for r in results if r.llm_raw_score is not None]
        e_path = {}
        if opens and all(r.gt_geodesic is not None and r.traveled is not None for r in opens):
            e_path = {c: path_efficiency(opens, c) for c in CONVENTIONS}
        return cls(
            sr_percent=success_rate(results),
            normalized_steps=normalized_steps(results, gamma_s),
            llm_score_percent=llm_score(opens) if opens else None,
            llm_match_percent=llm_match(opens) if opens else None,
            e_path_percent=e_path,
            n_total=len(results),
            n_failures=sum(1 for r in results if r.failure),
            gamma_s=gamma_s,
            rows=[r.to_dict() for r in results],
        )

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def table(self):
        def fmt(v):
            return "-" if v is None else f"{v:.2f}"

        lines = [
            f"{'metric':<22}{'value':>10}",
            f"{'N_total':<22}{self.n_total:>10d}",
            f"{'failures':<22}{self.n_failures:>10d}",
            f"{'SR (%)':<22}{fmt(self.sr_percent):>10}",
            f"{'Steps (norm.)':<22}{fmt(self.normalized_steps):>10}",
            f"{'LLM Score (%)':<22}{fmt(self.llm_score_percent):>10}",
            f"{'LLM-Match (%)':<22}{fmt(self.llm_match_percent):>10}",
        ]
        for c in CONVENTIONS:
            lines.append(f"{'E_path ' + c + ' (%)':<22}{fmt(self.e_path_percent.get(c)):>10}")
        lines.append(f"gamma_s = {self.gamma_s:g} steps per m^2 (configuration, not measured)")
        lines.append("")
        lines.append(f"{'question':<16}{'ok':>4}{'steps':>7}{'area':>8}{'sigma':>7}"
                     f"{'l_i':>8}{'p_i':>8}  failure")
        for r in self.rows:
            sigma = "-" if r["llm_raw_score"] is None else str(r["llm_raw_score"])
            gt = "-" if r["gt_geodesic"] is None else f"{r['gt_geodesic']:.2f}"
            tr = "-" if r["traveled"] is None else f"{r['traveled']:.2f}"
            lines.append(f"{r['question_id']:<16}{('y' if r['correct'] else 'n'):>4}"
                         f"{r['steps_taken']:>7d}{r['scene_free_area']:>8.1f}{sigma:>7}"
                         f"{gt:>8}{tr:>8}  {r['failure'] or ''}")
        return "\n".join(lines) + "\n"
