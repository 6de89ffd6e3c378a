"""Episode runner, multi-trial benchmark, parameter sweeps and timing summaries."""

import glob
import json
import logging
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .config import RunConfig
from .errors import DataError, EndpointError, EqaError
from .explorer import LOG_VERSION, EpisodeLog, Explorer
from .metrics import EpisodeResult, MetricsReport
from .scene import load_scene

log = logging.getLogger(__name__)

TIMING_PARTS = ("render", "fusion", "detection", "scoring", "region", "planning", "client")


def load_corpus(path):
    """Scenes from a scene file, a corpus directory with ``manifest.json``, or a
    directory of scene documents (sorted by name)."""
    if os.path.isdir(path):
        manifest = os.path.join(path, "manifest.json")
        if os.path.exists(manifest):
            with open(manifest, encoding="utf-8") as fh:
                try:
                    files = json.load(fh)["scenes"]
                except (ValueError, KeyError) as exc:
                    raise DataError(f"{manifest}: bad manifest ({exc})") from exc
            files = [os.path.join(path, f) for f in files]
        else:
            files = sorted(glob.glob(os.path.join(path, "*.json")))
        if not files:
            raise DataError(f"{path}: no scene documents")
    else:
        files = [path]
    scenes = []
    for f in files:
        try:
            with open(f, "rb") as fh:
                scenes.append(load_scene(fh.read()))
        except DataError as exc:
            exc.args = (f"{f}: {exc}",)
            raise
        except OSError as exc:
            raise DataError(f"{f}: {exc.strerror or exc}") from exc
    return scenes


def run_episode(config, scene, question, client=None):
    """Run one episode and return its :class:`EpisodeLog`.

    Endpoint failures propagate; use :func:`failure_log` to record them.
    """
    return Explorer(scene, question, config, client).run()


def failure_log(config, scene, question, exc):
    """Minimal log for an episode that aborted; it scores as a wrong answer."""
    sigma = None if question.is_multiple_choice else 1
    return EpisodeLog({
        "version": LOG_VERSION,
        "question_id": question.id,
        "scene": dict(scene.generator or {}),
        "kind": question.kind,
        "requires_exhaustive": question.requires_exhaustive,
        "config": config.to_dict(),
        "plan": None,
        "steps": [],
        "phase_trace": [],
        "memory": None,
        "stop": {"reason": "failed", "rationale": str(exc)},
        "answer": None,
        "answer_rationale": "",
        "ground_truth": question.ground_truth,
        "correct": False,
        "sigma": sigma,
        "steps_taken": 0,
        "spin_steps": 0,
        "distance_traveled_m": 0.0,
        "scene_free_area_m2": scene.room_size_m2,
        "gt_geodesic_m": question.gt_trajectory_length_m,
        "first_relevant_entry_step": None,
        "explored_fraction": 0.0,
        "frontier_steps": {},
        "degradations": [],
        "failure": f"{type(exc).__name__}: {exc}",
    })


def episodes(scenes):
    return [(scene, q) for scene in scenes for q in scene.questions]


def _mean_stderr(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    if len(values) == 1:
        return values[0], 0.0
    return statistics.fmean(values), statistics.stdev(values) / math.sqrt(len(values))


def timing_summary(logs):
    """Mean and standard deviation of per-step wall time, in milliseconds."""
    totals = []
    parts = {p: [] for p in TIMING_PARTS}
    for lg in logs:
        for step in lg["steps"]:
            t = step.get("timing_us")
            if not t:
                continue
            totals.append(t["total"] / 1000.0)
            for p in TIMING_PARTS:
                parts[p].append(t.get(p, 0) / 1000.0)
    if not totals:
        return {"n_steps": 0, "mean_ms": None, "std_ms": None, "parts_mean_ms": {}}
    return {
        "n_steps": len(totals),
        "mean_ms": statistics.fmean(totals),
        "std_ms": statistics.pstdev(totals),
        "parts_mean_ms": {p: statistics.fmean(v) for p, v in parts.items()},
    }


def format_timing(timing, label="oracle stack"):
    if not timing["n_steps"]:
        return f"{'Method':<24}{'Avg. step time (s)':>22}\n{label:<24}{'-':>22}\n"
    cell = f"{timing['mean_ms'] / 1000:.4f} ± {timing['std_ms'] / 1000:.4f}"
    lines = [f"{'Method':<24}{'Avg. step time (s)':>22}", f"{label:<24}{cell:>22}"]
    lines.append("per-step breakdown (ms): " + ", ".join(
        f"{p} {v:.3f}" for p, v in timing["parts_mean_ms"].items()))
    lines.append("client latency is nested inside scoring and region time")
    return "\n".join(lines) + "\n"


@dataclass
class TrialResult:
    seed: int
    logs: list
    report: MetricsReport


@dataclass
class BenchmarkResult:
    config: RunConfig
    trials: list
    summary: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def logs(self):
        return [lg for t in self.trials for lg in t.logs]

    @property
    def endpoint_failures(self):
        return sum(1 for lg in self.logs
                   if (lg["failure"] or "").startswith(EndpointError.__name__))

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "summary": self.summary,
            "timing": self.timing,
            "trials": [{"seed": t.seed, "report": t.report.to_dict()} for t in self.trials],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def table(self):
        def fmt(key):
            m, se = self.summary[key]
            return "-" if m is None else f"{m:.2f} ± {se:.2f}"

        rows = [("SR (%)", "sr_percent"), ("Steps (norm.)", "normalized_steps"),
                ("LLM Score (%)", "llm_score_percent"), ("LLM-Match (%)", "llm_match_percent"),
                ("E_path openeqa (%)", "e_path_openeqa"), ("E_path fineeqa (%)", "e_path_fineeqa")]
        lines = [f"trials: {len(self.trials)}  questions per trial: "
                 f"{self.trials[0].report.n_total}  failures: "
                 f"{sum(t.report.n_failures for t in self.trials)}"]
        lines += [f"{name:<22}{fmt(key):>18}" for name, key in rows]
        lines.append(f"gamma_s = {self.config.gamma_s:g} steps per m^2 (configuration)")
        lines.append("")
        lines.append(format_timing(self.timing).rstrip("\n"))
        return "\n".join(lines) + "\n"


def _summarize(trials):
    def col(fn):
        return _mean_stderr([fn(t.report) for t in trials])

    return {
        "sr_percent": col(lambda r: r.sr_percent),
        "normalized_steps": col(lambda r: r.normalized_steps),
        "llm_score_percent": col(lambda r: r.llm_score_percent),
        "llm_match_percent": col(lambda r: r.llm_match_percent),
        "e_path_openeqa": col(lambda r: r.e_path_percent.get("openeqa")),
        "e_path_fineeqa": col(lambda r: r.e_path_percent.get("fineeqa")),
        "n_total": trials[0].report.n_total,
    }


def _run_one(config, scene, question, seed, client_factory):
    client = client_factory(seed) if client_factory is not None else None
    try:
        return run_episode(config, scene, question, client)
    except EqaError as exc:
        log.error("episode %s failed: %s", question.id, exc)
        return failure_log(config, scene, question, exc)


def run_benchmark(config, scenes, client_factory=None):
    """Run every question of ``scenes`` once per trial seed.

    ``client_factory(seed)`` builds the live client for one episode; in oracle
    mode it is unused and every trial is identical. Failed episodes are kept as
    wrong answers carrying a failure tag.
    """
    pairs = episodes(scenes)
    if not pairs:
        raise DataError("corpus has no questions")
    if config.scorer.live and client_factory is None:
        from .client import ChatClient

        def client_factory(seed):
            return ChatClient.from_binding(config.scorer, seed=seed)

    trials = []
    for seed in config.seeds():
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                logs = list(pool.map(lambda p: _run_one(config, p[0], p[1], seed,
                                                        client_factory), pairs))
        else:
            logs = [_run_one(config, s, q, seed, client_factory) for s, q in pairs]
        report = MetricsReport.from_results([EpisodeResult.from_log(lg) for lg in logs],
                                            config.gamma_s)
        trials.append(TrialResult(seed, logs, report))
    return BenchmarkResult(config, trials, _summarize(trials), timing_summary(
        [lg for t in trials for lg in t.logs]))


def write_benchmark(result, out_dir, include_timing=True):
    os.makedirs(out_dir, exist_ok=True)
    for t in result.trials:
        trial_dir = os.path.join(out_dir, f"trial-{t.seed}")
        os.makedirs(trial_dir, exist_ok=True)
        for lg in t.logs:
            with open(os.path.join(trial_dir, f"{lg['question_id']}.json"), "w",
                      encoding="utf-8") as fh:
                fh.write(lg.to_json(include_timing))
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(result.to_json())
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(result.table())


SWEEP_PARAMETERS = {"k": "k", "lambda": "lam", "lam": "lam", "weights": "weights"}


def parse_sweep_value(parameter, text):
    if parameter == "k":
        return int(text)
    if parameter in ("lambda", "lam"):
        return float(text)
    if parameter == "weights":
        parts = [float(v) for v in str(text).replace(":", ",").split(",")]
        if len(parts) != 2:
            raise ValueError(f"weights need 'w_size,w_dist', got {text!r}")
        return tuple(parts)
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def sweep(config, scenes, parameter, values, client_factory=None):
    """One benchmark per value; returns ``(rows, results)``.

    Each row is ``{"value", "sr", "sr_stderr", "steps", "steps_stderr"}``.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    rows, results = [], []
    for value in values:
        if parameter == "weights":
            cfg = replace(config, w_size=value[0], w_dist=value[1])
        else:
            cfg = replace(config, **{SWEEP_PARAMETERS[parameter]: value})
        res = run_benchmark(cfg, scenes, client_factory)
        sr, sr_se = res.summary["sr_percent"]
        st, st_se = res.summary["normalized_steps"]
        rows.append({"value": list(value) if isinstance(value, tuple) else value,
                     "sr": sr, "sr_stderr": sr_se, "steps": st, "steps_stderr": st_se})
        results.append(res)
    return rows, results


def format_sweep(parameter, rows):
    head = {"lam": "lambda"}.get(parameter, parameter)
    lines = [f"{head:>12}{'SR (%)':>18}{'Steps':>16}"]
    for r in rows:
        v = r["value"]
        v = ",".join(f"{x:g}" for x in v) if isinstance(v, list) else f"{v:g}"
        lines.append(f"{v:>12}{r['sr']:>11.2f} ± {r['sr_stderr']:<4.2f}"
                     f"{r['steps']:>9.3f} ± {r['steps_stderr']:.3f}")
    return "\n".join(lines) + "\n"


def load_logs(path):
    """Episode logs from a file or (recursively) a directory of log documents."""
    files = [path] if os.path.isfile(path) else sorted(
        glob.glob(os.path.join(path, "**", "*.json"), recursive=True))
    logs = []
    for f in files:
        try:
            with open(f, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise DataError(f"{f}: {exc}") from exc
        if isinstance(doc, dict) and "steps" in doc and "question_id" in doc:
            logs.append(EpisodeLog(doc))
    if not logs:
        raise DataError(f"{path}: no episode logs found")
    return logs
