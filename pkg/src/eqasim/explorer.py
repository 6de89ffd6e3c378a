"""The exploration episode: question parsing, global/local relevance steps, stopping
and answering."""

import difflib
import json
import logging
import math
import re
import time
from dataclasses import dataclass, field

from . import prompts
from .config import RunConfig
from .errors import BlockedPathError, RoomNotVisibleError, ScorerError
from .frontier import (FrontierQueue, boundary_candidates, cluster_candidates,
                       detect_candidates, rank_frontiers)
from .grid import connected_components
from .memory import EpisodeMemory, MemoryEntry
from .metrics import grade_open_answer
from .occupancy import OccupancyVolume, explored_fraction, slice_volume
from .relevance import RelevanceScorer, dominant_room
from .scene import (Rotate, TranslateToward, apply_action, render_observation, start_state)

log = logging.getLogger(__name__)

LOG_VERSION = 1

INITIAL_SPIN = "InitialSpin"
GLOBAL = "GlobalRelevance"
ENTERING = "EnteringRoom"
LOCAL = "LocalRelevance"
STOPPED = "Stopped"

ANSWERED = "answered"
BUDGET = "budget_exhausted"

LEGAL_TRANSITIONS = {
    INITIAL_SPIN: {INITIAL_SPIN, GLOBAL, STOPPED},
    GLOBAL: {GLOBAL, ENTERING, STOPPED},
    ENTERING: {ENTERING, LOCAL, GLOBAL, STOPPED},
    LOCAL: {LOCAL, GLOBAL, STOPPED},
    STOPPED: set(),
}


@dataclass(frozen=True)
class Phase:
    name: str
    room: str = None
    waypoint: tuple = None
    direction: tuple = None
    progress: int = 0
    reason: str = None

    def to_dict(self):
        d = {"name": self.name}
        for key in ("room", "waypoint", "direction", "reason"):
            value = getattr(self, key)
            if value is not None:
                d[key] = list(value) if isinstance(value, tuple) else value
        if self.name == LOCAL:
            d["progress"] = self.progress
        return d


def is_legal(trace):
    """True if a sequence of phase names only uses allowed transitions."""
    return all(b in LEGAL_TRANSITIONS[a] for a, b in zip(trace, trace[1:]))


@dataclass(frozen=True)
class EpisodePlan:
    regions: tuple
    targets: tuple
    max_steps: int
    question: object

    def to_dict(self):
        return {"regions": list(self.regions), "targets": [list(t) for t in self.targets],
                "max_steps": self.max_steps}


@dataclass(frozen=True)
class StopDecision:
    stop: bool
    rationale: str
    forced_continue: bool = False

    def __post_init__(self):
        if self.forced_continue and self.stop:
            raise ValueError("forced_continue implies stop=False")

    def to_dict(self):
        return {"stop": self.stop, "rationale": self.rationale,
                "forced_continue": self.forced_continue}


def max_steps_for(scene, gamma_n):
    return math.ceil(gamma_n * scene.room_size_m2)


def _best_room_match(name, vocabulary):
    lowered = {v.lower(): v for v in vocabulary}
    key = name.strip().lower()
    if key in lowered:
        return lowered[key]
    match = difflib.get_close_matches(key, list(lowered), n=1, cutoff=0.0)
    return lowered[match[0]] if match else None


def parse_question(question, binding, scene, gamma_n=4.0, client=None, degradations=None):
    """Relevant regions and targets for ``question``.

    Oracle mode copies the annotations; live mode asks the endpoint for a JSON
    reply and falls back to the annotations when it cannot be used.
    """
    regions, targets = tuple(question.annotated_regions), tuple(question.annotated_targets)
    if binding.live:
        try:
            prompt = prompts.get(binding.prompts, "extract").format(
                rooms=", ".join(scene.room_names), question=question.text)
            regions, targets = _parse_extraction(client.complete(prompt).content, scene)
        except (ScorerError, ValueError, KeyError, TypeError) as exc:
            log.warning("question parsing fell back to annotations: %s", exc)
            if degradations is not None:
                degradations.append({"op": "parse_question", "error": str(exc)})
            regions, targets = tuple(question.annotated_regions), tuple(question.annotated_targets)
    return EpisodePlan(regions, targets, max_steps_for(scene, gamma_n), question)


def _parse_extraction(text, scene):
    m = re.search(r"\{.*\}", text, re.S)
    if m is None:
        raise ValueError("no JSON object in reply")
    doc = json.loads(m.group())
    regions = []
    for name in doc["regions"]:
        room = _best_room_match(str(name), scene.room_names)
        if room and room not in regions:
            regions.append(room)
    targets = []
    for label, room in doc["targets"]:
        room = _best_room_match(str(room), scene.room_names) if room else None
        targets.append((str(label), room))
    if not targets:
        raise ValueError("reply names no targets")
    return tuple(regions), tuple(targets)


def initial_spin(scene, state, spin_steps=8, volume=None, first_id=0, **render_kw):
    """Rotate in place ``spin_steps`` times, rendering and fusing after each turn.

    Returns ``(observations, volume, state)``.
    """
    if volume is None:
        volume = OccupancyVolume.for_scene(scene)
    observations = []
    for i in range(spin_steps):
        state = apply_action(scene, state, Rotate(2 * math.pi / spin_steps))
        obs = render_observation(scene, state, obs_id=first_id + i, **render_kw)
        volume.fuse(obs)
        observations.append(obs)
    return observations, volume, state


def detect_region(observation, binding, scene, client=None, degradations=None):
    """Room label ``R_t`` for the current view."""
    if binding.live:
        try:
            prompt = prompts.get(binding.prompts, "region").format(
                rooms=", ".join(scene.room_names), observation=observation.summary())
            room = _best_room_match(client.complete(prompt, max_tokens=16).content,
                                    scene.room_names)
            if room is not None:
                return room
            raise ScorerError("empty region reply")
        except ScorerError as exc:
            if degradations is not None:
                degradations.append({"op": "detect_region", "observation": observation.id,
                                     "error": str(exc)})
    room = dominant_room(observation)
    if room is None:
        room = scene.room_at(observation.pose.x, observation.pose.y)
    return room


def room_entry_target(observation, room, scene):
    """Direction and waypoint toward the visible part of ``room``.

    The visible cells of the room play the role of the segmented contour:
    their largest 4-connected component is taken, and the agent heads for its
    centroid. The waypoint is the component cell nearest that centroid.
    """
    cells = [c for c in observation.visible_cells if scene.room_at_cell(c) == room]
    if not cells:
        raise RoomNotVisibleError(room)
    comp = connected_components(cells)[0]
    cr = sum(r for r, _ in comp) / len(comp)
    cc = sum(c for _, c in comp) / len(comp)
    cs = scene.cell_size
    cx, cy = (cc + 0.5) * cs, (cr + 0.5) * cs
    dx, dy = cx - observation.pose.x, cy - observation.pose.y
    norm = math.hypot(dx, dy)
    direction = (dx / norm, dy / norm) if norm > 0 else (
        math.cos(observation.pose.heading), math.sin(observation.pose.heading))
    anchor = min(comp, key=lambda p: ((p[0] - cr) ** 2 + (p[1] - cc) ** 2, p))
    return direction, scene.cell_center(anchor)


def room_entry_direction(observation, room, scene):
    return room_entry_target(observation, room, scene)[0]


def _snapshot_text(memory):
    seen = set()
    lines = []
    for entry in memory.all_snapshots():
        if entry.observation_id in seen:
            continue
        seen.add(entry.observation_id)
        lines.append(f"- {entry.summary}")
    return "\n".join(lines) or "- (none)"


def should_stop(memory, question, binding, explored=0.0, stop_threshold=0.75,
                exhaustive_fraction=0.9, client=None, degradations=None):
    """Decide whether the retained views suffice to answer ``question``."""
    if binding.live:
        from .client import yes_probability

        try:
            prompt = prompts.get(binding.prompts, "stop").format(
                question=question.text, snapshots=_snapshot_text(memory),
                exhaustive=(prompts.get(binding.prompts, "stop_exhaustive")
                            if question.requires_exhaustive else ""))
            p = yes_probability(client.complete(prompt, logprobs=True, max_tokens=1))
            return StopDecision(p >= 0.5, f"endpoint yes-probability {p:.3f}")
        except ScorerError as exc:
            if degradations is not None:
                degradations.append({"op": "should_stop", "error": str(exc)})
    for target, mem in memory.per_target.items():
        best = mem.best()
        if best is None:
            return StopDecision(False, f"no view of {target[0]} in {target[1]} yet")
        if best.score.combined < stop_threshold:
            return StopDecision(False, f"best view of {target[0]} scores "
                                       f"{best.score.combined:.3f} < {stop_threshold}")
    if question.requires_exhaustive and explored < exhaustive_fraction:
        return StopDecision(False, f"exhaustive question, explored {explored:.2f} < "
                                   f"{exhaustive_fraction}", forced_continue=True)
    return StopDecision(True, "every target has a confident view")


def has_evidence(memory, threshold):
    """True if each target's top entry shows that target at or above ``threshold``."""
    for target, mem in memory.per_target.items():
        best = mem.best()
        if best is None:
            return False
        frac = max((f for lab, rm, f in best.evidence if (lab, rm) == target), default=0.0)
        if frac < threshold:
            return False
    return True


def oracle_wrong_answer(question):
    if question.is_multiple_choice:
        return min(k for k in question.options if k != question.ground_truth)
    return "unknown"


def answer(question, memory, binding, cot=True, evidence_threshold=0.5, client=None,
           degradations=None):
    """Final answer from memory; returns ``(answer, rationale)``."""
    if binding.live:
        try:
            return _live_answer(question, memory, binding, cot, client)
        except ScorerError as exc:
            if degradations is not None:
                degradations.append({"op": "answer", "error": str(exc)})
    if has_evidence(memory, evidence_threshold):
        return question.ground_truth, "every target's best view shows the target"
    return oracle_wrong_answer(question), "missing evidence for at least one target"


def _live_answer(question, memory, binding, cot, client):
    reasoning = prompts.get(binding.prompts, "cot") if cot else ""
    snapshots = _snapshot_text(memory)
    if question.is_multiple_choice:
        options = "\n".join(f"{k}. {v}" for k, v in sorted(question.options.items()))
        prompt = prompts.get(binding.prompts, "answer_mc").format(
            question=question.text, options=options, snapshots=snapshots, reasoning=reasoning)
    else:
        prompt = prompts.get(binding.prompts, "answer_open").format(
            question=question.text, snapshots=snapshots, reasoning=reasoning)
    text = client.complete(prompt, max_tokens=512).content
    return parse_answer(text, question), text


def parse_answer(text, question):
    m = re.findall(r"answer\s*:\s*(.+)", text, re.I)
    tail = m[-1].strip() if m else text.strip().splitlines()[-1].strip() if text.strip() else ""
    if question.is_multiple_choice:
        letters = sorted(question.options)
        found = re.match(r"\(?([A-Za-z])\b", tail)
        if found and found.group(1).upper() in letters:
            return found.group(1).upper()
        for letter in letters:
            if re.search(rf"\b{letter}\b", text):
                return letter
        raise ScorerError(f"no option letter in reply {tail[:60]!r}")
    return tail.rstrip(".")


@dataclass
class EpisodeLog:
    data: dict = field(default_factory=dict)

    def to_json(self, include_timing=True):
        return json.dumps(self.as_dict(include_timing), sort_keys=True, indent=1) + "\n"

    def as_dict(self, include_timing=True):
        if include_timing:
            return self.data
        out = dict(self.data)
        out["steps"] = [{k: v for k, v in s.items() if k != "timing_us"} for s in self.data["steps"]]
        out.pop("timing_summary", None)
        return out

    @classmethod
    def from_json(cls, text):
        return cls(json.loads(text))

    def __getitem__(self, key):
        return self.data[key]


class _Timer:
    def __init__(self):
        self.parts = {}

    def add(self, name, ns):
        self.parts[name] = self.parts.get(name, 0) + ns


class Explorer:
    """Runs one episode of the exploration loop for a question in a scene."""

    def __init__(self, scene, question, config=None, client=None):
        self.scene = scene
        self.question = question
        self.config = config or RunConfig()
        self.binding = self.config.scorer
        if self.binding.live and client is None:
            from .client import ChatClient

            client = ChatClient.from_binding(self.binding)
        self.client = client
        self.degradations = []
        cfg = self.config
        self.plan = parse_question(question, self.binding, scene, cfg.gamma_n, client,
                                   self.degradations)
        self.state = start_state(scene, question)
        self.volume = OccupancyVolume.for_scene(
            scene, resolution=cfg.resolution or None, truncation=cfg.truncation,
            max_weight=cfg.max_weight)
        self.slice = slice_volume(self.volume)
        self.memory = EpisodeMemory(self.plan.targets, cfg.k)
        self.scorer = RelevanceScorer(self.binding, question, self.plan.targets, cfg.lam, client)
        self.phase = Phase(INITIAL_SPIN)
        self.phase_trace = [INITIAL_SPIN]
        self.steps = []
        self.next_obs_id = 0
        self.last_obs = None
        self.views_here = []  # observations taken since the last translation
        self.visited_rooms = set()
        self.visited_frontiers = {"doorway": set(), "boundary": set()}  # anchor cells
        self.target_frontier = None
        self.frontier_kind_used = {"doorway": 0, "boundary": 0}
        self._timer = _Timer()
        self._t0 = time.perf_counter_ns()
        self._pending_stop = None

    # -- bookkeeping -------------------------------------------------------

    def _transition(self, phase):
        if phase.name not in LEGAL_TRANSITIONS[self.phase.name]:
            raise RuntimeError(f"illegal transition {self.phase.name} -> {phase.name}")
        if phase.name != self.phase.name:
            self.phase_trace.append(phase.name)
        self.phase = phase

    def _lap(self, name, t_start):
        now = time.perf_counter_ns()
        self._timer.add(name, now - t_start)
        return now

    @property
    def render_kw(self):
        cfg = self.config
        return {"fov": cfg.fov, "max_range": cfg.max_range, "rays": cfg.rays}

    def _observe(self):
        t = time.perf_counter_ns()
        obs = render_observation(self.scene, self.state, obs_id=self.next_obs_id, **self.render_kw)
        self.next_obs_id += 1
        t = self._lap("render", t)
        self.volume.fuse(obs)
        self.slice = slice_volume(self.volume)
        t = self._lap("fusion", t)
        latency0 = self.client.total_latency_s if self.client is not None else 0.0
        scores = self.scorer.score(obs)
        summary = obs.summary()
        for target, breakdown in scores.items():
            evidence = ((target[0], target[1], obs.object_fraction(*target)),)
            self.memory.insert(target, MemoryEntry(obs.id, breakdown, obs.pose, summary, evidence))
        t = self._lap("scoring", t)
        region = detect_region(obs, self.binding, self.scene, self.client, self.degradations)
        self._lap("region", t)
        if self.client is not None:
            self._timer.add("client", int((self.client.total_latency_s - latency0) * 1e9))
        self.last_obs = obs
        return obs, region, scores

    def _act(self, action):
        t = time.perf_counter_ns()
        phase_name = self.phase.name
        self.state = apply_action(self.scene, self.state, action, self.config.translation_cap)
        self._lap("planning", t)
        if isinstance(action, TranslateToward):
            self.views_here = []
        obs, region, scores = self._observe()
        self.views_here.append((obs, region))
        record = {
            "step": self.state.step_count,
            "phase": phase_name,
            "action": action.to_dict(),
            "pose": self.state.to_dict(),
            "observation_id": obs.id,
            "region": region,
            "agent_room": self.scene.room_at(self.state.x, self.state.y),
            "scores": [[t[0], t[1], b.clip_score, b.vlm_score, b.combined]
                       for t, b in scores.items()],
            "stop": None,
        }
        self.steps.append(record)
        return obs, region, record

    def _close_step(self, record):
        now = time.perf_counter_ns()
        parts = {k: v // 1000 for k, v in sorted(self._timer.parts.items())}
        parts["total"] = (now - self._t0) // 1000
        record["timing_us"] = parts
        self._timer = _Timer()
        self._t0 = now

    # -- phases ------------------------------------------------------------

    def run(self):
        cfg = self.config
        for _ in range(cfg.spin_steps):
            if self.state.step_count >= self.plan.max_steps:
                break
            _, _, record = self._act(Rotate(2 * math.pi / cfg.spin_steps))
            self._close_step(record)
        if self.state.step_count >= self.plan.max_steps:
            self._transition(Phase(STOPPED, reason=BUDGET))
        else:
            self._transition(Phase(GLOBAL))
        idle = 0
        while self.phase.name != STOPPED:
            if self.state.step_count >= self.plan.max_steps:
                self._transition(Phase(STOPPED, reason=BUDGET))
                break
            if self.phase.name == GLOBAL:
                record = self.global_step()
            elif self.phase.name == ENTERING:
                record = self.entering_step()
            else:
                record = self.local_step()
            if record is None:
                idle += 1
                if idle > 16:
                    raise RuntimeError("explorer made no progress")
                continue
            idle = 0
            self._close_step(record)
        return self._finish()

    def _sighting(self):
        """A relevant, unvisited room seen from here that the agent is not in."""
        here = self.scene.room_at(self.state.x, self.state.y)
        for obs, region in reversed(self.views_here):
            if region in self.plan.regions and region not in self.visited_rooms and region != here:
                try:
                    direction, waypoint = room_entry_target(obs, region, self.scene)
                except RoomNotVisibleError:
                    continue
                return region, direction, waypoint
        return None

    def _frontier_queue(self):
        cfg = self.config
        t = time.perf_counter_ns()
        kinds = ["boundary"] if cfg.fbe_only else ["doorway", "boundary"]
        queue, kind = FrontierQueue(), kinds[-1]
        for kind in kinds:
            if kind == "doorway":
                cands = detect_candidates(self.slice, cfg.delta, cfg.doorway_literal)
            else:
                cands = boundary_candidates(self.slice)
            clusters = cluster_candidates(cands, cfg.eps, cfg.min_pts, kind=kind)
            ranked = rank_frontiers(clusters, self.slice, cfg.weights)
            queue = FrontierQueue([f for f in ranked if not self._frontier_visited(f)])
            if queue:
                break
        self._lap("detection", t)
        return queue, kind

    def _frontier_visited(self, f):
        # doorway clusters are stable, so any visited member retires them;
        # boundary clusters change as the map grows, so only the same cluster counts
        visited = self.visited_frontiers[f.kind]
        if f.kind == "doorway":
            return any(cell in visited for cell in f.member_cells)
        return (f.anchor, f.member_cells) in visited

    def _mark_frontier_visited(self, f):
        if f.kind == "doorway":
            self.visited_frontiers[f.kind].add(f.anchor)
        else:
            self.visited_frontiers[f.kind].add((f.anchor, f.member_cells))
        self.target_frontier = None

    def _frontier_waypoint(self, f):
        return self.slice.cell_center(f.anchor)

    def _arrived(self, waypoint):
        return math.hypot(self.state.x - waypoint[0],
                          self.state.y - waypoint[1]) <= self.config.arrival_radius

    def global_step(self):
        """One global-relevance decision; returns the step record or ``None``."""
        here = self.scene.room_at(self.state.x, self.state.y)
        if here in self.plan.regions and here not in self.visited_rooms:
            self._transition(Phase(ENTERING, room=here))
            return None
        sighting = self._sighting()
        if sighting is not None:
            room, direction, waypoint = sighting
            self._transition(Phase(ENTERING, room=room, waypoint=waypoint, direction=direction))
            return None

        queue, kind = self._frontier_queue()
        current = self.target_frontier
        if current is not None:
            match = [f for f in queue if f.kind == current.kind
                     and (f.anchor == current.anchor or current.anchor in f.member_cells)]
            if match and current.kind == kind:
                self.target_frontier = match[0]
            else:
                self.target_frontier = None
        while True:
            if self.target_frontier is None:
                if not queue:
                    # frontiers retired during this step may expose the fallback kind
                    queue, kind = self._frontier_queue()
                if not queue:
                    self._transition(Phase(STOPPED, reason=BUDGET))
                    return None
                self.target_frontier = queue.pop()
            f = self.target_frontier
            waypoint = self._frontier_waypoint(f)
            if self._arrived(waypoint):
                self._mark_frontier_visited(f)
                turn = self._look_turn(f)
                if turn is not None:
                    self.phase = Phase(GLOBAL)
                    _, _, record = self._act(Rotate(turn))
                    record["frontier"] = self._frontier_record(f)
                    return record
                queue = FrontierQueue([g for g in queue if not self._frontier_visited(g)])
                continue
            try:
                self.phase = Phase(GLOBAL, waypoint=waypoint)
                _, _, record = self._act(TranslateToward(waypoint))
            except BlockedPathError:
                self._mark_frontier_visited(f)
                continue
            self.frontier_kind_used[f.kind] += 1
            record["frontier"] = self._frontier_record(f)
            return record

    @staticmethod
    def _frontier_record(f):
        return {"kind": f.kind, "centroid": list(f.centroid), "size": f.size,
                "priority": f.priority}

    def _look_turn(self, f):
        """Rotation that brings the most unexplored cells bordering ``f`` into view.

        Candidate turns are multiples of the spin increment; returns None when
        the current heading already does as well as any of them.
        """
        unk = self.slice.unexplored
        h, w = unk.shape
        cells = {(r + dr, c + dc) for r, c in f.member_cells
                 for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0))
                 if 0 <= r + dr < h and 0 <= c + dc < w and unk[r + dr, c + dc]}
        res = self.slice.resolution
        bearings = []
        for r, c in cells:
            dx, dy = (c + 0.5) * res - self.state.x, (r + 0.5) * res - self.state.y
            if math.hypot(dx, dy) > 1e-9:
                bearings.append(math.atan2(dy, dx))
        if not bearings:
            return None
        half = self.config.fov / 2

        def covered(heading):
            return sum(1 for b in bearings
                       if abs((b - heading + math.pi) % (2 * math.pi) - math.pi) <= half)

        n = self.config.spin_steps
        turns = sorted((2 * math.pi * i / n if i <= n // 2 else 2 * math.pi * (i - n) / n)
                       for i in range(n))
        best = max(turns, key=lambda t: (covered(self.state.heading + t), -abs(t), t))
        if best == 0 or covered(self.state.heading + best) <= covered(self.state.heading):
            return None
        return best

    def entering_step(self):
        room = self.phase.room
        here = self.scene.room_at(self.state.x, self.state.y)
        waypoint = self.phase.waypoint
        if here == room and (waypoint is None or self._arrived(waypoint)):
            self._transition(Phase(LOCAL, room=room, progress=0))
            return None
        try:
            _, _, record = self._act(TranslateToward(waypoint))
        except BlockedPathError:
            if here == room:
                self._transition(Phase(LOCAL, room=room, progress=0))
            else:
                self.visited_rooms.add(room)
                self._transition(Phase(GLOBAL))
            return None
        return record

    def local_step(self):
        """One in-room spin increment, with the stop check when facing the region."""
        cfg = self.config
        room = self.phase.room
        _, region, record = self._act(Rotate(2 * math.pi / cfg.spin_steps))
        progress = self.phase.progress + 1
        if region in self.plan.regions:
            decision = should_stop(
                self.memory, self.question, self.binding,
                explored=explored_fraction(self.slice, self.scene),
                stop_threshold=cfg.stop_threshold, exhaustive_fraction=cfg.exhaustive_fraction,
                client=self.client, degradations=self.degradations)
            record["stop"] = decision.to_dict()
            if decision.stop:
                self._transition(Phase(STOPPED, reason=ANSWERED))
                self._pending_stop = decision
                return record
        if progress >= cfg.spin_steps:
            self.visited_rooms.add(room)
            self._transition(Phase(GLOBAL))
        else:
            self.phase = Phase(LOCAL, room=room, progress=progress)
        return record

    # -- wrap-up -----------------------------------------------------------

    def _finish(self):
        cfg = self.config
        q = self.question
        ans, rationale = answer(q, self.memory, self.binding, cfg.cot, cfg.evidence_threshold,
                                self.client, self.degradations)
        sigma = None
        if q.is_multiple_choice:
            correct = ans == q.ground_truth
        else:
            labels = [t[0] for t in q.annotated_targets]
            sigma = grade_open_answer(ans, q.ground_truth, labels)
            correct = sigma >= 4
        first_entry = next((s["step"] for s in self.steps
                            if s["agent_room"] in q.annotated_regions), None)
        stop_reason = self.phase.reason
        if self._pending_stop is not None:
            stop_rationale = self._pending_stop.rationale
        elif self.state.step_count >= self.plan.max_steps:
            stop_rationale = f"step budget {self.plan.max_steps} reached"
        else:
            stop_rationale = "no frontiers left to explore"
        data = {
            "version": LOG_VERSION,
            "question_id": q.id,
            "scene": dict(self.scene.generator or {}),
            "kind": q.kind,
            "requires_exhaustive": q.requires_exhaustive,
            "config": cfg.to_dict(),
            "plan": self.plan.to_dict(),
            "steps": self.steps,
            "phase_trace": self.phase_trace,
            "memory": self.memory.to_dict(),
            "stop": {"reason": stop_reason, "rationale": stop_rationale},
            "answer": ans,
            "answer_rationale": rationale,
            "ground_truth": q.ground_truth,
            "correct": correct,
            "sigma": sigma,
            "steps_taken": self.state.step_count,
            "spin_steps": min(cfg.spin_steps, len(self.steps)),
            "distance_traveled_m": self.state.distance_traveled_m,
            "scene_free_area_m2": self.scene.room_size_m2,
            "gt_geodesic_m": q.gt_trajectory_length_m,
            "first_relevant_entry_step": first_entry,
            "explored_fraction": explored_fraction(self.slice, self.scene),
            "frontier_steps": dict(self.frontier_kind_used),
            "degradations": self.degradations + self.scorer.degradations,
            "failure": None,
        }
        return EpisodeLog(data)


def run_explorer(scene, question, config=None, client=None):
    return Explorer(scene, question, config, client).run()
