"""Command-line entry point: ``eqasim {gen,run,bench,sweep,metrics,dump-map}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 endpoint failure.
The live endpoint token is read from the environment variable named by
``--token-env`` (default ``EQASIM_API_KEY``).
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

from . import __version__
from .config import RunConfig
from .errors import DataError, EndpointError
from .explorer import Explorer
from .frontier import (boundary_candidates, cluster_candidates, detect_candidates,
                       overlay_graymap)
from .generator import DEFAULT_MIX, QUESTION_KINDS, generate_corpus, write_corpus
from .harness import (format_sweep, format_timing, load_corpus, load_logs,
                      parse_sweep_value, run_benchmark, run_episode, sweep,
                      timing_summary, write_benchmark)
from .metrics import EpisodeResult, MetricsReport
from .relevance import ScorerBinding

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ENDPOINT = 0, 1, 2, 3

_HELP = {
    "k": "snapshots kept per target",
    "lam": "weight of the embedding score in the combined relevance",
    "eps": "clustering radius in cells",
    "min_pts": "clustering density threshold",
    "delta": "doorway test distance in cells",
    "w_size": "frontier priority weight on cluster size",
    "w_dist": "frontier priority weight on distance to unexplored space",
    "arrival_radius": "meters within which a waypoint counts as reached",
    "stop_threshold": "combined score every target needs before stopping",
    "evidence_threshold": "visible fraction the oracle answerer needs per target",
    "exhaustive_fraction": "explored share required before counting questions may stop",
    "spin_steps": "rotations per full spin",
    "translation_cap": "meters moved per translation step",
    "fov": "field of view in radians",
    "max_range": "depth range in meters",
    "rays": "depth rays per view",
    "truncation": "fusion truncation distance in meters",
    "max_weight": "fusion weight cap",
    "resolution": "voxel size in meters (0 uses the scene cell size)",
    "gamma_n": "step budget per square meter of free area",
    "gamma_s": "steps normalisation per square meter of free area",
    "fbe_only": "explore boundary frontiers only (no doorway frontiers)",
    "cot": "ask the answerer to reason step by step",
    "doorway_literal": "use the literal disjunctive doorway test",
    "raw_cosine": "use clipped raw cosine instead of the rescaled one",
    "trials": "number of trials",
    "workers": "episodes run concurrently",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p):
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="JSON file with configuration overrides")
    defaults = RunConfig()
    for f in dataclasses.fields(RunConfig):
        if f.name in ("scorer", "trial_seeds"):
            continue
        flag = "--" + f.name.replace("_", "-")
        default = getattr(defaults, f.name)
        if isinstance(default, bool):
            g.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction,
                           default=None, help=f"{_HELP.get(f.name, '')} (default {default})")
        else:
            g.add_argument(flag, dest=f.name, type=type(default), default=None,
                           metavar=type(default).__name__.upper(),
                           help=f"{_HELP.get(f.name, '')} (default {default:g})")
    g.add_argument("--lambda", dest="lam", type=float, help=argparse.SUPPRESS)
    g.add_argument("--trial-seeds", type=int, nargs="+", help="one seed per trial")
    s = p.add_argument_group("scorer")
    s.add_argument("--scorer", choices=("oracle", "live"), help="scoring backend (default oracle)")
    s.add_argument("--clip-mode", choices=("oracle", "embedding"), help="embedding score source")
    s.add_argument("--base-url", help="OpenAI-compatible endpoint, e.g. http://host:8000/v1")
    s.add_argument("--model", help="model name sent to the endpoint")
    s.add_argument("--token-env", help="environment variable holding the API token")
    s.add_argument("--timeout", type=float, help="request timeout in seconds")
    s.add_argument("--retries", type=int, help="retries for transient endpoint errors")
    s.add_argument("--prompts", help="JSON file overriding prompt templates")


def build_config(args):
    """RunConfig from defaults, then ``--config`` file, then explicit flags."""
    values = {}
    scorer = {}
    if args.config:
        doc = _read_json(args.config)
        if not isinstance(doc, dict):
            raise DataError(f"{args.config}: expected an object")
        scorer.update(doc.pop("scorer", {}) or {})
        values.update(doc)
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None and f.name not in ("scorer",):
            values[f.name] = v
    if getattr(args, "trial_seeds", None):
        values["trial_seeds"] = tuple(args.trial_seeds)
        if args.trials is None:
            values["trials"] = len(args.trial_seeds)
    for key, name in (("mode", "scorer"), ("clip_mode", "clip_mode"), ("base_url", "base_url"),
                      ("model", "model"), ("token_env", "token_env"), ("timeout", "timeout"),
                      ("retries", "retries")):
        v = getattr(args, name, None)
        if v is not None:
            scorer[key] = v
    if getattr(args, "prompts", None):
        scorer["prompts"] = _read_json(args.prompts)
    unknown = set(values) - set(RunConfig.field_names())
    if unknown:
        raise UsageError(f"unknown configuration keys: {sorted(unknown)}")
    if "trial_seeds" in values:
        values["trial_seeds"] = tuple(values["trial_seeds"])
    try:
        binding = ScorerBinding(**scorer)
        values.setdefault("raw_cosine", binding.raw_cosine)
        return RunConfig(scorer=binding, **values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        d = os.path.dirname(path)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _parse_mix(text):
    mix = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in QUESTION_KINDS:
            raise UsageError(f"unknown question kind {key!r}; expected {QUESTION_KINDS}")
        try:
            mix[key] = float(value)
        except ValueError:
            raise UsageError(f"bad weight in mix entry {part!r}") from None
    return mix


def cmd_gen(args):
    mix = _parse_mix(args.mix) if args.mix else dict(DEFAULT_MIX)
    params = {"rows": args.rows, "cols": args.cols, "rooms": args.rooms,
              "questions": args.questions, "mix": mix, "cell_size": args.cell_size}
    try:
        scenes = generate_corpus(args.seed, args.n_scenes, **params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    path = write_corpus(scenes, args.out, seed=args.seed, params=params)
    print(f"wrote {len(scenes)} scenes to {os.path.dirname(path) or '.'}")
    return EXIT_OK


def _pick_question(scene, qid):
    if qid is None:
        if not scene.questions:
            raise DataError("scene has no questions")
        return scene.questions[0]
    try:
        return scene.question(qid)
    except KeyError:
        raise DataError(f"no question {qid!r} in scene") from None


def cmd_run(args):
    config = build_config(args)
    scenes = load_corpus(args.scene)
    if len(scenes) != 1:
        raise UsageError("run takes a single scene document")
    scene = scenes[0]
    question = _pick_question(scene, args.question)
    log = run_episode(config, scene, question)
    _write(args.out, log.to_json(include_timing=not args.no_timing))
    if args.out not in (None, "-"):
        print(f"{question.id}: answer {log['answer']!r} "
              f"({'correct' if log['correct'] else 'wrong'}), {log['steps_taken']} steps, "
              f"stop: {log['stop']['reason']}")
    return EXIT_OK


def cmd_bench(args):
    config = build_config(args)
    scenes = load_corpus(args.corpus)
    result = run_benchmark(config, scenes)
    if args.out:
        write_benchmark(result, args.out, include_timing=not args.no_timing)
    sys.stdout.write(result.to_json() if args.json else result.table())
    return EXIT_ENDPOINT if result.endpoint_failures else EXIT_OK


def cmd_sweep(args):
    config = build_config(args)
    scenes = load_corpus(args.corpus)
    try:
        values = [parse_sweep_value(args.parameter, v) for v in args.values]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows, results = sweep(config, scenes, args.parameter, values)
    if args.out:
        _write(args.out, json.dumps({"parameter": args.parameter, "rows": rows},
                                    sort_keys=True, indent=1) + "\n")
    sys.stdout.write(json.dumps(rows, indent=1) + "\n" if args.json
                     else format_sweep(args.parameter, rows))
    failures = sum(r.endpoint_failures for r in results)
    return EXIT_ENDPOINT if failures else EXIT_OK


def cmd_metrics(args):
    logs = load_logs(args.logs)
    try:
        results = [EpisodeResult.from_log(lg) for lg in logs]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed episode log: {exc}") from exc
    report = MetricsReport.from_results(results, args.gamma_s)
    if args.json:
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.table())
        sys.stdout.write("\n" + format_timing(timing_summary(logs)))
    return EXIT_OK


def cmd_dump_map(args):
    config = build_config(args)
    scenes = load_corpus(args.scene)
    if len(scenes) != 1:
        raise UsageError("dump-map takes a single scene document")
    scene = scenes[0]
    question = _pick_question(scene, args.question)
    explorer = Explorer(scene, question, config)
    steps = config.spin_steps if args.steps is None else args.steps
    explorer.plan = dataclasses.replace(explorer.plan, max_steps=steps)
    explorer.run()
    sl = explorer.slice
    if args.frontiers:
        if config.fbe_only:
            cands = boundary_candidates(sl)
        else:
            cands = detect_candidates(sl, config.delta, config.doorway_literal)
        clusters = cluster_candidates(cands, config.eps, config.min_pts)
        text = overlay_graymap(sl, cands, clusters)
    else:
        text = sl.to_graymap()
    _write(args.out, text + "\n")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="eqasim", description="Grid-world embodied question answering engine.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a seeded scene corpus")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n-scenes", type=int, default=10)
    g.add_argument("--rows", type=int, nargs=2, default=(12, 18), metavar=("MIN", "MAX"))
    g.add_argument("--cols", type=int, nargs=2, default=(12, 22), metavar=("MIN", "MAX"))
    g.add_argument("--rooms", type=int, nargs=2, default=(3, 5), metavar=("MIN", "MAX"))
    g.add_argument("--questions", type=int, default=1, help="questions per scene")
    g.add_argument("--mix", help="question kind weights, e.g. mc_single=0.5,counting=0.5")
    g.add_argument("--cell-size", type=float, default=1.0)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run one episode")
    r.add_argument("scene", help="scene document")
    r.add_argument("--question", help="question id (default: the first)")
    r.add_argument("--out", help="write the episode log here (default stdout)")
    r.add_argument("--no-timing", action="store_true", help="omit timing fields")
    _add_config_flags(r)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="benchmark a corpus over one or more trials")
    b.add_argument("corpus", help="corpus directory or scene document")
    b.add_argument("--out", help="directory for logs and reports")
    b.add_argument("--json", action="store_true", help="print the JSON report")
    b.add_argument("--no-timing", action="store_true", help="omit timing fields from logs")
    _add_config_flags(b)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("sweep", help="benchmark once per parameter value")
    s.add_argument("corpus")
    s.add_argument("--parameter", required=True, choices=("k", "lambda", "weights"))
    s.add_argument("--values", required=True, nargs="+",
                   help="values; weights are given as w_size,w_dist")
    s.add_argument("--out", help="write the sweep table as JSON")
    s.add_argument("--json", action="store_true")
    _add_config_flags(s)
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("metrics", help="re-score existing episode logs")
    m.add_argument("logs", help="log file or directory")
    m.add_argument("--gamma-s", type=float, default=4.0)
    m.add_argument("--json", action="store_true")
    m.set_defaults(func=cmd_metrics)

    d = sub.add_parser("dump-map", help="print the occupancy slice after some steps")
    d.add_argument("scene")
    d.add_argument("--question")
    d.add_argument("--steps", type=int, help="steps to run (default: the initial spin)")
    d.add_argument("--frontiers", action="store_true", help="overlay frontier cells")
    d.add_argument("--out")
    _add_config_flags(d)
    d.set_defaults(func=cmd_dump_map)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"eqasim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"eqasim: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EndpointError as exc:
        print(f"eqasim: endpoint failure: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT


if __name__ == "__main__":
    sys.exit(main())
