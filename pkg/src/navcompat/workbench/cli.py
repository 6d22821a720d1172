"""Command line entry point: ``navcompat <subcommand> ...``.

Exit codes: 0 success, 2 validation error, 3 unsatisfiable perturbation,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..compat.data import FeatureCache, Provenance, TrainingSet
from ..compat.features import load_features
from ..compat.io import load_model, save_model
from ..compat.train import NumericError, TrainConfig, train
from ..crafty import CraftyParams, build_hmm, compute_idf, generate, load_objects, load_templates
from ..metrics import MetricParams, score_path
from ..navgraph import Trajectory, load_graph, load_trajectories, read_jsonl, validate_trajectory
from ..pathperturb import PathPerturbKind, UnsatisfiablePerturbation, perturb_path, sample_path_negative
from ..stats import ScoredLabel, auc
from ..textperturb import Instruction, TextPerturbKind, perturb_text, sample_text_negative
from .corpus import CorpusConfig, CorpusPair, Manifest, build_training_corpus, pair_positives
from .evaluate import classify_instructions, correlation_report, rank_and_filter, render_correlation_table, score_corpus

EXIT_OK, EXIT_VALIDATION, EXIT_UNSAT, EXIT_NUMERIC = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


# --- output helpers ------------------------------------------------------------

def _table(records: Sequence[dict]) -> str:
    if not records:
        return "(no records)"
    cols = list(records[0])
    cells = [[_cell(r.get(c)) for c in cols] for r in records]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    if isinstance(v, (list, dict)):
        s = json.dumps(v)
        return s if len(s) <= 60 else s[:57] + "..."
    return "" if v is None else str(v)


def emit(args, records: list[dict], table: str | None = None) -> None:
    """JSONL to ``--out`` (or stdout); with ``--format table`` a table goes to stdout."""
    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    if args.out:
        Path(args.out).write_text(lines, encoding="utf-8")
    elif args.format == "jsonl":
        sys.stdout.write(lines)
    if args.format == "table":
        print(table if table is not None else _table(records))


def _trajectories(path: str, graph) -> list[Trajectory]:
    trajs = load_trajectories(path)
    for t in trajs:
        problems = validate_trajectory(graph, t)
        if problems:
            raise CliError(f"trajectory {t.id}: {'; '.join(problems)}")
    return trajs


def _instructions(path: str) -> list[Instruction]:
    return [Instruction.from_record(r) for r in read_jsonl(path)]


def _seeded(seed, index: int):
    return np.random.default_rng([0 if seed is None else seed, index])


def _finish_unsat(args, failures: list[str]) -> int:
    if failures:
        print(f"{len(failures)} unsatisfiable: {', '.join(failures[:5])}"
              + (" ..." if len(failures) > 5 else ""), file=sys.stderr)
        if not args.skip_unsatisfiable:
            return EXIT_UNSAT
    return EXIT_OK


# --- subcommands ---------------------------------------------------------------

def cmd_perturb_path(args) -> int:
    graph = load_graph(args.graph)
    out, failures = [], []
    for i, t in enumerate(_trajectories(args.trajectories, graph)):
        rng = _seeded(args.seed, i)
        try:
            if args.method == "mixed":
                p = sample_path_negative(graph, t, rng)
            else:
                p = perturb_path(graph, t, PathPerturbKind(args.method), rng)
        except UnsatisfiablePerturbation as exc:
            failures.append(f"{t.id} ({exc})")
            continue
        out.append(p.to_record())
    emit(args, out)
    return _finish_unsat(args, failures)


def cmd_perturb_text(args) -> int:
    out, failures = [], []
    for i, inst in enumerate(_instructions(args.instructions)):
        rng = _seeded(args.seed, i)
        try:
            if args.method == "mixed":
                p = sample_text_negative(inst, rng)
            else:
                p = perturb_text(inst, TextPerturbKind(args.method), rng)
        except UnsatisfiablePerturbation as exc:
            failures.append(f"{inst.id} ({exc})")
            continue
        out.append(p.to_record())
    emit(args, out)
    return _finish_unsat(args, failures)


def cmd_crafty(args) -> int:
    graph = load_graph(args.graph)
    env = load_objects(args.objects, graph)
    templates = load_templates(args.templates) if args.templates else None
    params = CraftyParams(args.sigma_emission, args.sigma_transition, args.kappa_self, args.alpha)
    hmm = build_hmm(graph, env, compute_idf(env), params)
    out = []
    for i, t in enumerate(_trajectories(args.trajectories, graph)):
        inst = generate(graph, env, t, _seeded(args.seed, i), params, templates, hmm)
        out.append(inst.to_record())
    emit(args, out)
    return EXIT_OK


def cmd_metrics(args) -> int:
    graph = load_graph(args.graph)
    refs = {t.id: t for t in _trajectories(args.ref, graph)}
    params = MetricParams(args.threshold)
    out = []
    for hyp in _trajectories(args.hyp, graph):
        if hyp.id not in refs:
            raise CliError(f"hypothesis {hyp.id} has no reference")
        s = score_path(graph, hyp, refs[hyp.id], params)
        out.append({"id": hyp.id, "ne": s.ne, "success": s.success, "spl": s.spl,
                    "ndtw": s.ndtw, "sdtw": s.sdtw})
    emit(args, out)
    return EXIT_OK


def _load_pairs(path: str) -> list[CorpusPair]:
    return [CorpusPair.from_record(r) for r in read_jsonl(path)]


def cmd_train(args) -> int:
    config = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    graph = load_graph(args.graph)
    features = load_features(args.features)
    pairs = [p for p in _load_pairs(args.data)
             if p.provenance in (Provenance.GroundTruth, Provenance.Paraphrase)]
    if not pairs:
        raise CliError("training data has no GroundTruth or Paraphrase pairs")
    for p in pairs:
        problems = validate_trajectory(graph, p.trajectory)
        if problems:
            raise CliError(f"pair {p.id}: {'; '.join(problems)}")
    dataset = TrainingSet(graph, features, [p.as_training_pair() for p in pairs])
    result = train(dataset, config, np.random.default_rng(args.seed))
    if not args.out:
        raise CliError("train needs --out for the model file")
    save_model(result.model, args.out)
    trace = [{"step": i, "loss": loss, **parts} for i, (loss, parts) in
             enumerate(zip(result.losses, result.parts))]
    if args.trace:
        Path(args.trace).write_text("".join(json.dumps(r) + "\n" for r in trace), encoding="utf-8")
    if args.format == "table":
        last = trace[-1] if trace else {}
        print(f"trained {len(trace)} steps; final loss {last.get('loss', float('nan')):.4f}; "
              f"model written to {args.out}")
    return EXIT_OK


def cmd_score(args) -> int:
    model = load_model(args.model)
    graph = load_graph(args.graph)
    views = FeatureCache(graph, load_features(args.features))
    pairs = _load_pairs(args.pairs)
    scores = score_corpus(model, pairs, views, workers=args.workers)
    out = []
    for p, s in zip(pairs, scores):
        rec = {"id": p.id, "score": float(s)}
        if p.label is not None:
            rec["label"] = p.label
        out.append(rec)
    emit(args, out)
    return EXIT_OK


def _read_scores(path: str) -> list[dict]:
    recs = read_jsonl(path)
    for r in recs:
        if "id" not in r or "score" not in r:
            raise CliError("score records need 'id' and 'score'")
    return recs


def cmd_auc(args) -> int:
    recs = _read_scores(args.scores)
    data = [ScoredLabel(str(r["id"]), float(r["score"]), int(r["label"])) for r in recs if "label" in r]
    value = auc(data)
    n_pos = sum(d.label == 1 for d in data)
    emit(args, [{"auc": value, "n_pos": n_pos, "n_neg": len(data) - n_pos}])
    return EXIT_OK


def cmd_correlate(args) -> int:
    scores = {str(r["id"]): float(r["score"]) for r in _read_scores(args.scores)}
    outcomes = read_jsonl(args.outcomes)
    levels = ("system", "instance") if args.level == "both" else (args.level,)
    names = tuple(args.outcome_names.split(","))
    rows = correlation_report(scores, outcomes, args.bootstrap, args.ci_level,
                              np.random.default_rng(args.seed), names, levels)
    emit(args, [r.to_record() for r in rows], render_correlation_table(rows))
    return EXIT_OK


def cmd_filter(args) -> int:
    scores = {str(r["id"]): float(r["score"]) for r in _read_scores(args.scores)}
    ranked = rank_and_filter(scores, args.fraction)
    emit(args, ranked.records())
    return EXIT_OK


def cmd_build_corpus(args) -> int:
    graph = load_graph(args.graph)
    trajs = _trajectories(args.trajectories, graph)
    records = read_jsonl(args.instructions)
    insts = [Instruction.from_record(r) for r in records]
    links = {str(r["id"]): str(r["trajectory_id"]) for r in records if "trajectory_id" in r}
    positives = pair_positives(insts, trajs, links)
    paraphrases = []
    if args.paraphrases:
        for r in read_jsonl(args.paraphrases):
            paraphrases.append((str(r["source_id"]), Instruction.from_record(r)))
    manifest = Manifest(args.seed)
    config = CorpusConfig(negatives=not args.no_negatives)
    corpus = list(build_training_corpus(positives, graph, config, np.random.default_rng(args.seed),
                                        paraphrases, manifest))
    emit(args, [p.to_record() for p in corpus],
         _table([{"provenance": k, "count": v} for k, v in manifest.to_dict()["counts"].items()]))
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("jsonl", "table"), default="jsonl")

    parser = argparse.ArgumentParser(prog="navcompat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("perturb-path", cmd_perturb_path, "trajectory perturbations")
    p.add_argument("--graph", required=True)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--method", choices=[k.value for k in PathPerturbKind] + ["mixed"], default="mixed")
    p.add_argument("--skip-unsatisfiable", action="store_true")

    p = add("perturb-text", cmd_perturb_text, "instruction perturbations")
    p.add_argument("--instructions", required=True)
    p.add_argument("--method", choices=[k.value for k in TextPerturbKind] + ["mixed"], default="mixed")
    p.add_argument("--skip-unsatisfiable", action="store_true")

    p = add("crafty", cmd_crafty, "template instruction generation")
    p.add_argument("--graph", required=True)
    p.add_argument("--objects", required=True)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--templates", default=None)
    defaults = CraftyParams()
    p.add_argument("--sigma-emission", type=float, default=defaults.sigma_emission)
    p.add_argument("--sigma-transition", type=float, default=defaults.sigma_transition)
    p.add_argument("--kappa-self", type=float, default=defaults.kappa_self)
    p.add_argument("--alpha", type=float, default=defaults.alpha)

    p = add("metrics", cmd_metrics, "path metrics per id")
    p.add_argument("--graph", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--threshold", type=float, default=MetricParams().success_threshold)

    p = add("train", cmd_train, "train a compatibility model")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--trace", default=None, help="write per-step losses as JSONL")

    p = add("score", cmd_score, "score instruction/trajectory pairs")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--workers", type=int, default=1)

    p = add("auc", cmd_auc, "ROC AUC of labeled scores")
    p.add_argument("--scores", required=True)

    p = add("correlate", cmd_correlate, "Kendall tau-b against human outcomes")
    p.add_argument("--scores", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--level", choices=("system", "instance", "both"), default="both")
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--ci-level", type=float, default=0.90)
    p.add_argument("--outcome-names", default="ne,sr,spl,quality")

    p = add("filter", cmd_filter, "keep the top fraction by score")
    p.add_argument("--scores", required=True)
    p.add_argument("--fraction", type=float, required=True)

    p = add("build-corpus", cmd_build_corpus, "positives, paraphrases and mined negatives")
    p.add_argument("--graph", required=True)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--instructions", required=True)
    p.add_argument("--paraphrases", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--no-negatives", action="store_true")
    return parser


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except UnsatisfiablePerturbation as exc:
        print(f"unsatisfiable: {exc}", file=sys.stderr)
        return EXIT_UNSAT
    except (NumericError, FloatingPointError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
