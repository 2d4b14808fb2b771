"""``uirft`` command line: generate, select, train, score and evaluate."""

from __future__ import annotations

import argparse
import json
import sys
from collections import defaultdict

from . import __version__, kernels
from .config import RunConfig, load_config
from .evaluation import PROTOCOLS, Prediction, ScoringContext, format_report_table, load_predictions, report_json, score
from .parsing import Mode, parse_response
from .rewards import CoordinateSpace, CoordinateVariant, RewardConfig, score_group
from .selection import DEFAULT_QUOTAS, InfeasibleSelection, PolicyOracle, SelectionConfig, Strategy, run_pipeline
from .tasks import atomic_write, dumps_jsonl, iter_jsonl, load_tasks, save_tasks
from .toygym import SurrogatePolicy, TaskConfig, action_histogram, generate_tasks, train_stages, weak_policy
from .toygym.train import STAGES

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pairs(items, what: str) -> dict[str, str]:
    out = {}
    for item in items or []:
        for part in item.split(","):
            key, sep, value = part.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{what} entries look like key=value, got {part!r}")
            out[key.strip()] = value.strip()
    return out


def _floats(pairs: dict[str, str], what: str) -> dict[str, float]:
    try:
        return {k: float(v) for k, v in pairs.items()}
    except ValueError as exc:
        raise UsageError(f"{what}: {exc}") from None


def _config(args) -> RunConfig:
    overrides = _pairs(getattr(args, "set", None), "--set")
    return load_config(getattr(args, "config", None), **overrides)


# commands ---------------------------------------------------------------


def cmd_gen_tasks(args) -> int:
    kw = {"grid": args.grid, "hard_fraction": args.hard_fraction, "noise_fraction": args.noise_fraction}
    if args.mixture:
        kw["mixture"] = _floats(_pairs(args.mixture, "--mixture"), "--mixture")
    if args.platforms:
        kw["platforms"] = _floats(_pairs(args.platforms, "--platforms"), "--platforms")
    tasks = generate_tasks(args.seed, args.count, TaskConfig(**kw))
    save_tasks(args.out, tasks)
    for k, v in sorted(action_histogram(tasks).items()):
        print(f"{k:<14} {v}")
    print(f"{'total':<14} {len(tasks)}")
    return EXIT_OK


def cmd_select(args) -> int:
    corpus = load_tasks(args.corpus)
    quotas = dict(DEFAULT_QUOTAS)
    if args.quota:
        try:
            quotas = {k: int(v) for k, v in _pairs(args.quota, "--quota").items()}
        except ValueError as exc:
            raise UsageError(f"--quota: {exc}") from None
    strategy = Strategy.TOP_K if args.strategy == "top_k" else Strategy(args.strategy)
    cfg = SelectionConfig(strategy=strategy, k=args.k, quotas=quotas, target=args.target, seed=args.seed)
    if args.oracle_checkpoint:
        oracle_policy = SurrogatePolicy.load(args.oracle_checkpoint)
    else:
        oracle_policy = weak_policy(corpus, seed=args.oracle_seed, skill=args.oracle_skill) if corpus else None
    oracle = PolicyOracle.from_policy(oracle_policy, args.mode) if oracle_policy is not None else None
    selected, report = run_pipeline(corpus, cfg, oracle)
    save_tasks(args.out, selected)
    if args.report:
        atomic_write(args.report, report.to_json())
    for st in report.stages:
        print(f"{st['stage']:<10} {st['in']:>6} -> {st['out']:<6}")
    for k, v in report.composition.items():
        print(f"  {k:<22} {v}")
    return EXIT_OK


def _init_policy(init: str, tasks, cfg: RunConfig) -> SurrogatePolicy:
    if init == "base":
        return SurrogatePolicy.base_model(tasks, grid=cfg.grid, temperature=cfg.temperature, resize=cfg.resize())
    if init == "uniform":
        return SurrogatePolicy.create([t.id for t in tasks], grid=cfg.grid, temperature=cfg.temperature, resize=cfg.resize())
    return SurrogatePolicy.load(init)


def cmd_train(args) -> int:
    cfg = _config(args)
    tasks = load_tasks(args.tasks)
    if not tasks:
        raise ValueError(f"{args.tasks}: no tasks")
    if args.stage:
        stages = [s for item in args.stage for s in item.split(",") if s]
    elif cfg.dast:
        stages = ["dast"]
    else:
        stages = [cfg.mode]
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise UsageError(f"unknown stage(s) {bad}; choose from {sorted(STAGES)}")
    epochs = cfg.num_train_epochs if args.epochs is None else args.epochs
    if epochs < 0:
        raise UsageError("--epochs must be >= 0")
    policy = _init_policy(args.init, tasks, cfg)
    overrides = {**cfg.reward_overrides(), "resize": policy.resize}
    policy, trace = train_stages(policy, tasks, stages, cfg.hyper(), epochs, seed=cfg.seed, **overrides)
    policy.save(args.out)
    if args.trace:
        atomic_write(args.trace, dumps_jsonl(trace))
    if trace:
        last = trace[-len(tasks):]
        acc = sum(r["accuracy"] for r in last) / len(last)
        print(f"stages={','.join(stages)} epochs={epochs} steps={len(trace)} last-epoch rollout accuracy={acc:.3f}")
    else:
        print(f"stages={','.join(stages)} epochs={epochs} steps=0")
    return EXIT_OK


def cmd_reward(args) -> int:
    tasks = {t.id: t for t in load_tasks(args.tasks)}
    mode = Mode(args.mode)
    cfg = RewardConfig(
        mode=mode,
        coordinate_variant=CoordinateVariant(args.variant),
        iou_threshold=args.iou_threshold,
        dast_enabled=args.dast,
        max_length=args.max_length,
        coordinate_space=CoordinateSpace(args.coordinate_space),
    )
    groups: dict[str, list[tuple[int, str]]] = defaultdict(list)
    unknown = []
    for i, rec in enumerate(iter_jsonl(args.responses)):
        if "sample_id" not in rec or "response_text" not in rec:
            raise ValueError(f"response record {i} needs sample_id and response_text")
        sid = str(rec["sample_id"])
        if sid not in tasks:
            unknown.append(sid)
        groups[sid].append((i, rec["response_text"]))
    if unknown:
        raise ValueError(f"responses reference unknown sample ids: {sorted(set(unknown))}")
    rows = []
    for sid in groups:
        items = groups[sid]
        parsed = [parse_response(text, mode) for _, text in items]
        for (line, _), b in zip(items, score_group(tasks[sid], parsed, cfg)):
            rec = b.to_record(sid, line)
            if not args.dast:
                rec.pop("r_length", None)
            rows.append((line, rec))
    rows.sort(key=lambda r: r[0])
    text = dumps_jsonl(r for _, r in rows)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    if bool(args.predictions) == bool(args.checkpoint):
        raise UsageError("give exactly one of --predictions or --checkpoint")
    tasks = load_tasks(args.tasks)
    if args.predictions:
        preds, ctx = load_predictions(args.predictions, args.mode)
    else:
        policy = SurrogatePolicy.load(args.checkpoint)
        texts = [(t.id, policy.greedy(t, args.mode).text) for t in tasks]
        preds = [Prediction.from_text(sid, text, args.mode) for sid, text in texts]
        ctx = ScoringContext(CoordinateSpace.RESIZED, policy.resize)
        if args.write_predictions:
            header = {"header": {"coordinate_space": "resized", "mode": Mode(args.mode).value,
                                 "max_pixels": policy.resize.max_pixels, "factor": policy.resize.factor}}
            body = [{"sample_id": sid, "response_text": text} for sid, text in texts]
            atomic_write(args.write_predictions, dumps_jsonl([header, *body]))
    report = score(preds, tasks, args.protocol, ctx)
    if args.out:
        atomic_write(args.out, report_json(report))
    print(report.table())
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.report, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{args.report}: invalid JSON ({exc.msg})") from None
    if "protocol" not in data:
        raise ValueError(f"{args.report}: not a metric report")
    print(format_report_table(data))
    return EXIT_OK


def cmd_dump_config(args) -> int:
    sys.stdout.write(_config(args).dumps())
    return EXIT_OK


# parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = Parser(prog="uirft", description="Rule-based GRPO fine-tuning toolkit for GUI action prediction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} (kernels: {kernels.BACKEND})")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=Parser)
    sub.required = True

    g = sub.add_parser("gen-tasks", help="write a seeded synthetic task file")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--mixture", action="append", help="action weights, e.g. click=1.0,scroll=0.2")
    g.add_argument("--platforms", action="append", help="platform weights, e.g. mobile=1,web=1")
    g.add_argument("--grid", type=int, default=16)
    g.add_argument("--hard-fraction", type=float, default=0.25)
    g.add_argument("--noise-fraction", type=float, default=0.0)
    g.set_defaults(func=cmd_gen_tasks)

    s = sub.add_parser("select", help="quality, difficulty and diversity selection")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--report", help="provenance report (JSON)")
    s.add_argument("--strategy", choices=["failure_only", "top_k", "top_k_reasoning_length"], default="failure_only")
    s.add_argument("--k", type=int, default=64)
    s.add_argument("--target", type=int, default=136)
    s.add_argument("--quota", action="append", help="stratum minima, e.g. click=101,scroll=5")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=[m.value for m in Mode], default="think")
    s.add_argument("--oracle-checkpoint", help="policy checkpoint used as difficulty oracle")
    s.add_argument("--oracle-seed", type=int, default=0, help="seed of the built-in weak oracle")
    s.add_argument("--oracle-skill", type=float, default=0.5)
    s.set_defaults(func=cmd_select)

    t = sub.add_parser("train", help="GRPO training of the surrogate policy")
    t.add_argument("--tasks", required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--trace", help="per-step trace (JSONL)")
    t.add_argument("--stage", action="append", help="stage(s) in order: think, dast, nothink")
    t.add_argument("--epochs", type=int, help="epochs per stage (default: num_train_epochs)")
    t.add_argument("--init", default="base", help="'base', 'uniform' or a checkpoint path")
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--set", action="append", help="config override, e.g. learning_rate=20")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("reward", help="score a responses file and emit reward breakdowns")
    r.add_argument("--tasks", required=True)
    r.add_argument("--responses", required=True)
    r.add_argument("--out")
    r.add_argument("--mode", choices=[m.value for m in Mode], default="think")
    r.add_argument("--variant", choices=[v.value for v in CoordinateVariant], default="point_in_box")
    r.add_argument("--iou-threshold", type=float, default=0.5)
    r.add_argument("--dast", action="store_true", help="add the length reward; groups are formed by sample_id")
    r.add_argument("--max-length", type=int, default=1024)
    r.add_argument("--coordinate-space", choices=[c.value for c in CoordinateSpace], default="original")
    r.set_defaults(func=cmd_reward)

    e = sub.add_parser("eval", help="score predictions or a checkpoint")
    e.add_argument("--tasks", required=True)
    e.add_argument("--predictions")
    e.add_argument("--checkpoint")
    e.add_argument("--write-predictions", help="with --checkpoint: save the decoded predictions")
    e.add_argument("--protocol", choices=PROTOCOLS, default="screenspot")
    e.add_argument("--mode", choices=[m.value for m in Mode], default="think")
    e.add_argument("--out", help="report (JSON)")
    e.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", help="print a saved metric report as a table")
    rp.add_argument("report")
    rp.set_defaults(func=cmd_report)

    d = sub.add_parser("dump-config", help="print the effective run configuration")
    d.add_argument("--config")
    d.add_argument("--set", action="append")
    d.set_defaults(func=cmd_dump_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"uirft: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleSelection as exc:
        print(f"uirft: infeasible selection: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"uirft: error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
