"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Run standalone with ``python3 tests/test_acceptance.py`` or through pytest,
where the lines are repeated in the terminal summary.
"""

import functools
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from _instances import finite_difference, relative_error, surrogate_instance  # noqa: E402
from _recount import noisy_predictions, recount  # noqa: E402
from uirft.config import RunConfig  # noqa: E402
from uirft.evaluation import Prediction, score  # noqa: E402
from uirft.geometry import BBox, ImageSize, Point, ResizePolicy, iou, scale_coordinates, smart_resize  # noqa: E402
from uirft.grpo import compute_advantages, grpo_value_and_grad  # noqa: E402
from uirft.parsing import Mode, parse_response  # noqa: E402
from uirft.rewards import (  # noqa: E402
    BudgetStats,
    CoordinateVariant,
    RewardConfig,
    action_type_reward,
    coordinate_reward,
    format_reward,
    length_reward,
    token_length_budget,
    total_reward,
)
from uirft.selection import PolicyOracle, SelectionConfig, run_pipeline  # noqa: E402
from uirft.tasks import TaskSample, dumps_jsonl  # noqa: E402
from uirft.toygym import (  # noqa: E402
    SurrogatePolicy,
    TaskConfig,
    action_histogram,
    click_suite,
    evaluate_policy,
    generate_tasks,
    train_stages,
    weak_policy,
)
from uirft.parsing import ActionType  # noqa: E402

RESULTS: list[str] = []
SEEDS = range(5)


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_1_advantages():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_mean = worst_std = worst_inv = 0.0
    nonzero_constant = 0
    for _ in range(1000):
        n = int(rng.integers(2, 17))
        r = rng.normal(size=n) * rng.uniform(0.1, 10) if rng.random() < 0.9 else np.full(n, rng.normal())
        if rng.random() < 0.3:
            r = np.round(r)  # ties and all-equal groups
        a = compute_advantages(r)
        worst_mean = max(worst_mean, abs(a.mean()))
        if np.ptp(r) == 0:
            nonzero_constant += bool(np.any(a))
        else:
            worst_std = max(worst_std, abs(a.std() - 1))
            shifted = compute_advantages(r + rng.normal() * 10)
            scaled = compute_advantages(r * rng.uniform(0.01, 100))
            worst_inv = max(worst_inv, np.abs(shifted - a).max(), np.abs(scaled - a).max())
    dt = time.perf_counter() - t0
    ok = worst_mean < 1e-9 and worst_std < 1e-9 and worst_inv < 1e-9 and nonzero_constant == 0 and dt < 1.0
    report(1, ok, f"|mean| {worst_mean:.1e}, |std-1| {worst_std:.1e}, invariance {worst_inv:.1e}, {nonzero_constant} constant groups with nonzero advantage, {dt:.2f}s (<1s)")


def test_criterion_2_gradient_fidelity():
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    worst = {0.0: 0.0, 0.04: 0.0}
    for beta in worst:
        for _ in range(100):
            params, ref, groups, hyper, temp = surrogate_instance(rng, beta)
            g = grpo_value_and_grad(groups, hyper, params, ref, temp).grad
            worst[beta] = max(worst[beta], relative_error(g, finite_difference(params, ref, groups, hyper, temp, h=1e-6)))
    dt = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-5 and dt < 30
    report(2, ok, f"max rel. err beta=0 {worst[0.0]:.1e}, beta=0.04 {worst[0.04]:.1e} over 2x100 instances, {dt:.1f}s (<30s)")


def test_criterion_3_reward_suite():
    checks = []
    checks.append(action_type_reward(ActionType.CLICK, ActionType.CLICK) == 1)
    checks.append(action_type_reward(ActionType.SCROLL, ActionType.CLICK) == 0)
    checks.append(action_type_reward(ActionType.INPUT_TEXT, ActionType.INPUT_TEXT) == 1)
    box = BBox(0, 0, 100, 100)
    checks.append(coordinate_reward(Point(50, 50), box) == 1)
    checks.append(coordinate_reward(Point(150, 50), box) == 0)
    checks.append(abs(iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) - 1 / 3) < 1e-15)
    checks.append(coordinate_reward(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10), CoordinateVariant.IOU_THRESHOLD, 0.5) == 0)
    good = "<think>find icon</think><answer>[{action: click, coordinate: [50, 50]}]</answer>"
    checks.append(format_reward(good, Mode.THINK) == 1)
    checks.append(format_reward("<answer>[{action: scroll}]</answer>", Mode.THINK) == 0)
    checks.append(format_reward("<answer>[{action: scroll}]</answer>", Mode.NOTHINK) == 1)
    checks.append(token_length_budget([100] * 4 + [900] * 4, [True] * 4 + [False] * 4, 1024).budget == 562)
    checks.append(token_length_budget([100] * 8, [True] * 8, 1024).budget == 100)
    checks.append(token_length_budget([3, 4], [False, False], 1024).budget == 1024)
    checks.append(length_reward(300, 300, True) == 0.5)
    checks.append(abs(length_reward(600, 300, True) - 0.1) < 1e-15)
    checks.append(abs(length_reward(150, 300, False) + 0.55) < 1e-15)
    checks.append(length_reward(330, 300, False) == -0.1)
    sample = TaskSample("c", "mobile", ImageSize(1000, 1000), "Click the cart icon", "click", bbox=box)
    resp = parse_response(good)
    checks.append(total_reward(sample, resp, None, RewardConfig()).total == 3)
    stats = BudgetStats(1, 1, resp.token_length, resp.token_length)
    checks.append(total_reward(sample, resp, stats, RewardConfig(dast_enabled=True)).total == 3.5)
    checks.append(total_reward(sample, parse_response("<think>x"), None, RewardConfig()).total == 0)
    n_examples = len(checks)
    examples_ok = all(checks)

    rng = np.random.default_rng(5)
    violations = 0
    for _ in range(10_000):
        budget = float(rng.uniform(1, 2048))
        l1, l2 = sorted(rng.integers(0, 4096, size=2))
        violations += length_reward(l1, budget, True) < length_reward(l2, budget, True)
        violations += length_reward(l1, budget, False) > length_reward(l2, budget, False)
        violations += not length_reward(l1, budget, True) > length_reward(l1, budget, False)
    ok = examples_ok and violations == 0
    report(3, ok, f"{sum(checks)}/{n_examples} reward examples exact; {violations} DAST property violations in 10,000 draws")


@functools.lru_cache(maxsize=None)
def _click_suite(seed):
    return tuple(generate_tasks(seed, 64, click_suite()))


@functools.lru_cache(maxsize=None)
def _think_baseline(seed):
    cfg = RunConfig()
    tasks = list(_click_suite(seed))
    base = SurrogatePolicy.base_model(tasks)
    t0 = time.perf_counter()
    trained, _ = train_stages(base, tasks, ["think"], cfg.hyper(), cfg.num_train_epochs, seed=seed)
    dt = time.perf_counter() - t0
    return evaluate_policy(base, tasks).accuracy, evaluate_policy(trained, tasks).accuracy, dt


def test_criterion_4_convergence():
    runs = [_think_baseline(s) for s in SEEDS]
    before = [r[0] for r in runs]
    after = [r[1] for r in runs]
    total = sum(r[2] for r in runs)
    good = sum(a >= 0.9 for a in after)
    ok = max(before) <= 0.2 and good >= 4 and total < 300
    report(
        4,
        ok,
        f"greedy grounding {', '.join(f'{b:.2f}->{a:.2f}' for b, a in zip(before, after))}; "
        f"{good}/5 seeds >= 0.90; {total:.1f}s (<300s)",
    )


def test_criterion_5_two_stage_recipe():
    cfg = RunConfig()
    two_acc, think_tokens, prompted = [], [], []
    for seed in SEEDS:
        tasks = list(_click_suite(seed))
        pol, _ = train_stages(SurrogatePolicy.base_model(tasks), tasks, ["dast", "nothink"], cfg.hyper(), 4, seed=seed)
        ev = evaluate_policy(pol, tasks, Mode.NOTHINK)
        two_acc.append(ev.accuracy)
        think_tokens.append(ev.mean_think_length)
        prompted.append(evaluate_policy(pol, tasks, Mode.THINK).mean_think_length)
    base = [_think_baseline(s)[1] for s in SEEDS]
    per_seed = f"{sum(a >= b for a, b in zip(two_acc, base))}/5 at or above"
    ok = max(think_tokens) == 0 and np.mean(two_acc) >= np.mean(base)
    report(
        5,
        ok,
        f"NOTHINK-format think tokens {np.mean(think_tokens):.1f}; mean accuracy {np.mean(two_acc):.3f} (DAST->NOTHINK) vs "
        f"{np.mean(base):.3f} (THINK only), seeds {per_seed}; under a THINK prompt the think head still emits "
        f"{np.mean(prompted):.1f} tokens (not met in that reading)",
    )


def test_criterion_6_resize_and_rescale():
    pol = ResizePolicy(factor=28, max_pixels=12845056)
    resize_ok = [
        smart_resize(ImageSize(2800, 2800), pol) == ImageSize(2800, 2800),
        smart_resize(ImageSize(5600, 5600), pol) == ImageSize(3584, 3584),
        smart_resize(ImageSize(1179, 2556), pol) == ImageSize(1176, 2548),
    ]
    scale_ok = [
        scale_coordinates(Point(100, 200), ImageSize(1176, 2548), pol) == Point(100, 200),
        scale_coordinates(Point(1792, 1792), ImageSize(5600, 5600), pol) == Point(2800, 2800),
        scale_coordinates(Point(0, 0), ImageSize(1080, 2400), pol) == Point(0, 0),
    ]
    ok = all(resize_ok) and all(scale_ok)
    report(6, ok, f"smart_resize {sum(resize_ok)}/3, scale_coordinates {sum(scale_ok)}/3 exact")


def test_criterion_7_selection():
    corpus = generate_tasks(2024, 1000, TaskConfig(noise_fraction=0.05))

    def run():
        oracle = PolicyOracle.from_policy(weak_policy(corpus, seed=2024))
        selected, rep = run_pipeline(corpus, SelectionConfig(seed=2024), oracle)
        return dumps_jsonl(t.to_dict() for t in selected) + rep.to_json(), selected

    a, selected = run()
    b, _ = run()
    hist = action_histogram(selected)
    want = {"click": 101, "scroll": 5, "input_text": 2, "navigate_back": 9, "open_app": 19}
    ok = a == b and hist == want and len(selected) == 136
    shown = ", ".join(f"{k} {hist.get(k, 0)}" for k in want)
    report(7, ok, f"byte-identical reruns: {a == b}; histogram {shown}; total {len(selected)}")


def test_criterion_8_eval_recount():
    rng = np.random.default_rng(8)
    tasks = generate_tasks(8, 1000, TaskConfig(platforms={"mobile": 2, "desktop": 1, "web": 1}))
    records = noisy_predictions(tasks, rng)
    preds = [Prediction.from_text(sid, text, mode) for sid, text, mode in records]
    details, ok = [], True
    for protocol in ("screenspot", "androidcontrol"):
        rep = score(preds, tasks, protocol)
        t_acc, g_acc, g_n = recount(records, tasks, protocol)
        same = rep.type_accuracy == t_acc and rep.grounding_accuracy == g_acc and rep.counts["grounding_evaluated"] == g_n
        ok &= same
        details.append(f"{protocol} type {rep.type_accuracy:.3f} grounding {rep.grounding_accuracy:.3f} {'==' if same else '!='} recount")
    report(8, ok, "; ".join(details) + " (1,000 predictions)")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
