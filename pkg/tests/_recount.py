"""Independent per-sample recount used as the scoring oracle."""

import math

from uirft.parsing import parse_response
from uirft.geometry import smart_resize


def recount(records, tasks, protocol, resized=False, ratio=0.14):
    """``records``: list of (sample_id, text, mode). Re-derives every metric by hand."""
    by_id = {t.id: t for t in tasks}
    n = t_ok = g_ok = g_n = 0
    for sid, text, mode in records:
        t = by_id[sid]
        r = parse_response(text, mode)
        a = r.actions[0] if r.well_formed else None
        n += 1
        if a is not None and a.kind.value == t.action:
            t_ok += 1
        if t.action != "click":
            continue
        gt_point = t.point if t.point is not None else (
            None if t.bbox is None else ((t.bbox[0] + t.bbox[2]) / 2, (t.bbox[1] + t.bbox[3]) / 2)
        )
        if (protocol == "screenspot" and t.bbox is None) or (protocol == "androidcontrol" and gt_point is None):
            continue
        g_n += 1
        if a is None or a.kind.value != "click":
            continue
        p = a.coordinate if a.coordinate is not None else (
            None if a.bbox is None else ((a.bbox[0] + a.bbox[2]) / 2, (a.bbox[1] + a.bbox[3]) / 2)
        )
        if p is None:
            continue
        x, y = p
        if resized:
            rs = smart_resize(t.image_size)
            x, y = x * t.image_size.width / rs.width, y * t.image_size.height / rs.height
        if protocol == "screenspot":
            x1, y1, x2, y2 = t.bbox
            g_ok += x1 <= x <= x2 and y1 <= y <= y2
        else:
            d = math.hypot(x - gt_point[0], y - gt_point[1])
            g_ok += d <= ratio * math.hypot(t.image_size.width, t.image_size.height)
    return t_ok / n, (g_ok / g_n if g_n else 0.0), g_n


def noisy_predictions(tasks, rng, mode="think"):
    """Seeded mix of exact hits, near misses, wrong types and malformed text."""
    kinds = ["click", "scroll", "open_app", "navigate_back", "input_text"]
    out = []
    for t in tasks:
        u = rng.random()
        think = "<think>look</think>" if mode == "think" else ""
        if u < 0.1:
            text = "<answer>oops</answer>"
        elif u < 0.25:
            text = f"{think}<answer>[{{action: {kinds[int(rng.integers(5))]}}}]</answer>"
        elif t.bbox is not None:
            cx, cy = (t.bbox[0] + t.bbox[2]) / 2, (t.bbox[1] + t.bbox[3]) / 2
            jitter = rng.normal(scale=[t.bbox[2] - t.bbox[0] + 1, t.bbox[3] - t.bbox[1] + 1])
            x, y = round(cx + jitter[0]), round(cy + jitter[1])
            if rng.random() < 0.1:
                text = f"{think}<answer>[{{action: click, coordinate: [{x - 5}, {y - 5}, {x + 5}, {y + 5}]}}]</answer>"
            else:
                text = f"{think}<answer>[{{action: click, coordinate: [{x}, {y}]}}]</answer>"
        else:
            text = f"{think}<answer>[{{action: {t.action if t.action in kinds else 'scroll'}}}]</answer>"
        out.append((t.id, text, mode))
    return out
