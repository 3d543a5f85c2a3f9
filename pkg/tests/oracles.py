"""Independent per-cell reference implementations used by several test files."""
import math

import numpy as np

from fishingnet.grid import OrientedBox, SemClass

PRIORITY = {0: 3, 1: 2, 2: 1}


def softmax_last(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def random_probs(rng, n_mod, rows=16, cols=16, horizons=5):
    """Per-modality (rows, cols, 3, T) softmax arrays."""
    logits = rng.normal(size=(n_mod, rows, cols, horizons, 3)) * 2
    return [np.moveaxis(softmax_last(logits[m]), -1, 2) for m in range(n_mod)]


def first_argmax(vec):
    best = 0
    for i in range(1, len(vec)):
        if vec[i] > vec[best]:
            best = i
    return best


def priority_pool_cell(vectors, priority=PRIORITY):
    votes = [first_argmax(v) for v in vectors]
    top = max(votes, key=lambda c: priority[c])
    winner = None
    for m, v in enumerate(vectors):
        if votes[m] != top:
            continue
        if winner is None or v[top] > vectors[winner][top]:
            winner = m
    return np.array(vectors[winner])


def fuse_priority_brute(arrays, priority=PRIORITY):
    rows, cols, _, horizons = arrays[0].shape
    out = np.empty_like(arrays[0])
    for r in range(rows):
        for c in range(cols):
            for t in range(horizons):
                out[r, c, :, t] = priority_pool_cell([a[r, c, :, t] for a in arrays], priority)
    return out


def fuse_average_brute(arrays):
    out = np.empty_like(arrays[0])
    for idx in np.ndindex(*arrays[0].shape):
        total = 0.0
        for a in arrays:
            total += a[idx]
        out[idx] = total / len(arrays)
    return out


def confusion_brute(pred, true, n_classes=3):
    """tp/fp/fn/tn per class for one horizon by direct cell iteration."""
    out = {k: [0] * n_classes for k in ("tp", "fp", "fn", "tn")}
    for p, t in zip(np.ravel(pred), np.ravel(true)):
        for c in range(n_classes):
            if p == c and t == c:
                out["tp"][c] += 1
            elif p == c:
                out["fp"][c] += 1
            elif t == c:
                out["fn"][c] += 1
            else:
                out["tn"][c] += 1
    return out


def metrics_brute(cm, c):
    tp, fp, fn, tn = cm["tp"][c], cm["fp"][c], cm["fn"][c], cm["tn"][c]
    div = lambda a, b: a / b if b else float("nan")  # noqa: E731
    return {"precision": div(tp, tp + fp), "recall": div(tp, tp + fn),
            "iou": div(tp, tp + fp + fn), "accuracy": div(tp + tn, tp + fp + fn + tn)}


def brute_force_labels(boxes, spec):
    """Per-cell half-plane test against each box's polygon, VRU over Vehicle."""
    out = np.full(spec.shape, int(SemClass.BACKGROUND))
    for r in range(spec.rows_x):
        for c in range(spec.cols_y):
            px = (r + 0.5) * spec.resolution - spec.origin_offset[0]
            py = (c + 0.5) * spec.resolution - spec.origin_offset[1]
            hit = set()
            for b in boxes:
                ca, sa = math.cos(b.yaw), math.sin(b.yaw)
                ex, ey = b.length / 2, b.width / 2
                poly = [(b.center[0] + ca * lx - sa * ly, b.center[1] + sa * lx + ca * ly)
                        for lx, ly in ((ex, ey), (-ex, ey), (-ex, -ey), (ex, -ey))]
                inside = True
                for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
                    if (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0) < 0:
                        inside = False
                        break
                if inside:
                    hit.add(int(b.cls))
            if hit:
                out[r, c] = min(hit)
    return out


def random_boxes(rng, n, extent):
    boxes = []
    for _ in range(n):
        cls = SemClass.VRU if rng.random() < 0.4 else SemClass.VEHICLE
        length, width = (rng.uniform(0.3, 1.2), rng.uniform(0.3, 1.0)) if cls == SemClass.VRU else \
            (rng.uniform(2, 6), rng.uniform(1.2, 2.5))
        boxes.append(OrientedBox((rng.uniform(-extent, extent), rng.uniform(-extent, extent)),
                                 length, width, rng.uniform(-math.pi, math.pi), cls))
    return boxes
