import math

import numpy as np
import pytest

from fishingnet.grid import GridSpec, OrientedBox, SemClass, rasterize_labels
from fishingnet.metrics import (ConfusionCounts, accuracy, all_metrics, confusion, horizon_curves, horizon_table,
                                iou, precision, read_horizon_csv, recall, summary_table, write_horizon_csv,
                                write_summary_csv)
from fishingnet.sim.sample import build_sample
from fishingnet.sim.scene import SceneConfig, generate_scene
from oracles import confusion_brute, metrics_brute


def counts_of(tp, fp, fn, tn=0):
    c = ConfusionCounts.zeros(1)
    c.tp[0, 1], c.fp[0, 1], c.fn[0, 1], c.tn[0, 1] = tp, fp, fn, tn
    return c


def test_arithmetic_examples():
    c = counts_of(1, 0, 0)
    assert precision(c)[0, 1] == recall(c)[0, 1] == iou(c)[0, 1] == 1.0
    c = counts_of(1, 1, 2)
    assert precision(c)[0, 1] == 0.5
    assert recall(c)[0, 1] == pytest.approx(1 / 3)
    assert iou(c)[0, 1] == 0.25


def test_absent_class_is_undefined():
    pred = np.full((5, 4, 4), 2)
    c = confusion(pred, pred)
    assert np.isnan(recall(c)[:, 0]).all() and np.isnan(precision(c)[:, 0]).all()
    assert np.isnan(iou(c)[:, 0]).all()
    assert (accuracy(c)[:, 0] == 1).all()


def test_counts_sum_to_cells(rng):
    p, t = rng.integers(0, 3, (3, 5, 6, 7)), rng.integers(0, 3, (3, 5, 6, 7))
    c = confusion(p, t)
    assert (c.total == 3 * 6 * 7).all()


def test_matches_brute_force(rng):
    for _ in range(50):
        shape = (5, int(rng.integers(1, 8)), int(rng.integers(1, 8)))
        # skewed class draws so some classes go missing now and then
        probs = rng.dirichlet(np.ones(3) * 0.5)
        p, t = rng.choice(3, size=shape, p=probs), rng.choice(3, size=shape, p=probs)
        c = confusion(p, t)
        m = all_metrics(c)
        for h in range(5):
            cm = confusion_brute(p[h], t[h])
            for k in ("tp", "fp", "fn", "tn"):
                assert getattr(c, k)[h].tolist() == cm[k]
            for cls in range(3):
                for name, val in metrics_brute(cm, cls).items():
                    got = m[name][h, cls]
                    assert (np.isnan(val) and np.isnan(got)) or got == val


def test_accuracy_at_least_iou(rng):
    for _ in range(30):
        p, t = rng.integers(0, 3, (5, 6, 6)), rng.integers(0, 3, (5, 6, 6))
        c = confusion(p, t)
        a, i = accuracy(c), iou(c)
        ok = ~np.isnan(i)
        assert (a[ok] >= i[ok]).all()


def test_micro_aggregation(rng):
    p, t = rng.integers(0, 3, (6, 5, 4, 4)), rng.integers(0, 3, (6, 5, 4, 4))
    summed = ConfusionCounts.zeros()
    for n in range(6):
        summed = summed + confusion(p[n], t[n])
    whole = confusion(p, t)
    for k in ("tp", "fp", "fn", "tn"):
        np.testing.assert_array_equal(getattr(summed, k), getattr(whole, k))
    # differs from averaging per-sample ratios in general
    np.testing.assert_array_equal(iou(summed), iou(whole))


def test_identity_scores_one(rng):
    t = rng.integers(0, 3, (4, 5, 8, 8))
    for vals in all_metrics(confusion(t, t)).values():
        assert (vals[~np.isnan(vals)] == 1).all()


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        confusion(np.zeros((5, 2, 2)), np.zeros((5, 2, 3)))
    with pytest.raises(ValueError):
        confusion(np.zeros((2, 2)), np.zeros((2, 2)))


def test_csv_round_trip_and_empty_fields(tmp_path):
    pred = np.full((5, 4, 4), 2)
    pred[:, 0, 0] = 1
    truth = np.full((5, 4, 4), 2)
    counts = {"lidar": confusion(pred, truth)}
    rows = horizon_table(counts)
    assert len(rows) == 3 * 4 * 5
    write_horizon_csv(rows, tmp_path / "h.csv")
    text = (tmp_path / "h.csv").read_text()
    assert text.splitlines()[0] == "predictor,class,metric,horizon_s,value"
    assert "lidar,vru,recall,0.0,\n" in text
    back = read_horizon_csv(tmp_path / "h.csv")
    for a, b in zip(rows, back):
        assert a["predictor"] == b["predictor"] and a["horizon_s"] == b["horizon_s"]
        assert (np.isnan(a["value"]) and np.isnan(b["value"])) or a["value"] == pytest.approx(b["value"], abs=1e-6)


def test_summary_table_layout(tmp_path, rng):
    t = rng.integers(0, 3, (5, 4, 4))
    counts = {"lidar": confusion(t, t), "Average": confusion(t, t), "Pool": confusion(t, t)}
    header, body = summary_table(counts)
    assert header == ["class", "metric", "lidar", "Average", "Pool"]
    assert len(body) == 12
    write_summary_csv(counts, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "class,metric,lidar,Average,Pool"


def test_horizon_curves_writes_outputs(tmp_path, rng):
    t = rng.integers(0, 3, (5, 6, 6))
    rows, paths = horizon_curves({"identity": confusion(t, t)}, tmp_path)
    assert (tmp_path / "horizon_metrics.csv").exists()
    assert sorted(p.name for p in paths[1:]) == sorted(f"horizon_{m}.png" for m in
                                                       ("precision", "recall", "iou", "accuracy"))
    _, again = horizon_curves({"identity": confusion(t, t)}, tmp_path / "b")
    for a, b in zip(paths, again):
        assert a.read_bytes() == b.read_bytes()


def persistence(labels):
    return np.repeat(labels[:1], len(labels), axis=0)


def test_persistence_flat_on_static_scene():
    spec = GridSpec(32, 48, 0.5)
    cfg = SceneConfig(vehicle_speed=(0.0, 0.0), vru_speed=(0.0, 0.0), ego_mode="static")
    for seed in range(5):
        labels = build_sample(generate_scene(cfg, seed), spec).labels.astype(int)
        m = all_metrics(confusion(persistence(labels), labels))
        for vals in m.values():
            for cls in range(3):
                col = vals[:, cls]
                assert np.all(np.isnan(col)) or np.all(col == col[0])


@pytest.mark.parametrize("speed,heading", [(2.0, 0.0), (4.0, 0.7), (8.0, 2.5), (6.0, -1.2)])
def test_persistence_recall_decays_on_moving_scene(speed, heading):
    spec = GridSpec(128, 128, 0.25)
    frames = []
    for k in range(5):
        t = 0.5 * k
        veh = OrientedBox((-3 + speed * t * math.cos(heading), 1 + speed * t * math.sin(heading)),
                          4.0, 2.0, heading, SemClass.VEHICLE)
        ped = OrientedBox((3 + 1.4 * t * math.cos(heading + 1), -2 + 1.4 * t * math.sin(heading + 1)),
                          0.8, 0.8, heading + 1, SemClass.VRU)
        frames.append(rasterize_labels([veh, ped], spec))
    labels = np.stack(frames)
    r = recall(confusion(persistence(labels), labels))
    for cls in (0, 1):
        assert r[0, cls] == 1.0
        assert (np.diff(r[:, cls]) <= 0).all()
        assert r[-1, cls] < 1.0
