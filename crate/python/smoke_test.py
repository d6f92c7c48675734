"""Smoke test for the pengauge Python module.

Build the extension and put it on the path first:

    cargo build --release -p pengauge-py
    cp target/release/libpengauge_py.so python/pengauge.so
    python3 python/smoke_test.py
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pengauge as pg


def check_scene_pipeline():
    scene = pg.render_scene(distance=1.0, coverage=0.33, seed=4)
    assert abs(scene.achieved_coverage - 0.33) <= 0.02, scene.achieved_coverage
    assert (scene.frame.width, scene.frame.height) == (480, 270)

    pitch = pg.estimate_pitch_px(pg.detect_mesh_centers(scene.clean_mask))
    assert abs(pg.estimate_distance(pitch) - 1.0) < 0.1, pitch
    assert pg.dice(scene.net_mask, scene.net_mask) == 1.0
    assert abs(pg.frame_coverage(scene.clean_mask, scene.net_mask) - scene.achieved_coverage) < 1e-12

    raw = scene.frame.to_bytes()
    assert len(raw) == 480 * 270 * 3
    assert pg.Image.from_bytes(480, 270, raw).get(7, 9) == scene.frame.get(7, 9)
    return scene


def check_classifier(scene):
    clf = pg.train_classifier([scene.frame], [scene.net_mask], epochs=300)
    pred = clf.predict(scene.frame)
    assert pg.dice(pred, scene.net_mask) > 0.8
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "clf.txt")
        clf.save(path)
        again = pg.PixelClassifier.load(path)
        assert again.probability((55, 55, 60)) == clf.probability((55, 55, 60))

    empty = pg.BinaryMask.from_bytes(480, 270, bytes(480 * 270))
    try:
        pg.train_classifier([scene.frame], [empty])
    except pg.PengaugeError as e:
        assert str(e).startswith("single-class"), e
    else:
        raise AssertionError("single-class training should fail")


def check_kmeans():
    two = pg.Image.from_bytes(4, 1, bytes([200, 0, 0] * 2 + [0, 0, 200] * 2))
    model = pg.kmeans(two, k=2, colorspace="rgb", seed=1)
    assert model.objective == 0.0
    assert sorted(model.pixel_counts()) == [2, 2]
    h = model.objective_history
    assert all(b <= a for a, b in zip(h, h[1:]))


def check_mission():
    m = pg.run_mission(x_max=2.0, z_min=0.5, z_max=1.0, n_vertical=2, noiseless=True)
    assert m.completed
    assert max(m.waypoint_misses()) <= 0.1
    times = m.capture_times()
    assert times, "captures expected along the transects"

    scene = pg.render_scene(distance=1.0, coverage=0.0, seed=1)
    masks = [scene.net_mask] * len(times)
    report = pg.estimate_mission(masks, times, mission=m)
    assert report["total_frames"] == len(times)
    assert report["mean_fouling"] <= 0.05, report["mean_fouling"]


def main():
    scene = check_scene_pipeline()
    check_classifier(scene)
    check_kmeans()
    check_mission()
    assert pg.pixel_classes()["cage"] >= 0
    print("pengauge python smoke test: ok")


if __name__ == "__main__":
    main()
