#!/usr/bin/env python3
"""Regenerates the deterministic fixtures under tests/fixtures.

    python3 tools/make_fixtures.py [out_dir]
"""
import json
import random
import sys
from pathlib import Path

CAR, BUS, TRUCK, MOTORCYCLE = 0, 1, 2, 3


def num(v):
    v = round(v, 3)
    return int(v) if v == int(v) else v


def det(frame, cls, score, box):
    return {"frame": frame, "cls": cls, "score": num(score), "box": [num(b) for b in box]}


def gt(frame, gid, cls, box):
    return {"frame": frame, "gt_id": gid, "cls": cls, "box": [num(b) for b in box]}


def write_jsonl(path, header, rows):
    with open(path, "w") as f:
        f.write(json.dumps(header, separators=(",", ":")) + "\n")
        for r in rows:
            f.write(json.dumps(r, separators=(",", ":")) + "\n")


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1)
        f.write("\n")


def rect(x0, x1, y0, y1):
    return {"vertices": [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]}


def planted(out):
    # Two vehicles over 10 frames plus two ghost detections with no ground
    # truth. The truck is missed for three frames, longer than max_time_lost,
    # so it comes back under a new id.
    out.mkdir(parents=True, exist_ok=True)
    header = {"schema": 1, "width": 640, "height": 480, "fps": 10}
    dets, gts = [], []
    for f in range(10):
        car = [100 + 12 * f, 100, 60, 40]
        truck = [460 - 12 * f, 300, 80, 60]
        gts.append(gt(f, 1, CAR, car))
        gts.append(gt(f, 2, TRUCK, truck))
        dets.append(det(f, CAR, 0.9, car))
        if f not in (4, 5, 6):
            dets.append(det(f, TRUCK, 0.88, truck))
        if f == 2:
            dets.append(det(f, CAR, 0.85, [300, 400, 50, 40]))
        if f == 6:
            dets.append(det(f, CAR, 0.8, [60, 380, 50, 40]))
    write_jsonl(out / "clip.dets.jsonl", header, dets)
    write_jsonl(out / "clip.gt.jsonl", header, gts)
    write_json(out / "params.json", {"iou_threshold": 0.45, "score_high": 0.7, "score_low": 0.1,
                                     "cosine_distance_max": 0.4, "min_hits": 1, "max_time_lost": 1,
                                     "appearance": False})
    write_json(out / "zones.json", {"finish_line": {"region": rect(180, 420, 0, 480), "dwell": 3}})
    with open(out / "expected_ledger.csv", "w") as f:
        f.write("track_id,class,frame,method\n1,car,7,finish_line\n5,truck,9,finish_line\n")


def occlusion(out):
    # A car braking to a stop while partly hidden: three frames at score 0.3.
    out.mkdir(parents=True, exist_ok=True)
    header = {"schema": 1, "width": 640, "height": 360, "fps": 30}
    xs = []
    x = 20.0
    for f in range(30):
        xs.append(x)
        if f < 14:
            x += 12
        elif f == 14:
            x += 6
        elif f == 15:
            x += 2
    dets, gts = [], []
    for f, x in enumerate(xs):
        box = [x, 200, 40, 30]
        gts.append(gt(f, 1, CAR, box))
        dets.append(det(f, CAR, 0.3 if f in (15, 16, 17) else 0.9, box))
    write_jsonl(out / "clip.dets.jsonl", header, dets)
    write_jsonl(out / "clip.gt.jsonl", header, gts)
    write_json(out / "params.json", {"iou_threshold": 0.45, "score_high": 0.7, "score_low": 0.1,
                                     "cosine_distance_max": 0.4, "min_hits": 3, "max_time_lost": 30,
                                     "appearance": False})


SIZES = {CAR: (48, 28), BUS: (96, 40), TRUCK: (80, 40), MOTORCYCLE: (24, 20)}


def traffic(out, seed=7):
    # Two opposing lanes, mixed classes, jittered boxes, short score dips and
    # the occasional missed frame.
    rng = random.Random(seed)
    out.mkdir(parents=True, exist_ok=True)
    w, h, n = 640, 360, 150
    header = {"schema": 1, "width": w, "height": h, "fps": 30}
    dets, gts = [], []
    gid = 0
    for lane, (y, sign) in enumerate([(110, 1), (230, -1)]):
        start = rng.randint(0, 5)
        while start < n - 20:
            gid += 1
            cls = rng.choice([CAR, CAR, CAR, TRUCK, BUS, MOTORCYCLE])
            bw, bh = SIZES[cls]
            speed = rng.choice([5, 6, 7])
            x = -bw + 2 if sign > 0 else w - 2
            f = start
            while f < n:
                box = [x, y + (40 - bh) / 2, bw, bh]
                if box[0] + bw <= 0 or box[0] >= w:
                    break
                gts.append(gt(f, gid, cls, box))
                roll = rng.random()
                if roll > 0.04:
                    score = rng.uniform(0.35, 0.55) if roll < 0.1 else rng.uniform(0.75, 0.97)
                    jitter = [rng.uniform(-1, 1), rng.uniform(-1, 1), 0, 0]
                    dets.append(det(f, cls, score, [b + j for b, j in zip(box, jitter)]))
                x += sign * speed
                f += 1
            # next vehicle in the lane leaves a clear gap behind this one
            start += int((bw + 60) / speed) + rng.randint(2, 12)
    dets.sort(key=lambda d: d["frame"])
    gts.sort(key=lambda g: (g["frame"], g["gt_id"]))
    write_jsonl(out / "clip.dets.jsonl", header, dets)
    write_jsonl(out / "clip.gt.jsonl", header, gts)
    write_json(out / "params.json", {"iou_threshold": 0.45, "score_high": 0.7, "score_low": 0.1,
                                     "cosine_distance_max": 0.4, "min_hits": 3, "max_time_lost": 30,
                                     "appearance": False})
    write_json(out / "zones.json", {
        "finish_line": {"region": rect(280, 360, 0, 360), "dwell": 5},
        "motion_vector": {"anchor": [150, 130], "direction_deg": 0, "distance": 200, "width": 60},
    })
    write_json(out / "mask.json", [rect(0, 640, 0, 60)])


def main():
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    planted(root / "planted")
    occlusion(root / "occlusion")
    traffic(root / "traffic")


if __name__ == "__main__":
    main()
