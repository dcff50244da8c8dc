#!/usr/bin/env python3
"""Brute-force recomputation of the eval report from raw session CSVs.

Usage: eval_oracle.py SESSIONS_DIR TRACK_JSON [AREA_SAMPLES]

Prints `condition,metric,mean,std` rows. Written without reference to the
Rust implementation: full Frechet table, bisection-based resampling and
math.fsum everywhere.
"""
import bisect
import csv
import json
import math
import os
import sys


def load_sessions(d):
    out = []
    for name in sorted(os.listdir(d)):
        if not name.endswith(".csv"):
            continue
        stem = name[:-4]
        cond = stem.rsplit("_", 1)[1]
        with open(os.path.join(d, name)) as f:
            rows = list(csv.DictReader(f))
        samples = [(int(r["t_ns"]), float(r["x_m"]), float(r["y_m"]), float(r["speed_mps"])) for r in rows]
        out.append((stem, cond, samples))
    return out


def crossings(points, a, b):
    """Indices i+1 where step i goes from strictly behind the line to on or
    ahead of it, with the crossing point inside the segment a-b."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    side = lambda p: -dy * (p[0] - a[0]) + dx * (p[1] - a[1])
    out = []
    for i in range(len(points) - 1):
        p, q = points[i], points[i + 1]
        sp, sq = side(p), side(q)
        if sp < 0 <= sq:
            t = sp / (sp - sq)
            hx, hy = p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t
            u = ((hx - a[0]) * dx + (hy - a[1]) * dy) / (dx * dx + dy * dy)
            if 0 <= u <= 1:
                out.append(i + 1)
    return out


def frechet(p, q):
    n, m = len(p), len(q)
    c = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            d = math.hypot(p[i][0] - q[j][0], p[i][1] - q[j][1])
            if i == 0 and j == 0:
                c[i][j] = d
            elif i == 0:
                c[i][j] = max(c[0][j - 1], d)
            elif j == 0:
                c[i][j] = max(c[i - 1][0], d)
            else:
                c[i][j] = max(min(c[i - 1][j], c[i - 1][j - 1], c[i][j - 1]), d)
    return c[n - 1][m - 1]


def resample(pts, n):
    cum = [0.0]
    for a, b in zip(pts, pts[1:]):
        cum.append(cum[-1] + math.hypot(b[0] - a[0], b[1] - a[1]))
    total = cum[-1]
    out = []
    for i in range(n):
        if i == n - 1:
            out.append(pts[-1])
            break
        s = total * i / (n - 1)
        k = max(0, min(bisect.bisect_left(cum, s) - 1, len(pts) - 2))
        while k + 1 < len(pts) - 1 and cum[k + 1] - cum[k] == 0:
            k += 1
        seg = cum[k + 1] - cum[k]
        t = min(1.0, max(0.0, (s - cum[k]) / seg)) if seg > 0 else 0.0
        a, b = pts[k], pts[k + 1]
        out.append((a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t))
    return out


def polygon_area(poly):
    terms = []
    for i in range(len(poly)):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % len(poly)]
        terms.append(x1 * y2 - x2 * y1)
    return abs(math.fsum(terms)) / 2


def area(p, q, n):
    rp, rq = resample(p, n), resample(q, n)
    return math.fsum(polygon_area([rp[i], rp[i + 1], rq[i + 1], rq[i]]) for i in range(n - 1))


def pstats(xs):
    mean = math.fsum(xs) / len(xs)
    return mean, math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / len(xs))


def main():
    sessions_dir, track_path = sys.argv[1], sys.argv[2]
    n = int(sys.argv[3]) if len(sys.argv) > 3 else 200
    with open(track_path) as f:
        track = json.load(f)
    a, b = track["start_line"]
    line = [tuple(p) for p in track["racing_line"]]
    if line[0] == line[-1]:
        line = line[:-1]
    per = {"A": [], "B": []}
    for stem, cond, samples in load_sessions(sessions_dir):
        pts = [(s[1], s[2]) for s in samples]
        cx = crossings(pts, a, b)
        assert len(cx) >= 2, stem
        lap = samples[cx[0]:cx[1] + 1]
        lp = [(s[1], s[2]) for s in lap]
        k = min(range(len(line)), key=lambda i: (math.hypot(line[i][0] - lp[0][0], line[i][1] - lp[0][1]), i))
        ref = line[k:] + line[:k] + [line[k]]
        speed = pstats([s[3] * 3.6 for s in lap])
        per[cond].append((frechet(lp, ref), area(lp, ref, n), speed[0], speed[1]))
    print("condition,metric,mean,std")
    for cond in "AB":
        rows = per[cond]
        for idx, metric in enumerate(["frechet_m", "area_m2", "speed_kmh", "speed_sd_kmh"]):
            mean, std = pstats([r[idx] for r in rows])
            print(f"{cond},{metric},{mean!r},{std!r}")


if __name__ == "__main__":
    main()
