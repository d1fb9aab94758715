#!/usr/bin/env python3
# Copyright 2026 The yolic Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the shipped cell configurations in configs/.

Output is byte-identical to what `save_config` writes, so a load/save round
trip of any shipped file reproduces it exactly.
"""

import json
import math
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "configs"


def r6(v):
    return round(v + 0.0, 6) + 0.0


def rect(x0, y0, x1, y1):
    return {"kind": "rect", "box": [r6(x0), r6(y0), r6(x1), r6(y1)]}


def poly(pts):
    return {"kind": "poly", "pts": [[r6(x), r6(y)] for x, y in pts]}


def mirror(pts):
    return [(1.0 - x, y) for x, y in reversed(pts)]


def grid(x0, y0, x1, y1, rows, cols):
    cells = []
    for r in range(rows):
        for c in range(cols):
            cells.append(rect(x0 + (x1 - x0) * c / cols, y0 + (y1 - y0) * r / rows,
                              x0 + (x1 - x0) * (c + 1) / cols, y0 + (y1 - y0) * (r + 1) / rows))
    return cells


def dump(name, classes, cells):
    c = lambda v: json.dumps(v, separators=(",", ":"))
    lines = ["{",
             f'  "version": "yolic-config/1",',
             f'  "name": {c(name)},',
             f'  "ref_size": [224,224],',
             f'  "classes": {c(classes)},',
             '  "cells": [']
    lines.append(",\n".join("    " + c(cell) for cell in cells))
    lines += ["  ]", "}"]
    (OUT / f"{name}.json").write_text("\n".join(lines) + "\n")


def grid2x2():
    dump("grid2x2", ["alpha", "beta"], grid(0, 0, 1, 1, 2, 2))


# Eight traffic-sign cells across the top quarter, then an 8x12 road grid
# over the lower half.
def outdoor104():
    classes = ["Bump", "Column", "Dent", "Fence", "People", "Vehicle", "Wall", "Weed", "Zebra Crossing",
               "Traffic Cone", "Traffic Sign"]
    cells = grid(0, 0, 1, 0.25, 1, 8) + grid(0, 0.5, 1, 1, 8, 12)
    dump("outdoor104", classes, cells)


# Ten trapezoids along the path ahead (two lanes, five distance bands), two
# sector-shaped cells per lower flank, and sixteen skewed quads above.
def indoor30():
    horizon = 0.45
    bands = [0.45, 0.52, 0.61, 0.72, 0.85, 1.0]
    half = lambda y: 0.05 + (y - 0.4) * 0.75
    xl = lambda y: 0.5 - half(y)
    left = []
    for y0, y1 in zip(bands, bands[1:]):
        left.append([(xl(y0), y0), (0.5, y0), (0.5, y1), (xl(y1), y1)])
    front = []
    for quad in left:
        front += [poly(quad), poly(mirror(quad))]

    # Lower-left flank: triangle A-B-C split by an arc around C.
    a, b, cpt = (0.0, horizon), (xl(horizon), horizon), (0.0, 1.0)
    radius = 0.3
    phi_max = math.atan2(b[0] - cpt[0], cpt[1] - b[1])
    arc = [(cpt[0] + radius * math.sin(phi_max * k / 6), cpt[1] - radius * math.cos(phi_max * k / 6))
           for k in range(7)]
    sector = [cpt] + arc[::-1]
    outer = [a, b] + arc[::-1]
    sectors = [poly(outer), poly(mirror(outer)), poly(sector), poly(mirror(sector))]

    rows = [0.0, 0.12, 0.24, 0.35, horizon]
    split = lambda y: 0.2 + 0.1 * y
    upper = []
    for y0, y1 in zip(rows, rows[1:]):
        q1 = [(0.0, y0), (split(y0), y0), (split(y1), y1), (0.0, y1)]
        q2 = [(split(y0), y0), (0.5, y0), (0.5, y1), (split(y1), y1)]
        for q in (q1, q2):
            upper += [poly(q), poly(mirror(q))]
    dump("indoor30", ["Sofa", "Pillar", "Door", "Wall", "People", "Other"], front + sectors + upper)


# 160 small cells (8x20) across the middle band, 96 larger ones (6x16) below.
def cityscapes256():
    dump("cityscapes256", ["Vehicle", "People", "Other"], grid(0, 0.35, 1, 0.6, 8, 20) + grid(0, 0.6, 1, 1, 6, 16))


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    grid2x2()
    outdoor104()
    indoor30()
    cityscapes256()
