#!/usr/bin/env python3
"""Regenerates the colorizer golden files with exact rational arithmetic.

Outputs (next to this script):
  gradient.txt  256 lines "r g b", red -> yellow -> cyan -> blue
  ramp.txt      16x4 text depth grid, depth grows left to right
  ramp.ppm      expected colorization of ramp.txt
"""
from fractions import Fraction
from math import floor
from pathlib import Path

HERE = Path(__file__).resolve().parent
ANCHORS = [(255, 0, 0), (255, 255, 0), (0, 255, 255), (0, 0, 255)]


def round_half_up(q: Fraction) -> int:
    return floor(q + Fraction(1, 2))


def gradient():
    table = []
    for i in range(256):
        seg = min(i // 85, 2)
        u = Fraction(i - 85 * seg, 85)
        a, b = ANCHORS[seg], ANCHORS[seg + 1]
        table.append(tuple(round_half_up(a[c] * (1 - u) + b[c] * u) for c in range(3)))
    return table


def ramp():
    w, h = 16, 4
    # Meters: half a meter per column, a little extra per row.
    vals = [[Fraction(1) + Fraction(x, 2) + Fraction(y, 8) for x in range(w)] for y in range(h)]
    return w, h, vals


def main():
    table = gradient()
    assert table[0] == (255, 0, 0) and table[85] == (255, 255, 0)
    assert table[170] == (0, 255, 255) and table[255] == (0, 0, 255)
    (HERE / "gradient.txt").write_text("".join(f"{r} {g} {b}\n" for r, g, b in table))

    w, h, vals = ramp()
    lines = [f"# ramp depth map, meters\n{w} {h}\n"]
    lines += [" ".join(f"{float(v):g}" for v in row) + "\n" for row in vals]
    (HERE / "ramp.txt").write_text("".join(lines))

    flat = [v for row in vals for v in row]
    lo, hi = min(flat), max(flat)
    data = bytearray()
    for v in flat:
        q = (v - lo) / (hi - lo) * 255
        # Keep clear of rounding ties so float implementations agree.
        assert abs(q - floor(q) - Fraction(1, 2)) > Fraction(1, 1000), v
        data += bytes(table[round_half_up(q)])
    (HERE / "ramp.ppm").write_bytes(f"P6\n{w} {h}\n255\n".encode() + bytes(data))


if __name__ == "__main__":
    main()
