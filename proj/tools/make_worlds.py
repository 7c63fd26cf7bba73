#!/usr/bin/env python3
"""Regenerates the bundled worlds in ../worlds (PGM ground truth + .world sidecar)."""

import argparse
import os

FREE, OCC = 254, 0


class Canvas:
    def __init__(self, width_m, height_m, res):
        self.res = res
        self.w = int(round(width_m / res))
        self.h = int(round(height_m / res))
        self.px = [[FREE] * self.w for _ in range(self.h)]

    def rect(self, x0, y0, x1, y1, value=OCC):
        """Fills the cells whose centres lie inside [x0,x1]x[y0,y1] (metres)."""
        for cy in range(self.h):
            y = (cy + 0.5) * self.res
            if not (y0 <= y <= y1):
                continue
            row = self.h - 1 - cy
            for cx in range(self.w):
                x = (cx + 0.5) * self.res
                if x0 <= x <= x1:
                    self.px[row][cx] = value

    def border(self, t):
        W, H = self.w * self.res, self.h * self.res
        self.rect(0, 0, W, t)
        self.rect(0, H - t, W, H)
        self.rect(0, 0, t, H)
        self.rect(W - t, 0, W, H)

    def hwall(self, y, x0, x1, t, doors=()):
        self.rect(x0, y - t / 2, x1, y + t / 2)
        for d0, d1 in doors:
            self.rect(d0, y - t, d1, y + t, FREE)

    def vwall(self, x, y0, y1, t, doors=()):
        self.rect(x - t / 2, y0, x + t / 2, y1)
        for d0, d1 in doors:
            self.rect(x - t, d0, x + t, d1, FREE)

    def save(self, path):
        with open(path, "wb") as f:
            f.write(b"P5\n%d %d\n255\n" % (self.w, self.h))
            for row in self.px:
                f.write(bytes(row))


def write_sidecar(path, name, image, res, start, seed, description, density=0.35):
    with open(path, "w") as f:
        f.write(f"# {description}\n")
        f.write(f"name = {name}\n")
        f.write(f"description = {description}\n")
        f.write(f"image = {image}\n")
        f.write(f"resolution = {res}\n")
        f.write("origin = 0 0\n")
        f.write("start = %g %g %g\n" % start)
        f.write(f"feature_seed = {seed}\n")
        f.write(f"feature_density = {density}\n")
        f.write("feature_offset = 0.1\n")


def toy_room(out):
    c = Canvas(6.0, 5.0, 0.1)
    c.border(0.2)
    c.rect(2.4, 2.0, 3.6, 3.0)  # central block, so the room can be circled
    c.save(os.path.join(out, "toy_room.pgm"))
    write_sidecar(os.path.join(out, "toy_room.world"), "toy_room", "toy_room.pgm", 0.1, (1.0, 1.0, 0.0), 11,
                  "6 x 5 m single room with a central block")


def loop_world(out):
    c = Canvas(10.0, 8.0, 0.1)
    c.border(0.2)
    c.rect(1.8, 1.8, 8.2, 6.2)  # ring corridor, 1.6 m wide
    c.save(os.path.join(out, "loop.pgm"))
    write_sidecar(os.path.join(out, "loop.world"), "loop", "loop.pgm", 0.1, (1.0, 1.0, 0.0), 23,
                  "10 x 8 m ring corridor around a solid block")


def apartment(out):
    c = Canvas(12.0, 10.0, 0.1)
    t = 0.2
    c.border(t)
    # living room (bottom left) / bedroom 1 (top left)
    c.hwall(5.5, 0.0, 5.0, t, doors=[(2.0, 3.1)])
    c.vwall(5.0, 5.5, 10.0, t, doors=[(7.4, 8.5)])
    # kitchen (bottom right)
    c.vwall(7.0, 0.0, 4.0, t, doors=[(1.4, 2.6)])
    c.hwall(4.0, 7.0, 12.0, t, doors=[(8.9, 10.1)])
    # bedroom 2 (top right)
    c.hwall(6.0, 8.5, 12.0, t, doors=[(9.9, 11.0)])
    c.vwall(8.5, 6.0, 10.0, t)
    # furniture
    c.rect(2.0, 1.5, 4.0, 2.3)    # sofa
    c.rect(9.2, 1.4, 10.6, 2.4)   # kitchen table
    c.rect(11.4, 0.2, 11.8, 3.0)  # counter
    c.rect(0.8, 7.6, 2.6, 9.6)    # bed
    c.rect(10.2, 8.0, 11.6, 9.6)  # bed
    c.rect(5.6, 9.2, 6.6, 9.8)    # cabinet
    c.save(os.path.join(out, "apartment.pgm"))
    write_sidecar(os.path.join(out, "apartment.world"), "apartment", "apartment.pgm", 0.1, (3.5, 3.5, 0.0), 7,
                  "12 x 10 m apartment: living room, kitchen, two bedrooms, hallway")


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(here, "..", "worlds"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    toy_room(args.out)
    loop_world(args.out)
    apartment(args.out)


if __name__ == "__main__":
    main()
