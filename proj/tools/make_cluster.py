#!/usr/bin/env python3
"""Write a deterministic, protein-like synthetic PQR cluster.

Atoms are grown one at a time: each new atom bonds (1.5 A) to a randomly
chosen existing atom, in a random direction, and is rejected if it comes
closer than 2.2 A to any other atom. Growth from uniformly chosen sites
keeps the cluster compact.

    python3 tools/make_cluster.py 906 --seed 4 > tests/data/cluster906.pqr
"""

import argparse
import math
import random
import sys

ELEMENTS = [("C", 1.70, 0.45), ("N", 1.55, 0.2), ("O", 1.52, 0.2), ("S", 1.80, 0.03), ("H", 1.20, 0.12)]
BOND = 1.5
MIN_SEP = 2.2


def unit_vector(rng):
    z = rng.uniform(-1.0, 1.0)
    t = rng.uniform(0.0, 2.0 * math.pi)
    s = math.sqrt(1.0 - z * z)
    return (s * math.cos(t), s * math.sin(t), z)


def grow(n, rng):
    pts = [(0.0, 0.0, 0.0)]
    cell = {}

    def key(p):
        return tuple(int(math.floor(c / MIN_SEP)) for c in p)

    cell.setdefault(key(pts[0]), []).append(0)
    attempts = 0
    while len(pts) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise RuntimeError("could not place atoms")
        parent = rng.randrange(len(pts))
        d = unit_vector(rng)
        p = tuple(pts[parent][i] + BOND * d[i] for i in range(3))
        k = key(p)
        ok = True
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for j in cell.get((k[0] + dx, k[1] + dy, k[2] + dz), ()):
                        if j != parent and math.dist(p, pts[j]) < MIN_SEP:
                            ok = False
        if ok:
            cell.setdefault(k, []).append(len(pts))
            pts.append(p)
    cx = [sum(p[i] for p in pts) / n for i in range(3)]
    return [tuple(p[i] - cx[i] for i in range(3)) for p in pts]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("atoms", type=int)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    pts = grow(args.atoms, rng)
    names = [e[0] for e in ELEMENTS]
    weights = [e[2] for e in ELEMENTS]
    out = sys.stdout
    out.write(f"REMARK synthetic cluster, {args.atoms} atoms, seed {args.seed}\n")
    for i, p in enumerate(pts):
        el = rng.choices(range(len(ELEMENTS)), weights)[0]
        q = round(rng.uniform(-0.6, 0.6), 4)
        out.write(
            f"ATOM  {i + 1:5d}  {names[el]:<3s} UNK A{i // 10 + 1:4d}    "
            f"{p[0]:8.3f}{p[1]:8.3f}{p[2]:8.3f} {q:7.4f} {ELEMENTS[el][1]:6.4f}\n"
        )
    out.write("END\n")


if __name__ == "__main__":
    main()
