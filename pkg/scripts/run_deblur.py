"""Deblur the Shepp-Logan phantom (or a PGM) with every solver at closed-form parameters."""

import argparse
from pathlib import Path

from lqadmm.applications.deblurring import deblur
from lqadmm.applications.images import phantom
from lqadmm.fileio import read_pgm, write_report
from lqadmm.operators import GridDims


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--image", type=Path)
    p.add_argument("--size", type=GridDims.parse, default=GridDims(64, 64))
    p.add_argument("--mu", type=float, nargs="+", default=[0.01, 0.25, 1.0, 10.0, 1e3])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("results/deblur"))
    args = p.parse_args()

    img = read_pgm(args.image) if args.image else phantom(args.size)
    for mu in args.mu:
        rep = deblur(img, mu=mu, seed=args.seed)
        write_report(rep, args.out / f"mu{mu:g}")
        print(rep.to_text())


if __name__ == "__main__":
    main()
