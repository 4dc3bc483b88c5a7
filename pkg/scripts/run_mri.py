"""Cartesian MRI reconstruction from 50% of k-space rows."""

import argparse
from pathlib import Path

from lqadmm.applications.images import cartesian_mask, phantom
from lqadmm.applications.mri import mri_reconstruct
from lqadmm.fileio import read_mask, read_pgm, write_report
from lqadmm.operators import GridDims


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--image", type=Path)
    p.add_argument("--mask", type=Path)
    p.add_argument("--size", type=GridDims.parse, default=GridDims(32, 32))
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--mu", type=float, nargs="+", default=[0.1, 1.0, 10.0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("results/mri"))
    args = p.parse_args()

    img = read_pgm(args.image) if args.image else phantom(args.size)
    dims = GridDims(*img.shape)
    mask = read_mask(args.mask) if args.mask else cartesian_mask(dims, fraction=args.fraction, seed=args.seed)
    for mu in args.mu:
        rep = mri_reconstruct(img, mask, mu=mu, seed=args.seed)
        write_report(rep, args.out / f"mu{mu:g}")
        print(rep.to_text())


if __name__ == "__main__":
    main()
