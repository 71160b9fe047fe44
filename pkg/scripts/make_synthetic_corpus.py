#!/usr/bin/env python3
"""Generate the procedural three-class validation corpus.

Example:
    python scripts/make_synthetic_corpus.py --out /tmp/scalp_synth --seed 0
"""

import argparse

from follicle.synthetic import DEFAULT_COUNTS, write_synthetic_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="corpus root directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--counts",
        default=",".join(str(c) for c in DEFAULT_COUNTS),
        help="images per class, e.g. 65,45,40",
    )
    parser.add_argument("--min-size", type=int, default=112)
    parser.add_argument("--max-size", type=int, default=160)
    args = parser.parse_args()

    counts = tuple(int(c) for c in args.counts.split(","))
    root = write_synthetic_corpus(
        args.out, counts=counts, seed=args.seed, size_range=(args.min_size, args.max_size)
    )
    print(f"wrote {sum(counts)} images ({counts}) to {root}")


if __name__ == "__main__":
    main()
