#!/usr/bin/env python3
"""Write public benchmark datasets as plain CSV (header row, target last)."""

import argparse
import csv
import pathlib
import sys


def wine(out: pathlib.Path) -> None:
    from sklearn.datasets import load_wine

    bunch = load_wine()
    names = [n.replace("/", "_") for n in bunch.feature_names]
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["class"])
        for row, label in zip(bunch.data, bunch.target):
            w.writerow([repr(float(v)) for v in row] + [f"class_{label}"])


def digits(out: pathlib.Path) -> None:
    from sklearn.datasets import load_digits

    bunch = load_digits()
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"px{i}" for i in range(bunch.data.shape[1])] + ["digit"])
        for row, label in zip(bunch.data, bunch.target):
            w.writerow([repr(float(v)) for v in row] + [str(label)])


FETCHERS = {"wine": wine, "digits": digits}


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("dataset", choices=sorted(FETCHERS))
    p.add_argument("--out", type=pathlib.Path, required=True)
    args = p.parse_args()
    FETCHERS[args.dataset](args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
