#!/usr/bin/env python3
"""Build a small MNIST tree in IDX format from the 5000-digit CSV that ships
with mlxtend (mlxtend/data/data/mnist_5k.csv.gz).

Digits are shuffled with numpy RandomState(0); the first 4000 become the
training split and the remaining 1000 the test split.

usage: mnist_subset.py CSV_GZ OUT_DIR
"""
import struct
import sys
from pathlib import Path

import numpy as np


def write(out, prefix, X, y):
    with open(out / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(y), 28, 28))
        f.write(X.tobytes())
    with open(out / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(y)))
        f.write(y.tobytes())


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, out = sys.argv[1], Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    tmp = np.genfromtxt(src, delimiter=",")
    X = tmp[:, :-1].astype(np.uint8)
    y = tmp[:, -1].astype(np.uint8)
    perm = np.random.RandomState(0).permutation(len(y))
    X, y = X[perm], y[perm]
    write(out, "train", X[:4000], y[:4000])
    write(out, "t10k", X[4000:], y[4000:])


if __name__ == "__main__":
    main()
