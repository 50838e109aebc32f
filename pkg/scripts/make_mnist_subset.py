"""Build the small MNIST IDX fixture used by the tests from a CSV of 785 columns.

The CSV holds 784 pixel values followed by the label, one image per row (the
5000-image sample shipped inside the mlxtend wheel has this layout). Rows are
shuffled with a fixed seed and split into train and test IDX pairs.

    python scripts/make_mnist_subset.py mnist_5k.csv.gz tests/data/mnist
"""

import argparse
from pathlib import Path

import numpy as np

from minn.tasks.mnist import IMAGE_MAGIC, LABEL_MAGIC, write_idx


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=1000)
    ap.add_argument("--test", type=int, default=500)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    rows = np.loadtxt(args.csv, delimiter=",", dtype=np.int64)
    if rows.shape[1] != 785:
        raise SystemExit(f"expected 785 columns, got {rows.shape[1]}")
    rows = rows[np.random.default_rng(args.seed).permutation(len(rows))]
    images = rows[:, :784].reshape(-1, 28, 28).astype(np.uint8)
    labels = rows[:, 784].astype(np.uint8)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = args.train
    m = n + args.test
    write_idx(out / "train-images-idx3-ubyte.gz", images[:n], IMAGE_MAGIC)
    write_idx(out / "train-labels-idx1-ubyte.gz", labels[:n], LABEL_MAGIC)
    write_idx(out / "t10k-images-idx3-ubyte.gz", images[n:m], IMAGE_MAGIC)
    write_idx(out / "t10k-labels-idx1-ubyte.gz", labels[n:m], LABEL_MAGIC)
    print(f"wrote {n} train / {m - n} test images to {out}")


if __name__ == "__main__":
    main()
