#!/usr/bin/env python3
"""Build a 10,000-digit MNIST subset in IDX format from the `mnist` npm package.

The package ships real MNIST digits as per-class JSON arrays of pixel values
already divided by 255 and rounded to three decimals, which is enough to
recover every original byte exactly. Examples are interleaved with a fixed
seed so any prefix of the output is roughly class-balanced.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-subset
"""

import argparse
import gzip
import json
import pathlib
import random
import struct


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--seed", type=int, default=20210205)
    args = ap.parse_args()

    examples = []
    for label in range(10):
        data = json.loads((args.digits_dir / f"{label}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for start in range(0, len(data), 784):
            pixels = bytes(round(v * 255) for v in data[start:start + 784])
            examples.append((pixels, label))

    random.Random(args.seed).shuffle(examples)
    n = len(examples)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    images = struct.pack(">IIII", 0x00000803, n, 28, 28)
    images += b"".join(p for p, _ in examples)
    labels = struct.pack(">II", 0x00000801, n) + bytes(l for _, l in examples)

    for name, payload in (("train-images-idx3-ubyte.gz", images),
                          ("train-labels-idx1-ubyte.gz", labels)):
        with open(args.out_dir / name, "wb") as raw:
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
                gz.write(payload)
    print(f"wrote {n} examples to {args.out_dir}")


if __name__ == "__main__":
    main()
