#!/usr/bin/env python3
"""Convert the digits bundled in the npm `mnist` package into gzipped IDX files.

The package ships 10,000 MNIST digits as per-class JSON arrays of 28x28
intensities in [0, 1] rounded to three decimals. Samples are interleaved
round-robin across classes so the output is not sorted by label.

usage: mnist_npm_to_idx.py <node_modules/mnist/src/digits> <out_dir>
"""
import gzip
import json
import struct
import sys
from pathlib import Path

SIDE = 28


def main() -> None:
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    per_class = []
    for digit in range(10):
        raw = json.loads((src / f"{digit}.json").read_text())["data"]
        n = len(raw) // (SIDE * SIDE)
        per_class.append([raw[i * SIDE * SIDE:(i + 1) * SIDE * SIDE] for i in range(n)])

    images, labels = [], []
    depth = max(len(c) for c in per_class)
    for i in range(depth):
        for digit, samples in enumerate(per_class):
            if i < len(samples):
                images.append(bytes(min(255, max(0, round(v * 255))) for v in samples[i]))
                labels.append(digit)

    out.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(out / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, len(images), SIDE, SIDE))
        for img in images:
            f.write(img)
    with gzip.GzipFile(out / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} images to {out}")


if __name__ == "__main__":
    main()
