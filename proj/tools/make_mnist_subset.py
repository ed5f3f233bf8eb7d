#!/usr/bin/env python3
"""Convert the 5000-image MNIST sample bundled with mlxtend into gzipped IDX files.

Usage: make_mnist_subset.py OUTDIR [--wheel PATH]

Without --wheel the installed mlxtend package is used.
"""
import argparse
import gzip
import io
import pathlib
import struct
import zipfile


def load_csv_bytes(wheel):
    if wheel:
        with zipfile.ZipFile(wheel) as z:
            return z.read("mlxtend/data/data/mnist_5k.csv.gz")
    import mlxtend.data.mnist as m
    return pathlib.Path(m.DATA_PATH).read_bytes()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("outdir")
    ap.add_argument("--wheel")
    args = ap.parse_args()

    rows = gzip.decompress(load_csv_bytes(args.wheel)).decode().splitlines()
    pixels = bytearray()
    labels = bytearray()
    for line in rows:
        vals = [int(float(v)) for v in line.split(",")]
        pixels.extend(vals[:-1])
        labels.append(vals[-1])
    n = len(rows)
    assert len(pixels) == n * 784

    out = pathlib.Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    images = struct.pack(">IIII", 2051, n, 28, 28) + bytes(pixels)
    lbls = struct.pack(">II", 2049, n) + bytes(labels)
    # mtime=0 keeps the archives byte-stable across regenerations
    with open(out / "mnist5k-images-idx3-ubyte.gz", "wb") as f:
        f.write(gzip.compress(images, mtime=0))
    with open(out / "mnist5k-labels-idx1-ubyte.gz", "wb") as f:
        f.write(gzip.compress(lbls, mtime=0))


if __name__ == "__main__":
    main()
