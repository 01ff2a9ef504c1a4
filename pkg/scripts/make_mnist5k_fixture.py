"""Write the 5000-image MNIST subset shipped with mlxtend as gzipped IDX files.

Usage: python scripts/make_mnist5k_fixture.py MLXTEND_WHEEL OUT_DIR

The wheel is read directly, so mlxtend does not need to be installed.
"""

import gzip
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main(wheel, out_dir):
    raw = zipfile.ZipFile(wheel).read(MEMBER)
    table = np.loadtxt(gzip.decompress(raw).decode().splitlines(), delimiter=",", dtype=np.int64)
    images = table[:, :-1].astype(np.uint8)
    labels = table[:, -1].astype(np.uint8)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = struct.pack(">IIII", 0x00000803, len(images), 28, 28)
    # mtime=0 keeps the archives byte-reproducible
    with gzip.GzipFile(out / "mnist5k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(header + images.tobytes())
    with gzip.GzipFile(out / "mnist5k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)) + labels.tobytes())


if __name__ == "__main__":
    main(*sys.argv[1:3])
