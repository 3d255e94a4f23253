#!/usr/bin/env python3
"""Build the committed 600-per-class IDX subset from the npm `mnist`
package's per-class JSON dumps (flat 784-float rows in [0,1]).

Usage: make_subset.py <digits-dir> <out-dir> [per-class]
"""
import json
import struct
import sys
from pathlib import Path


def main() -> None:
    src = Path(sys.argv[1])
    out = Path(sys.argv[2])
    per_class = int(sys.argv[3]) if len(sys.argv) > 3 else 600
    out.mkdir(parents=True, exist_ok=True)

    images = bytearray()
    labels = bytearray()
    total = 0
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        n = len(data) // 784
        if n < per_class:
            raise SystemExit(f"class {digit}: only {n} samples")
        for i in range(per_class):
            row = data[i * 784:(i + 1) * 784]
            images.extend(min(255, int(v * 255 + 0.5)) for v in row)
            labels.append(digit)
        total += per_class

    with open(out / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, total, 28, 28))
        f.write(images)
    with open(out / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, total))
        f.write(labels)
    print(f"wrote {total} samples to {out}")


if __name__ == "__main__":
    main()
