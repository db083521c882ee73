#!/usr/bin/env python3
"""Fetch the Deterding vowel benchmark and write train/test CSVs.

The raw file carries one row per utterance: a train/test flag, speaker and
sex columns, ten LPC-derived features, and a class in 0..10. The flag splits
the 990 rows into the standard 528 train / 462 test partition. Output rows
are the ten features followed by the class label, which is the layout the
trainer's CSV loader expects.
"""

import argparse
import sys
import urllib.request
from pathlib import Path

SOURCES = [
    "https://archive.ics.uci.edu/ml/machine-learning-databases/"
    "undocumented/connectionist-bench/vowel/vowel-context.data",
]

FEATURES = 10
CLASSES = 11
TRAIN_ROWS = 528
TEST_ROWS = 462


def fetch(url: str) -> str:
    with urllib.request.urlopen(url, timeout=60) as resp:
        return resp.read().decode("ascii")


def load_raw(args) -> str:
    if args.source:
        return Path(args.source).read_text()
    last = None
    for url in SOURCES:
        try:
            print(f"fetching {url}")
            return fetch(url)
        except Exception as e:  # noqa: BLE001 - report and try the next mirror
            last = e
            print(f"  failed: {e}", file=sys.stderr)
    raise SystemExit(
        f"could not download the vowel data ({last}); pass --source FILE "
        "with a local copy of vowel-context.data"
    )


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--source", help="local vowel-context.data instead of downloading")
    ap.add_argument(
        "--out-dir",
        default=str(Path(__file__).resolve().parent.parent / "data"),
        help="directory for vowel_train.csv and vowel_test.csv",
    )
    args = ap.parse_args()

    train, test = [], []
    for line_no, line in enumerate(load_raw(args).splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 3 + FEATURES + 1:
            raise SystemExit(f"line {line_no}: expected 14 fields, got {len(fields)}")
        flag = int(fields[0])
        feats = [float(v) for v in fields[3 : 3 + FEATURES]]
        label = int(fields[-1])
        if flag not in (0, 1):
            raise SystemExit(f"line {line_no}: train/test flag {flag} not 0 or 1")
        if not 0 <= label < CLASSES:
            raise SystemExit(f"line {line_no}: class {label} outside 0..{CLASSES - 1}")
        (train if flag == 0 else test).append(feats + [label])

    if len(train) != TRAIN_ROWS or len(test) != TEST_ROWS:
        raise SystemExit(
            f"split sizes {len(train)}/{len(test)} differ from the standard "
            f"{TRAIN_ROWS}/{TEST_ROWS} partition"
        )
    for name, rows in (("train", train), ("test", test)):
        seen = {int(r[-1]) for r in rows}
        if seen != set(range(CLASSES)):
            raise SystemExit(f"{name} split is missing classes: {sorted(seen)}")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, rows in (("vowel_train.csv", train), ("vowel_test.csv", test)):
        path = out_dir / name
        with path.open("w") as f:
            for row in rows:
                f.write(",".join(repr(v) for v in row[:-1]) + f",{int(row[-1])}\n")
        print(f"wrote {path} ({len(rows)} rows, {FEATURES} features, {CLASSES} classes)")


if __name__ == "__main__":
    main()
