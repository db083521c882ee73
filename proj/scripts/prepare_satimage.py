#!/usr/bin/env python3
"""Fetch the Statlog Landsat satellite benchmark and write train/test CSVs.

sat.trn and sat.tst hold 36 spectral values plus a class per row. Classes
are 1,2,3,4,5,7 in the raw files (6 is unused); they are remapped to 0..5
preserving order. Output rows are the 36 features followed by the remapped
label, the layout the trainer's CSV loader expects.
"""

import argparse
import sys
import urllib.request
from pathlib import Path

BASE_SOURCES = [
    "https://archive.ics.uci.edu/ml/machine-learning-databases/statlog/satimage/",
]

FEATURES = 36
RAW_CLASSES = [1, 2, 3, 4, 5, 7]
LABEL_MAP = {raw: i for i, raw in enumerate(RAW_CLASSES)}
TRAIN_ROWS = 4435
TEST_ROWS = 2000


def fetch(url: str) -> str:
    with urllib.request.urlopen(url, timeout=120) as resp:
        return resp.read().decode("ascii")


def load_raw(name: str, local: str | None) -> str:
    if local:
        return Path(local).read_text()
    last = None
    for base in BASE_SOURCES:
        url = base + name
        try:
            print(f"fetching {url}")
            return fetch(url)
        except Exception as e:  # noqa: BLE001 - report and try the next mirror
            last = e
            print(f"  failed: {e}", file=sys.stderr)
    raise SystemExit(
        f"could not download {name} ({last}); pass --train-source/--test-source "
        "with local copies of sat.trn and sat.tst"
    )


def convert(text: str, expected_rows: int, which: str):
    rows = []
    for line_no, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != FEATURES + 1:
            raise SystemExit(
                f"{which} line {line_no}: expected {FEATURES + 1} fields, got {len(fields)}"
            )
        raw_label = int(fields[-1])
        if raw_label not in LABEL_MAP:
            raise SystemExit(f"{which} line {line_no}: class {raw_label} not in {RAW_CLASSES}")
        rows.append([float(v) for v in fields[:FEATURES]] + [LABEL_MAP[raw_label]])
    if len(rows) != expected_rows:
        raise SystemExit(f"{which}: {len(rows)} rows, expected {expected_rows}")
    if {int(r[-1]) for r in rows} != set(range(len(RAW_CLASSES))):
        raise SystemExit(f"{which}: not all {len(RAW_CLASSES)} classes present")
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train-source", help="local sat.trn instead of downloading")
    ap.add_argument("--test-source", help="local sat.tst instead of downloading")
    ap.add_argument(
        "--out-dir",
        default=str(Path(__file__).resolve().parent.parent / "data"),
        help="directory for satimage_train.csv and satimage_test.csv",
    )
    args = ap.parse_args()

    splits = [
        ("satimage_train.csv", convert(load_raw("sat.trn", args.train_source), TRAIN_ROWS, "sat.trn")),
        ("satimage_test.csv", convert(load_raw("sat.tst", args.test_source), TEST_ROWS, "sat.tst")),
    ]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, rows in splits:
        path = out_dir / name
        with path.open("w") as f:
            for row in rows:
                f.write(",".join(repr(v) for v in row[:-1]) + f",{int(row[-1])}\n")
        print(f"wrote {path} ({len(rows)} rows, {FEATURES} features, {len(RAW_CLASSES)} classes)")


if __name__ == "__main__":
    main()
